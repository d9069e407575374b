"""qdsps — simulation and analysis toolkit for a quantum-dot/bimodal-cavity
single-photon source.

Subpackages:

- :mod:`qdsps.qed` — master-equation core (Hamiltonian, Liouvillian,
  steady state, time evolution)
- :mod:`qdsps.observables` — transmission spectra, photon correlations,
  detector response, saturation/mixture models
- :mod:`qdsps.hom` — two-photon interference statistics (delay tables, peak
  areas, indistinguishability extraction, Monte Carlo)
- :mod:`qdsps.fitting` — bounded Nelder-Mead driver and staged parameter fits
- :mod:`qdsps.device` — mode-overlap, cooperativity, Stark tuning and
  brightness helpers
- :mod:`qdsps.config` / :mod:`qdsps.tables` — run configuration and CSV I/O
- :mod:`qdsps.cli` — command-line front end
"""

from .qed import (
    SystemParams,
    HilbertSpace,
    DensityMatrix,
    Liouvillian,
    PolarizationProjector,
    build_hamiltonian,
    build_liouvillian,
    steady_state,
    evolve,
    propagate,
    SteadyStateError,
    EvolutionError,
)

__version__ = "0.1.0"

__all__ = [
    "SystemParams",
    "HilbertSpace",
    "DensityMatrix",
    "Liouvillian",
    "PolarizationProjector",
    "build_hamiltonian",
    "build_liouvillian",
    "steady_state",
    "evolve",
    "propagate",
    "SteadyStateError",
    "EvolutionError",
    "__version__",
]
