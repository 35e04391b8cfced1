"""Geometric phases of qubit trajectories under non-Markovian quantum state diffusion.

Modules: ``core`` (states, operators, bath, grid), ``noise`` (coloured noise),
``qsd`` (O-operator and trajectory integration), ``ensemble`` (parallel
ensemble sums), ``phase`` (phase estimators), ``oracle`` (analytic and
brute-force references), ``validation``, ``config``, ``records`` and ``cli``.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    BathSpectrum,
    BlochPath,
    CouplingKind,
    DomainError,
    PureState,
    QSDPhaseError,
    SystemModel,
    TimeGrid,
    initial_state,
)
from .ensemble import ConfigurationError, EnsembleSums, run_ensemble, simulate_trajectories  # noqa: E402
from .noise import GeneratorKind, NoiseRealization, sample_noise  # noqa: E402
from .phase import (  # noqa: E402
    PhaseDecomposition,
    PhaseEstimate,
    ensemble_geometric_phase_product,
    pancharatnam_phase,
)
from .qsd import OOperatorSpec, Trajectory, integrate_trajectory  # noqa: E402

__all__ = [
    "BathSpectrum", "BlochPath", "ConfigurationError", "CouplingKind", "DomainError", "EnsembleSums",
    "GeneratorKind", "NoiseRealization", "OOperatorSpec", "PhaseDecomposition", "PhaseEstimate", "PureState",
    "QSDPhaseError", "SystemModel", "TimeGrid", "Trajectory", "ensemble_geometric_phase_product",
    "initial_state", "integrate_trajectory", "pancharatnam_phase", "run_ensemble", "sample_noise",
    "simulate_trajectories", "__version__",
]
