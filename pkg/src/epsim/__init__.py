"""Simulation toolkit for encircling exceptional points of a dissipative transmon qubit.

Modules
-------
spectra    eigenvalues, eigenvectors, EPs and Riemann-sheet sampling
paths      closed parameter loops
evolve     no-jump and Lindblad propagation, post-selection, ideal pulses
protocols  tomography, phase interferometry and transfer-map experiments
analysis   Pauli components, eigenstate populations, fringe fitting
cli        the ``epsim`` command
"""

__version__ = "0.1.0"

from .spectra import (  # noqa: E402
    EPLocation,
    Eigenpair,
    HamiltonianParams,
    InvalidParameterError,
    build_hamiltonian,
    eigensystem,
    ep_locations,
    riemann_surface,
)
from .paths import ParameterLoop, loop_params, winding_count  # noqa: E402
from .evolve import (  # noqa: E402
    DissipationRates,
    IntegratorConfig,
    PostSelectionError,
    StepSizeError,
    apply_rotation,
    postselect_ef,
    propagate_lindblad,
    propagate_nh,
)
from .analysis import (  # noqa: E402
    eigenstate_populations,
    fit_fringe,
    pauli_components,
    phase_difference_summary,
    sample_expectation,
)
from .protocols import (  # noqa: E402
    run_encircle_tomography,
    run_phase_interferometry,
    run_transfer_map,
)

__all__ = [
    "__version__",
    "EPLocation", "Eigenpair", "HamiltonianParams", "InvalidParameterError",
    "build_hamiltonian", "eigensystem", "ep_locations", "riemann_surface",
    "ParameterLoop", "loop_params", "winding_count",
    "DissipationRates", "IntegratorConfig", "PostSelectionError", "StepSizeError",
    "apply_rotation", "postselect_ef", "propagate_lindblad", "propagate_nh",
    "eigenstate_populations", "fit_fringe", "pauli_components",
    "phase_difference_summary", "sample_expectation",
    "run_encircle_tomography", "run_phase_interferometry", "run_transfer_map",
]
