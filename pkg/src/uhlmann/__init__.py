"""Topological Uhlmann phases of a mixed two-band qubit and the three-qubit
interferometric protocols that measure them."""

__version__ = "0.1.0"

from .band import (
    GapClosedError,
    GaugeSingularityError,
    ModelParams,
    QuadratureError,
    Schedule,
    eigenstates,
    gauge_g,
    generator_h,
    transport_integral,
    winding_number,
    winding_vector,
)
from .analytics import (
    critical_mixedness,
    mixed_state,
    p_critical,
    p_T,
    phase_diagram,
    purity_weight,
    relative_phase_analytic,
    uhlmann_connection,
    uhlmann_holonomy,
    uhlmann_phase_closed,
)
from .purification import initial_purification, overlap_phase, parallel_transport_residuals, transport
from .circuits import (
    Circuit,
    Gate,
    ProbeReadout,
    build_from_angles,
    build_state_dependent,
    build_state_independent,
    build_transport_check,
    extract_phase,
    probe_expectations,
    readout,
    sample_shots,
    simulate_statevector,
    state_dependent_angles,
    state_independent_angles,
    transport_check_angles,
)
from .noise import NoiseConfig, PRESETS, lindblad_dissipators, propagate, run_noisy
from .qasm import emit, parse

__all__ = [name for name in dir() if not name.startswith("_")]
