"""Gate-level three-qubit interferometry: probe P, system S, ancilla A.

Register layout is big-endian: qubit 0 is the most significant tensor factor.
The protocol circuits prepare the purification on S (x) A, apply the bilocal
transport conditioned on the probe through CNOT sandwiches, and read the probe
out in the X (``h``) or Y (``sdg; h``) basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .analytics import phase_of, purity_weight, state_independent_weight
from .band import ModelParams, transport_integral
from .purification import steps_for

PROBE, SYSTEM, ANCILLA = 0, 1, 2
DEFAULT_ROLES: Mapping[str, int] = {"P": PROBE, "S": SYSTEM, "A": ANCILLA}

# A CNOT sandwich rotates the probe-|1> branch by -beta and the probe-|0>
# branch by +beta, so <sx> + i<sy> is the complex conjugate of the transported
# overlap. The phase is therefore read as arg(<sx> - i<sy>).
READOUT_SIGN = -1

GATE_KINDS = ("ry", "h", "cx", "sdg", "barrier", "measure")
_ARITY = {"ry": 1, "h": 1, "sdg": 1, "cx": 2, "measure": 1}


class MalformedCircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    clbit: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise MalformedCircuitError(f"unsupported gate kind {self.kind!r}")
        arity = _ARITY.get(self.kind)
        if arity is not None and len(self.qubits) != arity:
            raise MalformedCircuitError(f"{self.kind} acts on {arity} qubit(s), got {self.qubits}")
        if self.kind == "barrier" and not self.qubits:
            raise MalformedCircuitError("barrier needs at least one qubit")
        if len(set(self.qubits)) != len(self.qubits):
            raise MalformedCircuitError(f"repeated qubit in {self.kind} {self.qubits}")
        if self.kind == "ry":
            if self.angle is None or not math.isfinite(self.angle):
                raise MalformedCircuitError(f"ry needs a finite angle, got {self.angle}")
        if any(q < 0 for q in self.qubits):
            raise MalformedCircuitError("negative qubit index")


def RY(qubit: int, angle: float) -> Gate:
    return Gate("ry", (qubit,), angle=float(angle))


def H(qubit: int) -> Gate:
    return Gate("h", (qubit,))


def CNOT(control: int, target: int) -> Gate:
    return Gate("cx", (control, target))


def SDG(qubit: int) -> Gate:
    return Gate("sdg", (qubit,))


def BARRIER(*qubits: int) -> Gate:
    return Gate("barrier", tuple(qubits))


def MEASURE(qubit: int, clbit: int | None = None) -> Gate:
    return Gate("measure", (qubit,), clbit=qubit if clbit is None else clbit)


@dataclass(frozen=True, eq=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    roles: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_ROLES), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        measured: set[int] = set()
        for g in self.gates:
            for q in g.qubits:
                if q >= self.n_qubits:
                    raise MalformedCircuitError(
                        f"{g.kind} on qubit {q} outside a {self.n_qubits}-qubit register"
                    )
            if g.kind != "barrier" and measured.intersection(g.qubits):
                raise MalformedCircuitError(f"{g.kind} on {g.qubits} after measurement")
            if g.kind == "measure":
                measured.update(g.qubits)

    @property
    def probe(self) -> int:
        return self.roles.get("P", PROBE)

    def without_measurements(self) -> "Circuit":
        return Circuit(self.n_qubits, tuple(g for g in self.gates if g.kind != "measure"), self.roles)

    def unitary(self) -> np.ndarray:
        dim = 2**self.n_qubits
        cols = [simulate_statevector(self, _basis_state(dim, k)) for k in range(dim)]
        return np.stack(cols, axis=1)


@dataclass(frozen=True)
class ProtocolAngles:
    gamma: float
    beta1: float
    beta2: float
    alpha1: float = 0.0
    alpha2: float = 0.0


@dataclass(frozen=True)
class ProbeReadout:
    exp_x: float
    exp_y: float
    phase: float
    shots: int | None = None  # None means exact expectations
    stderr_x: float = 0.0
    stderr_y: float = 0.0

    @property
    def defined(self) -> bool:
        return not math.isnan(self.phase)


@dataclass(frozen=True)
class ShotResult:
    counts_x: dict[str, int]
    counts_y: dict[str, int]
    readout: ProbeReadout


# -- gate matrices -----------------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
_SDG = np.array([[1, 0], [0, -1j]], dtype=complex)
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def ry_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def gate_matrix(gate: Gate) -> np.ndarray:
    if gate.kind == "ry":
        return ry_matrix(gate.angle)
    if gate.kind == "h":
        return _H
    if gate.kind == "sdg":
        return _SDG
    if gate.kind == "cx":
        return _CX
    raise MalformedCircuitError(f"{gate.kind} has no unitary matrix")


def apply_matrix(state: np.ndarray, matrix: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Apply a ``2^k x 2^k`` matrix to ``qubits`` of an n-qubit statevector."""
    k = len(qubits)
    psi = state.reshape([2] * n)
    psi = np.moveaxis(psi, list(qubits), list(range(k)))
    shape = psi.shape
    psi = (matrix @ psi.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(psi, list(range(k)), list(qubits)).reshape(-1)


def _basis_state(dim: int, k: int = 0) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[k] = 1.0
    return v


def simulate_statevector(circuit: Circuit, initial: np.ndarray | None = None) -> np.ndarray:
    """Exact pure-state evolution; measurements and barriers are skipped."""
    n = circuit.n_qubits
    state = _basis_state(2**n) if initial is None else np.asarray(initial, dtype=complex).copy()
    if state.shape != (2**n,):
        raise MalformedCircuitError(f"initial state has shape {state.shape}, expected {(2**n,)}")
    for g in circuit.gates:
        if g.kind in ("barrier", "measure"):
            continue
        state = apply_matrix(state, gate_matrix(g), g.qubits, n)
    return state


# -- readout -----------------------------------------------------------------

def probe_density(state: np.ndarray, n_qubits: int, probe: int = PROBE) -> np.ndarray:
    psi = np.moveaxis(state.reshape([2] * n_qubits), probe, 0).reshape(2, -1)
    return psi @ psi.conj().T


def probe_expectations(state: np.ndarray, n_qubits: int = 3, probe: int = PROBE) -> tuple[float, float]:
    """``(<sx>, <sy>)`` of the probe qubit."""
    rho = probe_density(state, n_qubits, probe)
    return 2.0 * rho[0, 1].real, -2.0 * rho[0, 1].imag


def probe_zero_probability(state: np.ndarray, n_qubits: int, probe: int = PROBE) -> float:
    return float(probe_density(state, n_qubits, probe)[0, 0].real)


def extract_phase(exp_x: float, exp_y: float, offset_y: float = 0.0) -> float:
    return phase_of(complex(exp_x, READOUT_SIGN * (exp_y - offset_y)))


def split_readout(circuit: Circuit) -> tuple[Circuit, tuple[Gate, ...]]:
    """Separate the trailing probe-only basis change and measurement."""
    p = circuit.probe
    gates = list(circuit.gates)
    i = len(gates)
    while i > 0 and gates[i - 1].qubits == (p,) and gates[i - 1].kind in ("h", "sdg", "measure"):
        i -= 1
    return Circuit(circuit.n_qubits, tuple(gates[:i]), circuit.roles), tuple(gates[i:])


def readout_gates(basis: str | None, probe: int = PROBE) -> tuple[Gate, ...]:
    if basis is None:
        return ()
    if basis == "x":
        return (H(probe), MEASURE(probe, 0))
    if basis == "y":
        return (SDG(probe), H(probe), MEASURE(probe, 0))
    raise ValueError(f"readout basis must be 'x', 'y' or None, got {basis!r}")


def with_readout_basis(circuit: Circuit, basis: str | None) -> Circuit:
    body, _ = split_readout(circuit)
    return Circuit(body.n_qubits, body.gates + readout_gates(basis, body.probe), body.roles)


def readout(circuit: Circuit) -> ProbeReadout:
    """Exact probe expectations from the compiled X- and Y-basis circuits."""
    p, n = circuit.probe, circuit.n_qubits
    p0x = probe_zero_probability(simulate_statevector(with_readout_basis(circuit, "x")), n, p)
    p0y = probe_zero_probability(simulate_statevector(with_readout_basis(circuit, "y")), n, p)
    ex, ey = 2.0 * p0x - 1.0, 2.0 * p0y - 1.0
    return ProbeReadout(exp_x=ex, exp_y=ey, phase=extract_phase(ex, ey))


def sample_probe(
    p0_x: float,
    p0_y: float,
    n_shots: int,
    rng: np.random.Generator | int | None,
    offset_y: float = 0.0,
) -> ShotResult:
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    rng = np.random.default_rng(rng)
    n0x = int(rng.binomial(n_shots, min(max(p0_x, 0.0), 1.0)))
    n0y = int(rng.binomial(n_shots, min(max(p0_y, 0.0), 1.0)))
    ex = (2 * n0x - n_shots) / n_shots
    ey = (2 * n0y - n_shots) / n_shots
    ro = ProbeReadout(
        exp_x=ex,
        exp_y=ey,
        phase=extract_phase(ex, ey, offset_y),
        shots=n_shots,
        stderr_x=math.sqrt((1.0 - ex * ex) / n_shots),
        stderr_y=math.sqrt((1.0 - ey * ey) / n_shots),
    )
    return ShotResult({"0": n0x, "1": n_shots - n0x}, {"0": n0y, "1": n_shots - n0y}, ro)


def sample_shots(
    circuit: Circuit, n_shots: int, seed: np.random.Generator | int | None, offset_y: float = 0.0
) -> ShotResult:
    p, n = circuit.probe, circuit.n_qubits
    p0x = probe_zero_probability(simulate_statevector(with_readout_basis(circuit, "x")), n, p)
    p0y = probe_zero_probability(simulate_statevector(with_readout_basis(circuit, "y")), n, p)
    return sample_probe(p0x, p0y, n_shots, seed, offset_y)


# -- protocol builders ------------------------------------------------------

def _conditional_transport(prep: list[Gate], beta1: float, beta2: float, basis: str | None) -> Circuit:
    gates = [
        *prep,
        H(PROBE),
        CNOT(PROBE, ANCILLA),
        CNOT(PROBE, SYSTEM),
        BARRIER(PROBE, SYSTEM, ANCILLA),
        RY(ANCILLA, beta2),
        RY(SYSTEM, beta1),
        BARRIER(PROBE, SYSTEM, ANCILLA),
        CNOT(PROBE, ANCILLA),
        CNOT(PROBE, SYSTEM),
        *readout_gates(basis),
    ]
    return Circuit(3, tuple(gates))


def _purification_prep(gamma: float) -> list[Gate]:
    return [RY(SYSTEM, gamma), CNOT(SYSTEM, ANCILLA)]


def build_state_dependent(gamma: float, beta1: float, beta2: float, basis: str | None = "x") -> Circuit:
    return _conditional_transport(_purification_prep(gamma), beta1, beta2, basis)


def build_transport_check(
    gamma: float, alpha1: float, alpha2: float, beta1: float, beta2: float, basis: str | None = "x"
) -> Circuit:
    prep = _purification_prep(gamma) + [RY(SYSTEM, alpha1), RY(ANCILLA, alpha2)]
    return _conditional_transport(prep, beta1, beta2, basis)


def build_state_independent(gamma: float, I: float, p_T: float, basis: str | None = "x") -> Circuit:
    return _conditional_transport(_purification_prep(gamma), I, p_T * I, basis)


def build_from_angles(angles: ProtocolAngles, basis: str | None = "x") -> Circuit:
    if angles.alpha1 == 0.0 and angles.alpha2 == 0.0:
        return build_state_dependent(angles.gamma, angles.beta1, angles.beta2, basis)
    return build_transport_check(
        angles.gamma, angles.alpha1, angles.alpha2, angles.beta1, angles.beta2, basis
    )


# -- angle tables -----------------------------------------------------------

def mixedness_angle(r: float) -> float:
    """``gamma = 2 arccos sqrt(1 - r)``: RY(gamma)|0> has weight r on |1>."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"mixedness must lie in [0, 1], got {r}")
    return 2.0 * math.acos(math.sqrt(1.0 - r))


def state_dependent_angles(
    r: float, params: ModelParams, p_a: float | None = None, t_f: float = 1.0
) -> ProtocolAngles:
    weight = purity_weight(r) if p_a is None else p_a
    I = transport_integral(0.0, t_f, params)
    return ProtocolAngles(gamma=mixedness_angle(r), beta1=I, beta2=weight * I)


def check_open_path(t_f: float) -> None:
    if not 0.5 < t_f < 1.0:
        raise ValueError(f"state-independent protocol needs 1/2 < t_f < 1, got {t_f}")


def state_independent_angles(r: float, params: ModelParams, t_f: float) -> tuple[ProtocolAngles, float, float]:
    """Angles for the probe-agnostic protocol; returns ``(angles, I, p_T)``."""
    check_open_path(t_f)
    I = transport_integral(0.0, t_f, params)
    weight = state_independent_weight(I)
    return ProtocolAngles(gamma=mixedness_angle(r), beta1=I, beta2=weight * I), I, weight


def transport_check_angles(
    r: float, params: ModelParams, step: int, dt: float = 0.1, p_a: float | None = None
) -> ProtocolAngles:
    """Angles for the step ``n dt -> (n+1) dt`` of the parallel-transport test.

    RY(a) = exp(-i a/2 sigma_y), so preparing the transported purification at
    ``n dt`` needs twice the accumulated transport angle.
    """
    n_steps = steps_for(dt)
    if not 0 <= step < n_steps:
        raise ValueError(f"step must lie in [0, {n_steps}), got {step}")
    weight = purity_weight(r) if p_a is None else p_a
    t0, t1 = step * dt, min((step + 1) * dt, 1.0)
    alpha1 = 2.0 * transport_integral(0.0, t0, params)
    beta1 = transport_integral(t0, t1, params)
    return ProtocolAngles(
        gamma=mixedness_angle(r),
        beta1=beta1,
        beta2=weight * beta1,
        alpha1=alpha1,
        alpha2=weight * alpha1,
    )
