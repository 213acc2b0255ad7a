"""Open-system gate engine: each gate runs for a finite time under its
Hamiltonian plus amplitude damping and pure dephasing on every qubit.

Density matrices are vectorized row-major, so ``vec(A rho B) = (A kron B^T) vec(rho)``.
Times are in microseconds internally; the config stores gate times in ns.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable

import numpy as np
from scipy.linalg import expm

from .circuits import (
    Circuit,
    Gate,
    ProbeReadout,
    extract_phase,
    readout_gates,
    sample_probe,
    split_readout,
)

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_LOWER = np.array([[0, 1], [0, 0]], dtype=complex)  # sigma_- = |0><1|

TRACE_TOL = 1e-10
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = -1e-9


class PhysicalityError(RuntimeError):
    pass


def ix_strength(m_mhz: float, angular: bool = True) -> float:
    """Residual IX strength in rad/us; ``angular`` reads MHz as 2*pi*MHz."""
    return 2.0 * math.pi * m_mhz if angular else m_mhz


@dataclass(frozen=True)
class QubitCoherence:
    t1_us: float = math.inf
    t2_us: float = math.inf

    def __post_init__(self):
        if not (self.t1_us > 0 and self.t2_us > 0):
            raise ValueError("T1 and T2 must be positive")
        if self.t2_us > 2.0 * self.t1_us:
            raise ValueError(f"unphysical coherence: T2={self.t2_us} > 2*T1={2 * self.t1_us}")

    @property
    def gamma_minus(self) -> float:
        return 1.0 / self.t1_us

    @property
    def gamma_z(self) -> float:
        # chosen so that coherences decay exactly as exp(-t/T2)
        return max((1.0 / self.t2_us - 0.5 / self.t1_us) / 2.0, 0.0)


@dataclass(frozen=True)
class NoiseConfig:
    qubits: tuple[QubitCoherence, ...] = (QubitCoherence(),) * 3
    m_rad_per_us: float = ix_strength(0.4)
    mu_rad_per_us: float | None = None  # None: pi/4 over the ZX90 window
    tau_1q_ns: float = 200.0
    tau_zx90_ns: float = 600.0
    wait_1q_ns: float = 5.0
    wait_2q_ns: float = 40.0

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if self.tau_1q_ns <= 0 or self.tau_zx90_ns <= 0:
            raise ValueError("gate durations must be positive")
        if self.wait_1q_ns < 0 or self.wait_2q_ns < 0:
            raise ValueError("waiting times must be non-negative")

    @property
    def mu(self) -> float:
        if self.mu_rad_per_us is not None:
            return self.mu_rad_per_us
        return (math.pi / 4.0) / (self.tau_zx90_ns * 1e-3)

    @classmethod
    def noiseless(cls, n_qubits: int = 3) -> "NoiseConfig":
        return cls(qubits=(QubitCoherence(),) * n_qubits, m_rad_per_us=0.0)

    @classmethod
    def from_preset(cls, name: str, angular_m: bool = True) -> "NoiseConfig":
        try:
            t1, t2 = PRESETS[name]
        except KeyError:
            raise KeyError(f"unknown noise preset {name!r}; known: {sorted(PRESETS)}") from None
        return cls(
            qubits=tuple(QubitCoherence(a, b) for a, b in zip(t1, t2)),
            m_rad_per_us=ix_strength(0.4, angular=angular_m),
        )

    def to_dict(self) -> dict[str, Any]:
        def finite(x):
            return None if math.isinf(x) else x

        return {
            "qubits": [{"t1_us": finite(q.t1_us), "t2_us": finite(q.t2_us)} for q in self.qubits],
            "m_rad_per_us": self.m_rad_per_us,
            "mu_rad_per_us": self.mu_rad_per_us,
            "tau_1q_ns": self.tau_1q_ns,
            "tau_zx90_ns": self.tau_zx90_ns,
            "wait_1q_ns": self.wait_1q_ns,
            "wait_2q_ns": self.wait_2q_ns,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "NoiseConfig":
        def time(x):
            return math.inf if x is None else float(x)

        defaults = cls()
        return cls(
            qubits=tuple(
                QubitCoherence(time(q.get("t1_us")), time(q.get("t2_us"))) for q in doc["qubits"]
            ),
            m_rad_per_us=float(doc.get("m_rad_per_us", defaults.m_rad_per_us)),
            mu_rad_per_us=doc.get("mu_rad_per_us"),
            tau_1q_ns=float(doc.get("tau_1q_ns", defaults.tau_1q_ns)),
            tau_zx90_ns=float(doc.get("tau_zx90_ns", defaults.tau_zx90_ns)),
            wait_1q_ns=float(doc.get("wait_1q_ns", defaults.wait_1q_ns)),
            wait_2q_ns=float(doc.get("wait_2q_ns", defaults.wait_2q_ns)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NoiseConfig":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


# (T1 per qubit, T2 per qubit) in us, qubits ordered P, S, A
PRESETS: dict[str, tuple[tuple[float, ...], tuple[float, ...]]] = {
    "ibmqx2-fig3a": ((45.0, 31.0, 46.0), (40.0, 27.0, 80.0)),
    "ibmqx2-fig3c": ((41.0, 52.0, 62.0), (31.0, 37.0, 87.0)),
    "ibmqx2-errormodel": ((51.0, 51.0, 51.0), (51.0, 51.0, 51.0)),
}


def load_noise(spec: str) -> NoiseConfig:
    """Preset name or path to a JSON document."""
    if spec in PRESETS:
        return NoiseConfig.from_preset(spec)
    path = Path(spec)
    if not path.is_file():
        raise KeyError(f"{spec!r} is neither a noise preset ({sorted(PRESETS)}) nor a file")
    return NoiseConfig.from_json(path.read_text())


# -- operators ---------------------------------------------------------------

def embed_product(ops: dict[int, np.ndarray], n: int) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for q in range(n):
        out = np.kron(out, ops.get(q, _I2))
    return out


@dataclass(frozen=True)
class Dissipator:
    rate: float
    operator: np.ndarray
    label: str = ""


def lindblad_dissipators(config: NoiseConfig, qubit: int, n_qubits: int = 3) -> list[Dissipator]:
    """Amplitude damping ``sigma_-`` at 1/T1 and dephasing ``sigma_z`` on one qubit."""
    coh = config.qubits[qubit]
    out = []
    if coh.gamma_minus > 0:
        out.append(Dissipator(coh.gamma_minus, embed_product({qubit: _LOWER}, n_qubits), f"minus{qubit}"))
    if coh.gamma_z > 0:
        out.append(Dissipator(coh.gamma_z, embed_product({qubit: _Z}, n_qubits), f"z{qubit}"))
    return out


def all_dissipators(config: NoiseConfig, n_qubits: int) -> list[Dissipator]:
    if len(config.qubits) < n_qubits:
        raise ValueError(f"noise config covers {len(config.qubits)} qubits, circuit has {n_qubits}")
    return [d for q in range(n_qubits) for d in lindblad_dissipators(config, q, n_qubits)]


@dataclass(frozen=True)
class Liouvillian:
    coherent: np.ndarray
    dissipative: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return self.coherent + self.dissipative

    @property
    def dim(self) -> int:
        return int(round(math.sqrt(self.coherent.shape[0])))

    def trace_defect(self) -> float:
        """Largest entry of ``vec(1)^T L``; zero for a trace-preserving generator."""
        d = self.dim
        tr = np.eye(d).reshape(-1)
        return float(np.abs(tr @ self.matrix).max())


def coherent_superop(H: np.ndarray) -> np.ndarray:
    eye = np.eye(H.shape[0])
    return -1j * (np.kron(H, eye) - np.kron(eye, H.T))


def dissipator_superop(d: Dissipator) -> np.ndarray:
    L = d.operator
    LdL = L.conj().T @ L
    eye = np.eye(L.shape[0])
    return d.rate * (np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T))


def build_liouvillian(H: np.ndarray | None, dissipators: list[Dissipator], dim: int) -> Liouvillian:
    coh = coherent_superop(H) if H is not None else np.zeros((dim * dim, dim * dim), dtype=complex)
    diss = np.zeros((dim * dim, dim * dim), dtype=complex)
    for d in dissipators:
        diss += dissipator_superop(d)
    return Liouvillian(coherent=coh, dissipative=diss)


# -- gate compilation ----------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """Constant Hamiltonian (rad/us) applied for ``duration_us``, then an idle wait."""

    hamiltonian: np.ndarray = field(repr=False)
    duration_us: float
    wait_us: float
    label: str


def _rotation_segment(pauli: np.ndarray, angle: float, qubit: int, n: int, config: NoiseConfig, label: str) -> Segment:
    duration = abs(angle) / (2.0 * math.pi) * config.tau_1q_ns * 1e-3
    H = (angle / (2.0 * duration)) * embed_product({qubit: pauli}, n)
    return Segment(H, duration, config.wait_1q_ns * 1e-3, label)


def gate_hamiltonian(gate: Gate, config: NoiseConfig, n_qubits: int = 3) -> list[Segment]:
    """Compile one gate into timed constant-Hamiltonian segments.

    A CNOT becomes a cross-resonance ZX90 window (with the residual IX drive on
    the target) followed by framing rotations RZ(-pi/2) on the control and
    RX(-pi/2) on the target. Zero-angle rotations and barriers take no time.
    """
    n = n_qubits
    if gate.kind == "ry":
        if gate.angle == 0.0:
            return []
        return [_rotation_segment(_Y, gate.angle, gate.qubits[0], n, config, "ry")]
    if gate.kind == "h":
        axis = (_X + _Z) / math.sqrt(2.0)
        return [_rotation_segment(axis, math.pi, gate.qubits[0], n, config, "h")]
    if gate.kind == "sdg":
        return [_rotation_segment(_Z, -math.pi / 2.0, gate.qubits[0], n, config, "sdg")]
    if gate.kind == "cx":
        c, t = gate.qubits
        H_zx = config.mu * embed_product({c: _Z, t: _X}, n) + config.m_rad_per_us * embed_product({t: _X}, n)
        return [
            Segment(H_zx, config.tau_zx90_ns * 1e-3, config.wait_2q_ns * 1e-3, "zx90"),
            _rotation_segment(_Z, -math.pi / 2.0, c, n, config, "frame-rz"),
            _rotation_segment(_X, -math.pi / 2.0, t, n, config, "frame-rx"),
        ]
    if gate.kind in ("barrier", "measure"):
        return []
    raise ValueError(f"unsupported gate {gate.kind!r} in the noise model")


def compiled_unitary(gate: Gate, config: NoiseConfig, n_qubits: int = 3) -> np.ndarray:
    """Coherent part of a compiled gate, ignoring dissipation and waits."""
    U = np.eye(2**n_qubits, dtype=complex)
    for seg in gate_hamiltonian(gate, config, n_qubits):
        U = expm(-1j * seg.hamiltonian * seg.duration_us) @ U
    return U


# -- propagation --------------------------------------------------------------

def check_physical(rho: np.ndarray, where: str = "") -> None:
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise PhysicalityError(f"trace {tr} deviates from 1 {where}")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > HERMITIAN_TOL:
        raise PhysicalityError(f"Hermiticity violated by {herm:.3e} {where}")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lo < POSITIVITY_TOL:
        raise PhysicalityError(f"negative eigenvalue {lo:.3e} {where}")


def propagate(rho: np.ndarray, liouvillian: Liouvillian, tau: float, check: bool = False) -> np.ndarray:
    """``exp(L tau) rho`` by dense scaled-and-squared exponential."""
    d = rho.shape[0]
    if tau == 0.0:
        return rho.copy()
    out = (expm(liouvillian.matrix * tau) @ rho.reshape(-1)).reshape(d, d)
    if check:
        check_physical(out)
    return out


@lru_cache(maxsize=4096)
def _gate_propagators(gate: Gate, config: NoiseConfig, n_qubits: int) -> tuple[np.ndarray, ...]:
    dim = 2**n_qubits
    diss = all_dissipators(config, n_qubits)
    idle = build_liouvillian(None, diss, dim)
    out = []
    for seg in gate_hamiltonian(gate, config, n_qubits):
        out.append(expm(build_liouvillian(seg.hamiltonian, diss, dim).matrix * seg.duration_us))
        if seg.wait_us > 0:
            out.append(expm(idle.matrix * seg.wait_us))
    return tuple(out)


def evolve_density(
    circuit: Circuit,
    config: NoiseConfig,
    rho0: np.ndarray | None = None,
    check: bool = True,
    on_step: Callable[[Gate, np.ndarray], None] | None = None,
) -> np.ndarray:
    """Run every gate of ``circuit`` sequentially as open-system evolution."""
    n = circuit.n_qubits
    dim = 2**n
    if rho0 is None:
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
    else:
        rho = np.asarray(rho0, dtype=complex)
    v = rho.reshape(-1)
    for gate in circuit.gates:
        for P in _gate_propagators(gate, config, n):
            v = P @ v
            if check:
                check_physical(v.reshape(dim, dim), f"after {gate.kind} {gate.qubits}")
        if on_step is not None:
            on_step(gate, v.reshape(dim, dim))
    return v.reshape(dim, dim)


def _probe_p0(rho: np.ndarray, n: int, probe: int) -> float:
    t = rho.reshape([2] * (2 * n))
    t = np.moveaxis(t, [probe, n + probe], [0, n])
    t = t.reshape(2, 2 ** (n - 1), 2, 2 ** (n - 1))
    return float(np.einsum("ajbj->ab", t)[0, 0].real)


def run_noisy(
    circuit: Circuit,
    config: NoiseConfig,
    n_shots: int | None = None,
    seed: np.random.Generator | int | None = None,
    offset_y: float = 0.0,
    check: bool = True,
) -> ProbeReadout:
    """Probe X/Y expectations after noisy evolution, optionally shot-sampled."""
    body, _ = split_readout(circuit)
    n, p = circuit.n_qubits, circuit.probe
    rho_body = evolve_density(body, config, check=check)
    p0 = {}
    for basis in ("x", "y"):
        tail = Circuit(n, readout_gates(basis, p), circuit.roles)
        p0[basis] = _probe_p0(evolve_density(tail, config, rho0=rho_body, check=check), n, p)
    if n_shots is not None:
        return sample_probe(p0["x"], p0["y"], n_shots, seed, offset_y).readout
    ex, ey = 2.0 * p0["x"] - 1.0, 2.0 * p0["y"] - 1.0
    return ProbeReadout(exp_x=ex, exp_y=ey, phase=extract_phase(ex, ey, offset_y))
