"""Two-qubit purifications of the mixed qubit family and their transport.

Amplitudes are ordered ``|00>, |01>, |10>, |11>`` with the system qubit first
and the ancilla second.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .analytics import phase_of, purity_weight, ARG_EPS
from .band import ModelParams, transport_integral

RESIDUAL_COLUMNS = ("step", "t", "phase_rad", "overlap_magnitude")


def rotation_y(angle: float) -> np.ndarray:
    """``exp(-i angle sigma_y)``; real orthogonal."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass(frozen=True)
class PurificationVector:
    amps: np.ndarray
    r: float

    def reduced_system(self) -> np.ndarray:
        """Partial trace over the ancilla."""
        a = self.amps.reshape(2, 2)
        return a @ a.conj().T

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))


@dataclass(frozen=True)
class TransportPair:
    U_S: np.ndarray
    U_A: np.ndarray
    p_a: float

    @property
    def bilocal(self) -> np.ndarray:
        return np.kron(self.U_S, self.U_A)


@dataclass(frozen=True)
class Residual:
    step: int
    t: float
    phase: float
    magnitude: float


def initial_purification(r: float) -> PurificationVector:
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"mixedness must lie in [0, 1], got {r}")
    amps = np.array([math.sqrt(1.0 - r), 0.0, 0.0, math.sqrt(r)], dtype=complex)
    return PurificationVector(amps=amps, r=r)


def transport_pair(t: float, params: ModelParams, p_a: float, t0: float = 0.0) -> TransportPair:
    I = transport_integral(t0, t, params)
    return TransportPair(U_S=rotation_y(I), U_A=rotation_y(p_a * I), p_a=p_a)


def transport(
    psi: PurificationVector, t: float, params: ModelParams, p_a: float, t0: float = 0.0
) -> PurificationVector:
    """Apply ``U_S(t) (x) U_A(t)`` accumulated from ``t0`` to ``t``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    pair = transport_pair(t, params, p_a, t0=t0)
    return PurificationVector(amps=pair.bilocal @ psi.amps, r=psi.r)


def overlap_phase(psi_a: PurificationVector, psi_b: PurificationVector) -> tuple[float, float]:
    """``(|<a|b>|, arg <a|b>)``; the phase is nan for near-orthogonal pairs."""
    z = complex(np.vdot(psi_a.amps, psi_b.amps))
    return abs(z), phase_of(z, ARG_EPS)


def purification_distance(psi_a: PurificationVector, psi_b: PurificationVector) -> float:
    """Squared Hilbert-space distance ``|| b - a ||^2``."""
    return float(np.linalg.norm(psi_b.amps - psi_a.amps) ** 2)


def steps_for(dt: float) -> int:
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    n = round(1.0 / dt)
    if n < 1 or abs(n * dt - 1.0) > 1e-9:
        raise ValueError(f"time step {dt} does not divide the unit interval")
    return n


def parallel_transport_residuals(
    params: ModelParams, r: float, dt: float = 0.1, p_a: float | None = None
) -> list[Residual]:
    """Phase between purifications at adjacent steps ``n dt`` and ``(n+1) dt``."""
    n_steps = steps_for(dt)
    weight = purity_weight(r) if p_a is None else p_a
    psi0 = initial_purification(r)
    states = [
        transport(psi0, min(n * dt, 1.0), params, weight) for n in range(n_steps + 1)
    ]
    out = []
    for n in range(n_steps):
        mag, phase = overlap_phase(states[n], states[n + 1])
        out.append(Residual(step=n, t=n * dt, phase=phase, magnitude=mag))
    return out


def write_residuals_csv(rows: Iterable[Residual], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(RESIDUAL_COLUMNS)
    for row in rows:
        writer.writerow([row.step, repr(row.t), repr(row.phase), repr(row.magnitude)])
