"""Closed-form mixed-state geometry for the two-band qubit family.

Phases are reported in radians as principal values in (-pi, pi]; an undefined
phase (overlap magnitude below ``ARG_EPS``) is ``nan``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np
from scipy.linalg import expm

from .band import (
    SIGMA_Y,
    GapClosedError,
    ModelParams,
    connection_density,
    eigenstates,
    theta_integral,
    transport_integral,
)

ARG_EPS = 1e-9
PHASE_DIAGRAM_COLUMNS = ("M", "r", "R", "phase_rad", "defined")


def purity_weight(r: float) -> float:
    """``p_r = 2 sqrt(r (1 - r))``."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"mixedness must lie in [0, 1], got {r}")
    return 2.0 * math.sqrt(r * (1.0 - r))


def phase_of(z: complex, eps: float = ARG_EPS) -> float:
    """Principal argument in (-pi, pi], or nan when ``|z| < eps``."""
    z = complex(z)
    if abs(z) < eps:
        return math.nan
    phi = math.atan2(z.imag, z.real) + 0.0  # no negative zero
    if phi <= -math.pi + 1e-12:
        phi += 2.0 * math.pi
    return phi


@dataclass(frozen=True)
class MixedQubitState:
    rho: np.ndarray
    r: float
    theta: float
    M: float

    @property
    def purity_weight(self) -> float:
        return purity_weight(self.r)


@dataclass(frozen=True)
class UhlmannHolonomy:
    V_A: np.ndarray
    accumulated_angle: float


@dataclass(frozen=True)
class PhaseDiagramGrid:
    M_values: np.ndarray
    r_values: np.ndarray
    phase: np.ndarray  # shape (len(M_values), len(r_values)); nan marks undefined

    @property
    def bloch_radius(self) -> np.ndarray:
        return np.abs(2.0 * self.r_values - 1.0)

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.phase)

    def rows(self) -> Iterable[tuple[float, float, float, float, bool]]:
        R = self.bloch_radius
        for i, M in enumerate(self.M_values):
            for j, r in enumerate(self.r_values):
                yield float(M), float(r), float(R[j]), float(self.phase[i, j]), bool(
                    self.defined[i, j]
                )

    def write_csv(self, fh: IO[str], header_lines: Iterable[str] = ()) -> None:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PHASE_DIAGRAM_COLUMNS)
        for M, r, R, phase, ok in self.rows():
            writer.writerow(
                [repr(M), repr(r), repr(R), repr(phase) if ok else "", "true" if ok else "false"]
            )


def mixed_state(theta: float, r: float, M: float) -> MixedQubitState:
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"mixedness must lie in [0, 1], got {r}")
    pair = eigenstates(theta, M)
    g, e = pair.ground, pair.excited
    rho = (1.0 - r) * np.outer(g, g.conj()) + r * np.outer(e, e.conj())
    return MixedQubitState(rho=rho, r=r, theta=theta, M=M)


def uhlmann_connection(theta: float, r: float, M: float) -> np.ndarray:
    """Uhlmann connection per unit theta, ``-i (1 - p_r) k(theta) sigma_y``."""
    return -1j * (1.0 - purity_weight(r)) * connection_density(theta, M) * SIGMA_Y


def uhlmann_holonomy(
    theta_end: float, r: float, M: float, theta_start: float = 0.0
) -> UhlmannHolonomy:
    # The connection is proportional to sigma_y everywhere, so the path-ordered
    # exponential is an ordinary one.
    angle = (1.0 - purity_weight(r)) * theta_integral(theta_start, theta_end, M)
    return UhlmannHolonomy(V_A=expm(-1j * angle * SIGMA_Y), accumulated_angle=angle)


def uhlmann_phase_closed(M: float, r: float, theta0: float = 0.0) -> float:
    """Closed-loop Uhlmann phase ``arg Tr[rho_theta0 V_A]``: 0, pi, or nan."""
    hol = uhlmann_holonomy(theta0 + 2.0 * math.pi, r, M, theta_start=theta0)
    rho = mixed_state(theta0, r, M).rho
    return phase_of(complex(np.trace(rho @ hol.V_A)))


def critical_mixedness() -> tuple[float, float]:
    # p_r = 1/2  <=>  r^2 - r + 1/16 = 0
    disc = math.sqrt(1.0 - 4.0 / 16.0)
    return (1.0 - disc) / 2.0, (1.0 + disc) / 2.0


def overlap_analytic(I: float, p_r: float, p_a: float) -> float:
    """``<Psi(0)|Psi(t_f)>`` for transport angle ``I`` and ancilla weight ``p_a``."""
    return math.cos(I) * math.cos(p_a * I) + p_r * math.sin(I) * math.sin(p_a * I)


def relative_phase_analytic(
    M: float, r: float, p_a: float, t_f: float, params: ModelParams | None = None
) -> float:
    if not 0.0 <= p_a <= 1.0:
        raise ValueError(f"ancillary weight must lie in [0, 1], got {p_a}")
    if not 0.0 < t_f <= 1.0:
        raise ValueError(f"t_f must lie in (0, 1], got {t_f}")
    params = params or ModelParams(M)
    I = transport_integral(0.0, t_f, params)
    return phase_of(overlap_analytic(I, purity_weight(r), p_a))


def p_critical(p_r: float, I: float) -> float:
    """Ancillary weight at which the open-path phase jumps between pi and 0."""
    t = math.tan(I)
    if abs(t) < 1e-15:
        raise ValueError("tan(I) vanishes; no critical ancillary weight")
    if p_r == 0.0:
        return -math.copysign(math.pi / 2.0, t) / I
    return -math.atan(1.0 / (p_r * t)) / I


def p_T(I: float) -> float:
    return p_critical(0.5, I)


def state_independent_weight(I: float) -> float:
    """``p_T`` restricted to the admissible range [0, 1] of ancillary weights.

    In the trivial sector (|I| < pi/2) the raw formula can fall outside [0, 1];
    any admissible weight gives the same (zero) phase there.
    """
    return min(max(p_T(I), 0.0), 1.0)


def phase_diagram(
    M_grid: Iterable[float] | None = None, r_grid: Iterable[float] | None = None
) -> PhaseDiagramGrid:
    M_values = np.linspace(0.0, 2.0, 151) if M_grid is None else np.asarray(list(M_grid), float)
    r_values = np.linspace(0.0, 1.0, 101) if r_grid is None else np.asarray(list(r_grid), float)
    phase = np.full((M_values.size, r_values.size), np.nan)
    closed = []
    for i, M in enumerate(M_values):
        try:
            for j, r in enumerate(r_values):
                phase[i, j] = uhlmann_phase_closed(float(M), float(r))
        except GapClosedError:
            phase[i, :] = np.nan
            closed.append(float(M))
    if closed:
        warnings.warn(
            f"gap closes for M in {closed}; those rows are marked undefined",
            RuntimeWarning,
            stacklevel=2,
        )
    return PhaseDiagramGrid(M_values=M_values, r_values=r_values, phase=phase)
