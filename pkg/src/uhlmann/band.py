"""AIII-class two-band model driven along a closed loop in parameter space.

The qubit Hamiltonian is ``H(theta) = sin(theta) sx + (M + cos(theta)) sz``,
i.e. ``(G/2) n.sigma`` with winding vector ``n`` and gap ``G``. Everything here
is a pure function of its arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

GAP_EPS = 1e-9
GAUGE_EPS = 1e-12
QUAD_TOL = 1e-10
WINDING_TOL = 1e-3

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class GapClosedError(ValueError):
    """Raised when an evaluation lands on (or within GAP_EPS of) the gap closing."""


class GaugeSingularityError(ValueError):
    """Raised where the fixed gauge of the eigenstates is singular."""


class QuadratureError(RuntimeError):
    def __init__(self, message: str, abserr: float):
        super().__init__(f"{message} (achieved error estimate {abserr:.3e})")
        self.abserr = abserr


@dataclass(frozen=True)
class Schedule:
    """Monotone path ``t -> theta(t)`` with ``theta(0) = 0``.

    ``rate`` is ``dtheta/dt``. Linear schedules carry their total sweep so the
    transport integrals can be done directly in theta.
    """

    theta: Callable[[float], float]
    rate: Callable[[float], float]
    sweep: float | None = None

    @classmethod
    def linear(cls, sweep: float = 2 * math.pi) -> "Schedule":
        return cls(theta=lambda t: sweep * t, rate=lambda t: sweep, sweep=sweep)


DEFAULT_SCHEDULE = Schedule.linear()


@dataclass(frozen=True)
class ModelParams:
    M: float
    schedule: Schedule = field(default=DEFAULT_SCHEDULE)
    t_f: float = 1.0

    def __post_init__(self):
        if not (self.M >= 0 and math.isfinite(self.M)):
            raise ValueError(f"hopping amplitude must be finite and >= 0, got {self.M}")
        if not 0.0 <= self.t_f <= 1.0:
            raise ValueError(f"t_f must lie in [0, 1], got {self.t_f}")


@dataclass(frozen=True)
class WindingVector:
    n_x: float
    n_y: float
    n_z: float
    G: float

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.n_x, self.n_y, self.n_z])


@dataclass(frozen=True)
class EigenPair:
    """Gauge-fixed eigenstates ``|0_theta>`` and ``|1_theta>``.

    With the qubit convention ``|0> <-> sz = +1``, ``ground`` is the +G/2
    eigenvector of ``H(theta)`` and ``excited`` the -G/2 one.
    """

    ground: np.ndarray
    excited: np.ndarray
    g_value: float


def gap(theta: float, M: float) -> float:
    # hypot avoids the cancellation in 1 + M^2 + 2 M cos(theta) near the closure
    return 2.0 * math.hypot(math.sin(theta), M + math.cos(theta))


def _check_gap(theta: float, M: float) -> float:
    G = gap(theta, M)
    if G < GAP_EPS:
        raise GapClosedError(f"gap closes at theta={theta:.6g}, M={M:.6g} (G={G:.3e})")
    return G


def hamiltonian(theta: float, M: float) -> np.ndarray:
    return math.sin(theta) * SIGMA_X + (M + math.cos(theta)) * SIGMA_Z


def winding_vector(theta: float, M: float) -> WindingVector:
    if M < 0:
        raise ValueError("M must be >= 0")
    G = _check_gap(theta, M)
    return WindingVector(
        n_x=2.0 * math.sin(theta) / G,
        n_y=0.0,
        n_z=2.0 * (M + math.cos(theta)) / G,
        G=G,
    )


def gauge_g(theta: float, M: float) -> float:
    s, c = math.sin(theta), math.cos(theta)
    b = M + c
    root = math.hypot(s, b)
    if b >= 0.0:
        denom = b + root
        if abs(denom) < GAUGE_EPS:
            raise GaugeSingularityError(f"gauge function singular at theta={theta:.6g}, M={M:.6g}")
        return s / denom
    # same value, rationalized: sin / (b + root) = (root - b) / sin, free of cancellation
    if abs(s) < GAUGE_EPS:
        raise GaugeSingularityError(f"gauge function singular at theta={theta:.6g}, M={M:.6g}")
    return (root - b) / s


def eigenstates(theta: float, M: float) -> EigenPair:
    _check_gap(theta, M)
    g = gauge_g(theta, M)
    norm = math.sqrt(1.0 + g * g)
    return EigenPair(
        ground=np.array([1.0, g], dtype=complex) / norm,
        excited=np.array([g, -1.0], dtype=complex) / norm,
        g_value=g,
    )


def connection_density(theta: float, M: float) -> float:
    """``<0_theta|d_theta 1_theta> = d_theta n_x / (2 n_z)`` in closed form."""
    _check_gap(theta, M)
    c = math.cos(theta)
    return (1.0 + M * c) / (2.0 + 2.0 * M * M + 4.0 * M * c)


def generator_h(t: float, params: ModelParams) -> float:
    return params.schedule.rate(t) * connection_density(params.schedule.theta(t), params.M)


def _closure_points(a: float, b: float) -> list[float]:
    # odd multiples of pi inside (a, b); that is where the integrand peaks
    lo, hi = min(a, b), max(a, b)
    k0 = math.ceil((lo / math.pi - 1.0) / 2.0)
    pts = []
    k = k0
    while (2 * k + 1) * math.pi < hi:
        p = (2 * k + 1) * math.pi
        if p > lo:
            pts.append(p)
        k += 1
    return pts


def theta_integral(theta_a: float, theta_b: float, M: float) -> float:
    """Integral of the connection density over ``[theta_a, theta_b]``."""
    if theta_a == theta_b:
        return 0.0
    pts = _closure_points(theta_a, theta_b)
    for p in pts:
        _check_gap(p, M)
    if not pts:
        # the integrand is smooth here, but the endpoints may still sit on the closure
        _check_gap(theta_a, M)
        _check_gap(theta_b, M)
    value, abserr = quad(
        lambda th: connection_density(th, M),
        theta_a,
        theta_b,
        points=pts or None,
        epsabs=QUAD_TOL,
        epsrel=0.0,
        limit=500,
    )
    if not abserr <= QUAD_TOL:
        raise QuadratureError("transport integral did not converge", abserr)
    return value


def transport_integral(t0: float, t_f: float, params: ModelParams) -> float:
    """``I_{t0}^{t_f}``, the integral of the transport generator over time."""
    if not 0.0 <= t0 <= t_f <= 1.0:
        raise ValueError(f"need 0 <= t0 <= t_f <= 1, got t0={t0}, t_f={t_f}")
    sched = params.schedule
    if sched.sweep is not None:
        return theta_integral(sched.theta(t0), sched.theta(t_f), params.M)
    value, abserr = quad(
        lambda t: generator_h(t, params), t0, t_f, epsabs=QUAD_TOL, epsrel=0.0, limit=500
    )
    if not abserr <= QUAD_TOL:
        raise QuadratureError("transport integral did not converge", abserr)
    return value


def winding_number(M: float) -> int:
    integral = theta_integral(0.0, 2.0 * math.pi, M)
    w = round(integral / math.pi)
    if abs(integral - w * math.pi) > WINDING_TOL:
        raise QuadratureError(
            f"loop integral {integral:.6g} is not a multiple of pi", abs(integral - w * math.pi)
        )
    return int(w)
