import io
import math

import numpy as np
import pytest

from uhlmann.analytics import mixed_state, overlap_analytic, purity_weight, uhlmann_phase_closed
from uhlmann.band import ModelParams, eigenstates, transport_integral
from uhlmann.purification import (
    PurificationVector,
    initial_purification,
    overlap_phase,
    parallel_transport_residuals,
    purification_distance,
    steps_for,
    transport,
    transport_pair,
    write_residuals_csv,
)

R_C1 = (2 - math.sqrt(3)) / 4


def test_initial_purification_examples():
    assert np.allclose(initial_purification(0.0).amps, [1, 0, 0, 0])
    assert np.allclose(initial_purification(0.5).amps, np.array([1, 0, 0, 1]) / math.sqrt(2))
    psi = initial_purification(0.15)
    assert np.allclose(psi.amps, [math.sqrt(0.85), 0, 0, math.sqrt(0.15)])
    assert np.allclose(psi.reduced_system(), np.diag([0.85, 0.15]))
    with pytest.raises(ValueError):
        initial_purification(-0.1)


@pytest.mark.parametrize("M", [0.2, 0.6, 1.5])
@pytest.mark.parametrize("r", [0.0, 0.02, 0.15, 0.5, 0.9])
def test_partial_trace_tracks_density_family(M, r):
    p = ModelParams(M)
    psi0 = initial_purification(r)
    for t in np.linspace(0, 1, 21):
        theta = 2 * math.pi * t
        if M < 1 and abs(theta - math.pi) < 1e-9:
            theta += 1e-7  # gauge chart singular exactly at pi; density itself is smooth
            t = theta / (2 * math.pi)
        for p_a in (purity_weight(r), 0.0, 1.0):
            psi = transport(psi0, t, p, p_a)
            assert abs(psi.norm() - 1.0) < 1e-12
            assert np.allclose(psi.reduced_system(), mixed_state(theta, r, M).rho, atol=1e-12)


def test_transport_pair_is_real_orthogonal():
    pair = transport_pair(0.37, ModelParams(0.6), 0.4)
    for U in (pair.U_S, pair.U_A):
        assert np.allclose(U.T @ U, np.eye(2), atol=1e-14)
        assert np.allclose(U.imag, 0)
    I = transport_integral(0.0, 0.37, ModelParams(0.6))
    assert np.allclose(pair.U_A, np.array([[math.cos(0.4 * I), -math.sin(0.4 * I)], [math.sin(0.4 * I), math.cos(0.4 * I)]]))


def test_transport_examples():
    p = ModelParams(0.2)
    psi0 = initial_purification(0.3)
    assert np.allclose(transport(psi0, 0.0, p, 0.7).amps, psi0.amps)
    # pure state: system factor is the transported ground state
    for t in (0.1, 0.35, 0.8):
        psi = transport(initial_purification(0.0), t, p, 0.0)
        sys_state = psi.amps.reshape(2, 2)[:, 0]
        ground = eigenstates(2 * math.pi * t, 0.2).ground
        # the fixed gauge flips sign when theta crosses pi; transport is continuous
        sign = 1.0 if t < 0.5 else -1.0
        assert np.allclose(sys_state, sign * ground, atol=1e-12)
    _, phase = overlap_phase(initial_purification(0.02), transport(initial_purification(0.02), 1.0, p, purity_weight(0.02)))
    assert phase == pytest.approx(math.pi)


def test_overlap_phase_examples():
    psi = initial_purification(0.3)
    assert overlap_phase(psi, psi) == pytest.approx((1.0, 0.0))
    neg = PurificationVector(-psi.amps, psi.r)
    mag, ph = overlap_phase(psi, neg)
    assert mag == pytest.approx(1.0) and ph == pytest.approx(math.pi)
    ortho = PurificationVector(np.array([0, 1, 0, 0], complex), 0.0)
    assert math.isnan(overlap_phase(psi, ortho)[1])


@pytest.mark.parametrize("t", [0.2, 0.55, 1.0])
@pytest.mark.parametrize("p_a", [0.0, 0.3, 1.0])
def test_overlap_matches_expansion(t, p_a):
    p = ModelParams(0.6)
    r = 0.12
    psi0 = initial_purification(r)
    z = np.vdot(psi0.amps, transport(psi0, t, p, p_a).amps)
    I = transport_integral(0.0, t, p)
    assert z == pytest.approx(overlap_analytic(I, purity_weight(r), p_a), abs=1e-13)


def test_residuals_vanish_for_uhlmann_transport():
    res = parallel_transport_residuals(ModelParams(0.2), 0.02, dt=0.1)
    assert len(res) == 10
    assert all(abs(x.phase) < 1e-8 for x in res)
    assert [x.step for x in res] == list(range(10))


def test_pure_state_berry_transport_is_parallel():
    res = parallel_transport_residuals(ModelParams(0.2), 0.0, dt=0.1, p_a=0.0)
    assert all(abs(x.phase) < 1e-12 for x in res)


@pytest.mark.parametrize("M", [0.2, 0.6, 1.5])
@pytest.mark.parametrize("r", [0.02, 0.1, 0.3, 0.45])
def test_uhlmann_weight_minimizes_step_distance(M, r):
    p = ModelParams(M)
    psi0 = initial_purification(r)
    pr = purity_weight(r)
    dt = 1e-3
    for t in (0.1, 0.3, 0.6, 0.85):
        def dist(pa):
            return purification_distance(transport(psi0, t, p, pa), transport(psi0, t + dt, p, pa))

        best = dist(pr)
        for other in (0.0, 0.5 * pr, 1.0):
            assert best <= dist(other) + 1e-15


def test_distance_minimum_is_sharp():
    # the step distance is quadratic in p_a around p_r
    p = ModelParams(0.2)
    r = 0.1
    pr = purity_weight(r)
    psi0 = initial_purification(r)
    d = [
        purification_distance(transport(psi0, 0.3, p, pa), transport(psi0, 0.301, p, pa))
        for pa in (pr - 0.05, pr, pr + 0.05)
    ]
    assert d[1] < d[0] and d[1] < d[2]
    assert d[0] == pytest.approx(d[2], rel=1e-6)


@pytest.mark.parametrize("M", [0.2, 0.6, 1.5])
def test_closed_loop_overlap_is_uhlmann_phase(M):
    for r in np.arange(0.0, 1.0001, 0.02):
        r = float(min(r, 1.0))
        if abs(r - R_C1) < 0.005 or abs(r - 1 + R_C1) < 0.005:
            continue
        psi0 = initial_purification(r)
        _, ph = overlap_phase(psi0, transport(psi0, 1.0, ModelParams(M), purity_weight(r)))
        assert ph == pytest.approx(uhlmann_phase_closed(M, r), abs=1e-9)


def test_steps_for():
    assert steps_for(0.1) == 10
    assert steps_for(0.25) == 4
    with pytest.raises(ValueError):
        steps_for(0.3)
    with pytest.raises(ValueError):
        steps_for(0.0)


def test_residual_csv():
    buf = io.StringIO()
    write_residuals_csv(parallel_transport_residuals(ModelParams(0.2), 0.02, dt=0.5), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "step,t,phase_rad,overlap_magnitude"
    assert len(lines) == 3 and lines[1].startswith("0,0.0,")
