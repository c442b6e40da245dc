import math

import numpy as np
import pytest

from dichotomy.sde import (IntegratorConfig, NoiseDraw, NoiseSource, NumericalAbort, TangentCarrier, Trajectory,
                           coarsen, complete_frame, heun_step, simulate, write_trajectory_csv)
from dichotomy.state_space import BundleState, TorusPoint
from dichotomy.vector_fields import get_system

ED = get_system("electrodynamics")
EX1 = get_system("example1")


def test_config_validation():
    for bad in (dict(dt=0), dict(dt=-1), dict(renorm_interval=0), dict(scheme="euler"), dict(seed=-1)):
        with pytest.raises(ValueError):
            IntegratorConfig(**bad)


def test_noise_streams_are_per_channel_and_chunk_independent():
    a = NoiseSource(5, 1e-3, 7).draw(1000)
    src = NoiseSource(5, 1e-3, 7)
    b = np.vstack([src.draw(300), src.draw(700)])
    assert np.array_equal(a, b)
    assert a.shape == (1000, 5)
    assert abs(a.std() - math.sqrt(1e-3)) < 2e-3 * 3
    assert not np.array_equal(a, NoiseSource(5, 1e-3, 7, traj=1).draw(1000))


def test_coarsen_sums_groups():
    dW = np.arange(12.0).reshape(6, 2)
    assert np.array_equal(coarsen(dW, 3), [[6, 9], [24, 27]])


def test_complete_frame_orthonormal():
    v = np.array([0.6, 0.0, 0.8])
    F = complete_frame(v, 3)
    assert np.allclose(F @ F.T, np.eye(3)) and np.allclose(F[0], v)


def test_eps_zero_example1_frozen():
    w0 = BundleState.from_arrays((1.0, 2.0), (0.6, 0.8))
    res = simulate(EX1, 0.0, 5.0, IntegratorConfig(), w0=w0, stride=1000)
    assert np.allclose(res.samples[:, 1:3], [1.0, 2.0]) and np.allclose(res.final.v.array(), (0.6, 0.8))
    assert np.all(res.samples[:, -1] == 0.0)


def test_eps_zero_electrodynamics_unit_circle():
    w0 = BundleState.from_arrays((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    res = simulate(ED, 0.0, 1.0, IntegratorConfig(dt=1e-3), w0=w0, stride=100)
    t = res.samples[:, 0]
    assert np.allclose(np.unwrap(res.samples[:, 3]), t, atol=1e-12)
    assert np.allclose(res.samples[:, 1], np.sin(t), atol=1e-7)
    assert np.allclose(res.samples[:, 2], 1 - np.cos(t), atol=1e-7)


def test_eps_zero_electrodynamics_subexponential():
    tr = Trajectory(ED, 0.0, IntegratorConfig(), traj=2)
    tr.run(200_000)
    assert abs(tr.logacc[0]) / tr.t < 0.02


def test_constant_channel_is_exact():
    x = TorusPoint((0.5, 0.5, 1.0))
    c = TangentCarrier.from_vector([0.0, 0.0, 1.0])
    dw = np.array([0.3, 0, 0, 0, 0])
    # isolate X1 by freezing the drift contribution: compare two steps that differ only in dW1
    x1, _ = heun_step(ED, 4.0, (x, c), NoiseDraw(dw), 0.0)
    assert x1.coords[2] == pytest.approx(1.0 + 2.0 * 0.3, abs=1e-15)
    assert x1.coords[0] == pytest.approx(0.5) and x1.coords[1] == pytest.approx(0.5)


def test_heun_step_matches_kernel():
    cfg = IntegratorConfig(dt=1e-3, renorm_interval=10 ** 6)
    w0 = BundleState.from_arrays((0.2, 0.4, 0.6), (0.0, 0.6, 0.8))
    dW = NoiseSource(5, 1e-3, 3).draw(50)
    tr = Trajectory(ED, 1.0, cfg, w0=w0)
    state = (w0.x, TangentCarrier.from_vector(w0.v.array()))
    for dw in dW:
        state = heun_step(ED, 1.0, state, NoiseDraw(dw), 1e-3)
    tr.run(50, dW=dW)
    assert np.allclose(state[0].array(), tr.x, atol=1e-13)
    u = state[1].u[0] / np.linalg.norm(state[1].u[0])
    assert np.allclose(u, tr.state().v.array(), atol=1e-13)


def test_determinism_and_chunking():
    cfg = IntegratorConfig(dt=1e-3, seed=11)
    a = simulate(ED, 1.0, 20.0, cfg)
    b = simulate(ED, 1.0, 20.0, cfg)
    c = simulate(ED, 1.0, 20.0, IntegratorConfig(dt=1e-3, seed=11, chunk=1000))
    assert a.carrier.log_accum[0] == b.carrier.log_accum[0]
    assert np.array_equal(a.final.array(), b.final.array())
    # chunk boundaries change only the rounding of the log sum
    assert c.carrier.log_accum[0] == pytest.approx(a.carrier.log_accum[0], abs=1e-12)


def test_stride_samples_and_resume_consistency(tmp_path):
    cfg = IntegratorConfig(dt=1e-3, seed=5, chunk=64)
    tr = Trajectory(ED, 1.0, cfg)
    s1 = tr.run(250, stride=100)
    s2 = tr.run(250, stride=100)
    one = Trajectory(ED, 1.0, cfg).run(500, stride=100)
    both = np.vstack([s1, s2])
    assert np.allclose(both, one, atol=1e-12)
    assert np.allclose(both[:, 0], [0.1, 0.2, 0.3, 0.4, 0.5])
    assert np.all((both[:, 1:4] >= 0) & (both[:, 1:4] < 2 * math.pi))
    res = simulate(ED, 1.0, 1.0, cfg, stride=200)
    p = tmp_path / "t.csv"
    write_trajectory_csv(p, res, {"seed": 5})
    lines = p.read_text().splitlines()
    assert lines[0].startswith("# config:") and lines[1].startswith("t,x1") and len(lines) == 7


def test_brownian_scaling_example1():
    # zero drift: eps with dt and increments dW is the same discrete path as 4 eps with dt/4 and dW/2
    dW = NoiseSource(4, 1e-3, 9).draw(20_000)
    w0 = BundleState.from_arrays((1.0, 2.0), (0.6, 0.8))
    a = Trajectory(EX1, 1.0, IntegratorConfig(dt=1e-3), w0=w0)
    a.run(len(dW), dW=dW)
    b = Trajectory(EX1, 4.0, IntegratorConfig(dt=2.5e-4), w0=w0)
    b.run(len(dW), dW=dW / 2)
    assert b.t == pytest.approx(a.t / 4)
    assert b.logacc[0] == pytest.approx(a.logacc[0], rel=1e-12)


def test_unit_speed_of_base_velocity():
    res = simulate(ED, 1.0, 10.0, IntegratorConfig(seed=1), stride=1000)
    th = res.samples[:, 3]
    assert np.allclose(np.hypot(np.cos(th), np.sin(th)), 1.0)


def test_numerical_abort_on_non_finite():
    tr = Trajectory(ED, 1.0, IntegratorConfig())
    dW = np.zeros((16, 5))
    dW[3, 1] = np.inf
    with pytest.raises(NumericalAbort):
        tr.run(16, dW=dW)
    with pytest.raises(ValueError):
        Trajectory(ED, -1.0, IntegratorConfig())


# -- projective consistency -------------------------------------------------

def _bundle_heun(system, eps, w0, dW, dt):
    """Heun on the lifted fields in ambient (x, v) coordinates, v renormalized each step."""
    n = system.dim
    x, v = w0.x.array().copy(), w0.v.array().copy()
    s = math.sqrt(eps)

    def F(x, v, dw):
        b, sp = np.zeros(n), np.zeros(n)
        for k, fd in enumerate(system.fields):
            c = dt if k == 0 else s * dw[k - 1]
            Jv = fd.jacobian(x) @ v
            b += c * fd.value(x)
            sp += c * (Jv - np.dot(v, Jv) * v)
        return b, sp

    for dw in dW:
        b0, s0 = F(x, v, dw)
        b1, s1 = F(x + b0, v + s0, dw)
        x = x + 0.5 * (b0 + b1)
        v = v + 0.5 * (s0 + s1)
        v /= np.linalg.norm(v)
    return x, v


def _projective_angle(seed, dt, T=10.0, fine=None):
    if fine is None:
        dW = NoiseSource(ED.r, dt, seed).draw(int(round(T / dt)))
    else:
        dW = fine
    tr = Trajectory(ED, 1.0, IntegratorConfig(dt=dt, seed=seed))
    w0 = tr.w0
    tr.run(len(dW), dW=dW)
    _, v = _bundle_heun(ED, 1.0, w0, dW, dt)
    return math.acos(min(1.0, abs(float(np.dot(tr.state().v.array(), v)))))


@pytest.mark.xfail(strict=True, reason="the two first-order schemes differ by about 2-3e-4 at dt=1e-3, T=10; "
                                       "the gap is O(dt) and falls below 1e-4 near dt=2.5e-4 (see ledger)")
def test_projective_consistency_literal():
    assert all(_projective_angle(seed, 1e-3) < 1e-4 for seed in range(3))


def test_projective_consistency_is_first_order():
    fine = NoiseSource(ED.r, 2.5e-4, 0).draw(40_000)
    coarse = _projective_angle(0, 1e-3, fine=coarsen(fine, 4))
    finest = _projective_angle(0, 2.5e-4, fine=fine)
    assert coarse < 1e-3
    assert finest < 1e-4
    assert finest < coarse / 2


def test_dt_halving_slope():
    # electrodynamics noise fields commute (all are B_k(x1, x2) d_theta), so Heun is strong order 1
    d1, d2 = [], []
    for seed in range(24):
        fine = NoiseSource(ED.r, 2.5e-3, seed).draw(400)
        L = []
        for f in (4, 2, 1):
            tr = Trajectory(ED, 1.0, IntegratorConfig(dt=2.5e-3 * f, seed=seed))
            tr.run(400 // f, dW=coarsen(fine, f))
            L.append(tr.logacc[0])
        d1.append(abs(L[0] - L[1]))
        d2.append(abs(L[1] - L[2]))
    slope = math.log2(np.mean(d1) / np.mean(d2))
    assert 1 / 3 < slope < 3
