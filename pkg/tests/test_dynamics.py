import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from granular_sph.dynamics import (WANT_GRADIENT, _run_fluid_loop, advance, artificial_viscosity,
                                   compute_acceleration, compute_density_rate, compute_stress_rate,
                                   compute_velocity_gradient, explicit_midpoint, rk2_step)
from granular_sph.errors import SimulationError
from granular_sph.kernels import kernel_gradient
from granular_sph.model import MaterialParams, ParticleState, SimState, ViscosityMode, init_block
from granular_sph.neighbor import neighbor_search

from conftest import small_config

D0 = 0.01


def block(n=9, h_ratio=1.2, **kw):
    cfg = small_config(d0=D0, h=h_ratio * D0, **kw)
    state = init_block((n * D0,) * 3, MaterialParams(), cfg)
    state.neighbor_table = neighbor_search(state.particles.pos, cfg.h)
    return state


def centre(state):
    p = state.particles.pos
    return int(np.argmin(np.linalg.norm(p - p.mean(axis=0), axis=1)))


def pair(x_i, x_j, v_i=(0, 0, 0), v_j=(0, 0, 0), **kw):
    cfg = small_config(**kw)
    ps = ParticleState.allocate(2)
    ps.pos[:] = [x_i, x_j]
    ps.vel[:] = [v_i, v_j]
    ps.rho[:] = 1510.0
    ps.mass[:] = 1510.0 * D0 ** 3
    state = SimState(particles=ps, material=MaterialParams(), config=cfg)
    state.neighbor_table = neighbor_search(ps.pos, cfg.h)
    return state


# --------------------------------------------------------------- gradient


def test_uniform_velocity_gives_zero_gradient():
    s = block()
    s.particles.vel[:] = [0.3, -0.2, 0.1]
    assert np.all(compute_velocity_gradient(s) == 0)
    assert np.all(compute_density_rate(s) == 0)


def test_linear_field_gradient():
    s = block()
    A = np.array([[0.1, -0.3, 0.2], [0.05, 0.4, -0.1], [0.2, 0.0, -0.25]])
    s.particles.vel[:] = s.particles.pos @ A.T
    i = centre(s)
    L = compute_velocity_gradient(s)[i]
    assert np.linalg.norm(L - A) <= 0.05 * np.linalg.norm(A)


def test_expansion_density_rate():
    s = block()
    alpha = 0.7
    s.particles.vel[:] = alpha * s.particles.pos
    i = centre(s)
    expected = -3 * alpha * s.particles.rho[i]
    assert compute_density_rate(s)[i] == pytest.approx(expected, rel=0.05)


def test_isolated_particle():
    s = pair((0, 0, 0), (1.0, 0, 0), v_i=(1, 2, 3))
    assert np.all(compute_velocity_gradient(s) == 0)
    assert np.all(compute_density_rate(s) == 0)


def test_density_rate_matches_hand_sum():
    s = pair((0, 0, 0), (0.008, 0.003, -0.002), v_i=(0.1, 0, 0), v_j=(-0.2, 0.3, 0.05))
    p = s.particles
    g = kernel_gradient(p.pos[0] - p.pos[1], s.config.h)
    V = p.mass[1] / p.rho[1]
    expected = -p.rho[0] * V * np.dot(p.vel[1] - p.vel[0], g)
    assert compute_density_rate(s)[0] == pytest.approx(expected, rel=1e-12)


# -------------------------------------------------------------- viscosity


def test_zero_gamma_gives_zero_viscosity():
    s = pair((0, 0, 0), (0.01, 0, 0), v_i=(1, 0, 0), v_j=(-1, 0, 0))
    for mode in ViscosityMode:
        assert np.all(artificial_viscosity(s, None, mode, 0.0) == 0)


def test_approaching_pair_repels_antisymmetrically():
    s = pair((0, 0, 0), (0.01, 0, 0), v_i=(1, 0, 0), v_j=(-1, 0, 0))
    for mode in ViscosityMode:
        a = artificial_viscosity(s, None, mode, 0.1)
        assert a[0, 0] < 0 < a[1, 0]
        m = s.particles.mass
        np.testing.assert_allclose(m[0] * a[0] + m[1] * a[1], 0, atol=1e-15 * m[0] * abs(a[0, 0]))


def test_separating_pair_unilateral_vs_bilateral():
    s = pair((0, 0, 0), (0.01, 0, 0), v_i=(-1, 0, 0), v_j=(1, 0, 0))
    assert np.all(artificial_viscosity(s, None, ViscosityMode.UNILATERAL, 0.1) == 0)
    a = artificial_viscosity(s, None, ViscosityMode.BILATERAL, 0.1)
    # damping pulls the pair back together
    assert a[0, 0] > 0 > a[1, 0]


# ----------------------------------------------------------- acceleration


def test_stress_free_acceleration_is_gravity():
    s = block(n=5, gamma_a=0.0)
    acc = compute_acceleration(s)
    np.testing.assert_array_equal(acc, np.tile(s.config.gravity, (s.n, 1)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e4, 1e4), min_size=12, max_size=12),
       st.lists(st.floats(-0.01, 0.01), min_size=3, max_size=3))
def test_pair_momentum_balance(sig, dx):
    s = pair((0, 0, 0), np.array([0.011, 0.0, 0.0]) + dx, v_i=(0.3, -0.1, 0), v_j=(0, 0.2, 0.1),
             gravity=(0, 0, 0), gamma_a=0.05)
    p = s.particles
    for k in range(2):
        m = np.array(sig[6 * k:6 * k + 6])
        t = np.zeros((3, 3))
        t[np.triu_indices(3)] = m
        p.stress[k] = t + np.triu(t, 1).T
    acc = compute_acceleration(s)
    f = p.mass[:, None] * acc
    scale = np.abs(f).max() + 1e-300
    np.testing.assert_allclose(f.sum(axis=0), 0, atol=1e-13 * scale)


def test_hydrostatic_interior_balances_gravity():
    s = block(n=12, gamma_a=0.0)
    p = s.particles
    g = 9.81
    top = p.pos[:, 2].max() + 0.5 * D0
    p.stress[:] = (-p.rho * g * (top - p.pos[:, 2]))[:, None, None] * np.eye(3)
    acc = compute_acceleration(s)
    reach = 2 * s.config.h
    lo, hi = p.pos.min(axis=0) + reach, p.pos.max(axis=0) - reach
    interior = np.all((p.pos > lo) & (p.pos < hi), axis=1)
    assert interior.sum() > 0
    assert np.abs(acc[interior]).max() <= 0.02 * g


def test_non_finite_acceleration_raises():
    s = pair((0, 0, 0), (0.01, 0, 0))
    s.particles.stress[1, 0, 0] = np.nan
    with pytest.raises(SimulationError):
        compute_acceleration(s)


# ------------------------------------------------------------- stress rate


def _state_with_stress(sig):
    s = pair((0, 0, 0), (1, 0, 0))
    s.particles.stress[:] = sig
    return s


def test_rotation_of_hydrostatic_stress_is_stationary():
    s = _state_with_stress(-500.0 * np.eye(3))
    W = np.array([[0, 0.3, -0.1], [-0.3, 0, 0.2], [0.1, -0.2, 0]])
    d = compute_stress_rate(s, np.stack([W, W]))
    np.testing.assert_allclose(d, 0, atol=1e-12)


def test_pure_shear_rate():
    m = MaterialParams()
    s = _state_with_stress(np.zeros((3, 3)))
    gd = 0.4
    L = np.zeros((3, 3))
    L[0, 1] = gd
    L = 0.5 * (L + L.T)
    d = compute_stress_rate(s, np.stack([L, L]))[0]
    assert d[0, 1] == pytest.approx(2 * m.G * L[0, 1])
    assert d[0, 0] == 0 and d[2, 2] == 0


def test_uniform_compression_rate():
    m = MaterialParams()
    s = _state_with_stress(np.zeros((3, 3)))
    alpha = 0.2
    L = -alpha * np.eye(3)
    d = compute_stress_rate(s, np.stack([L, L]))[0]
    np.testing.assert_allclose(d, -3 * alpha * m.K * np.eye(3), rtol=1e-12)


def test_fused_stress_rate_matches_reference(rng):
    s = block(n=6)
    p = s.particles
    p.vel[:] = rng.normal(size=p.vel.shape)
    t = rng.normal(scale=1e3, size=(p.n, 3, 3))
    p.stress[:] = t + np.swapaxes(t, 1, 2)
    m = s.material
    _, _, dsig, L = _run_fluid_loop(p, s.neighbor_table, s.config, m.K, m.G, WANT_GRADIENT)
    ref = compute_stress_rate(s, L)
    np.testing.assert_allclose(dsig, ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())


# -------------------------------------------------------------- integrator


@pytest.mark.parametrize("lam, h", [(-1.0, 0.1), (2.0, 0.05), (-30.0, 0.01)])
def test_midpoint_on_linear_ode(lam, h):
    y1 = explicit_midpoint(lambda t, y: lam * y, 0.0, 1.5, h)
    assert y1 == pytest.approx(1.5 * (1 + lam * h + 0.5 * (lam * h) ** 2), rel=1e-14)


def test_midpoint_order_two():
    f = lambda t, y: np.array([y[1], -y[0]])
    errs = []
    for n in (50, 100, 200):
        y, dt = np.array([1.0, 0.0]), 1.0 / n
        for k in range(n):
            y = explicit_midpoint(f, k * dt, y, dt)
        errs.append(abs(y[0] - np.cos(1.0)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 1.9) & (orders < 2.1))


def test_quiescent_block_is_fixed_point():
    s = block(n=5, gravity=(0, 0, 0))
    before = s.particles.copy()
    advance(s, 3)
    p = s.particles
    for f in ("pos", "vel", "rho", "stress"):
        np.testing.assert_array_equal(getattr(p, f), getattr(before, f))
    assert s.step == 3


def test_free_fall_is_exact_for_constant_gravity():
    s = block(n=3, gamma_a=0.0)
    s.neighbor_table = None
    dt = s.config.dt
    x0 = s.particles.pos.copy()
    advance(s, 10)
    t = 10 * dt
    np.testing.assert_allclose(s.particles.vel[:, 2], -9.81 * t, rtol=1e-12)
    np.testing.assert_allclose(s.particles.pos[:, 2], x0[:, 2] - 0.5 * 9.81 * t * t,
                               rtol=0, atol=1e-15)


def test_two_stage_counters():
    s = block(n=4)
    s.neighbor_table = None
    advance(s, 2)
    assert s.counters["rhs_evals"] == 4
    assert s.counters["rebuilds"] == 2


def _run_random(seed):
    s = block(n=6, ps_freq=3)
    s.neighbor_table = None
    r = np.random.default_rng(seed)
    s.particles.vel[:] = r.normal(scale=0.01, size=s.particles.vel.shape)
    advance(s, 6)
    return s.particles


def test_deterministic_trajectories():
    a, b = _run_random(7), _run_random(7)
    for f in ("pos", "vel", "rho", "stress", "tau_bar"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_non_finite_state_aborts():
    s = block(n=4)
    s.neighbor_table = None
    s.particles.vel[5, 0] = np.inf
    with pytest.raises(SimulationError) as exc:
        advance(s, 1)
    assert exc.value.step == 0
