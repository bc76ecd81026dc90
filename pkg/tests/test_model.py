import numpy as np
import pytest

from granular_sph.dynamics import advance
from granular_sph.errors import ParameterError, SizingError
from granular_sph.model import (Activity, BoundaryMethod, MaterialParams, ParticleKind,
                                ParticleState, SimConfig, init_block)

from conftest import small_config


def test_init_block_lattice_count(material):
    st = init_block((0.1, 0.1, 0.1), material, small_config())
    assert st.n == 1000
    p = st.particles
    assert np.all(p.kind == ParticleKind.FLUID)
    assert np.all(p.activity == Activity.ACTIVE)
    assert np.all(p.vel == 0) and np.all(p.stress == 0)
    assert np.all(p.rho == material.rho0)
    np.testing.assert_allclose(p.mass, material.rho0 * 0.01 ** 3)


def test_init_block_spacing_and_bounds(material):
    st = init_block((0.05, 0.03, 0.02), material, small_config())
    pos = st.particles.pos
    assert pos.min() > 0 and np.all(pos.max(axis=0) < [0.05, 0.03, 0.02])
    d = np.unique(np.round(np.diff(np.unique(np.round(pos[:, 0], 12))), 12))
    np.testing.assert_allclose(d, [0.01])


@pytest.mark.parametrize("extent", [(0.1, 0.1, 0.1), (0.07, 0.05, 0.033), (0.02, 0.02, 0.02)])
def test_total_mass_matches_block(material, extent):
    cfg = small_config()
    st = init_block(extent, material, cfg)
    total = st.particles.mass.sum()
    expected = material.rho0 * np.prod(extent)
    # lattice truncation loses less than one cell layer per axis
    layers = sum(np.prod(extent) / e * cfg.d0 for e in extent)
    assert abs(total - expected) <= material.rho0 * layers


def test_density_of_full_lattice_within_one_cell(material):
    cfg = small_config()
    st = init_block((0.1, 0.1, 0.1), material, cfg)
    assert st.particles.mass.sum() / 0.1 ** 3 == pytest.approx(material.rho0, rel=cfg.d0 / 0.1)


def test_degenerate_extent_rejected(material):
    with pytest.raises(SizingError):
        init_block((0.005, 0.1, 0.1), material, small_config())


def test_time_is_step_times_dt(material):
    st = init_block((0.03, 0.03, 0.03), material, small_config())
    st.step = 17
    assert st.time == pytest.approx(17 * 1e-4)


@pytest.mark.parametrize("kw", [dict(rho0=0), dict(K=-1), dict(G=0), dict(mu_s=0.5, mu_2=0.4),
                                dict(I0=0), dict(cohesion_c=-1), dict(grain_d=0)])
def test_material_invariants(kw):
    with pytest.raises(ParameterError):
        MaterialParams(**kw)


def test_material_from_elastic():
    m = MaterialParams.from_elastic(1e6, 0.3)
    assert m.K == pytest.approx(1e6 / (3 * (1 - 0.6)))
    assert m.G == pytest.approx(1e6 / (2 * 1.3))


@pytest.mark.parametrize("kw", [dict(h=0.004, d0=0.005), dict(dt=0), dict(ps_freq=0),
                                dict(gamma_a=-0.1), dict(support_factor=3.0),
                                dict(boundary_method=BoundaryMethod.HOLMES)])
def test_config_invariants(kw):
    with pytest.raises(ParameterError):
        SimConfig(**kw)


def test_config_defaults():
    c = SimConfig(d0=0.01, h=0.012)
    assert c.support_radius == pytest.approx(0.024)
    assert c.xi_sq == pytest.approx(0.01 * 0.012 ** 2)


def test_particle_state_append_assigns_fresh_ids():
    a = ParticleState.allocate(3)
    b = ParticleState.allocate(2, ParticleKind.BCE_WALL)
    c = a.append(b)
    assert c.n == 5
    assert len(set(c.pid.tolist())) == 5
    assert list(c.kind) == [0, 0, 0, 2, 2]


def test_stress_stays_symmetric_and_mass_constant(material, rng):
    cfg = small_config(gravity=(0.0, 0.0, 0.0))
    st = init_block((0.06, 0.06, 0.06), material, cfg)
    st.particles.vel[:] = rng.normal(0, 0.05, (st.n, 3))
    m0 = st.particles.mass.copy()
    for _ in range(5):
        advance(st, int(rng.integers(1, 4)))
        s = st.particles.stress
        asym = np.abs(s - np.swapaxes(s, 1, 2)).max(axis=(1, 2))
        norm = np.linalg.norm(s, axis=(1, 2))
        assert np.all(asym <= 1e-9 * np.maximum(norm, 1e-300))
        assert np.all(st.particles.rho > 0)
    assert np.array_equal(st.particles.mass, m0)
