import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from granular_sph.errors import ConfigError, ContractError, SnapshotParseError
from granular_sph.model import MaterialParams, ParticleState, SimState, init_block
from granular_sph.scenarios import presets
from granular_sph.scenarios.cli import main
from granular_sph.scenarios.config import ScenarioConfig, load_config, parse_config
from granular_sph.scenarios.io import (read_fit_points, read_snapshot, write_reports,
                                       write_snapshot)
from granular_sph.scenarios.metrics import (UndefinedMetric, compute_slip, crater_abscissa,
                                            empirical_depth, fit_cratering_slope, measure_rtf,
                                            speedup)
from granular_sph.scenarios.runner import run_scenario

from conftest import small_config


# ------------------------------------------------------------------ config


def test_parse_units_and_comments():
    cfg = parse_config("""
        # a tiny collapse
        kind = collapse
        d0 = 5 mm
        dt = 0.1 ms     # step
        rho0 = 1.5 g/cm^3
        youngs = 2 MPa
        cone_angle = 60 deg
        ps_freq = 10
        active = on
    """)
    assert cfg.kind == "collapse" and cfg.ps_freq == 10 and cfg.active
    assert cfg.d0 == pytest.approx(0.005)
    assert cfg.dt == pytest.approx(1e-4)
    assert cfg.rho0 == pytest.approx(1500.0)
    assert cfg.youngs == pytest.approx(2e6)
    assert cfg.cone_angle == pytest.approx(math.pi / 3)


@pytest.mark.parametrize("text, where", [
    ("d0 = 5", "line 1"),
    ("kind = cratering\nd0 = 5 kg", "line 2"),
    ("kind = cratering\n\nbogus = 1 m", "line 3"),
    ("ps_freq = ten", "line 1"),
    ("d0 = 5 mm\nd0 = 6 mm", "line 2"),
    ("just words", "line 1"),
])
def test_parse_errors_name_the_line(text, where):
    with pytest.raises(ConfigError, match=where):
        parse_config(text)


def test_invalid_kind():
    with pytest.raises(ConfigError):
        parse_config("kind = volcano")


def test_text_round_trip(tmp_path):
    cfg = presets.drum(seed=4, active=True, active_half_x=0.1)
    path = tmp_path / "drum.cfg"
    path.write_text(cfg.to_text())
    assert load_config(path) == cfg


# ----------------------------------------------------------------- metrics


def test_rtf_and_speedup():
    assert measure_rtf(10.0, 5.0) == 2.0
    assert measure_rtf(5.0, 10.0) == 0.5
    assert speedup(2.0, 1.5) == pytest.approx(4 / 3)
    for sim in (0.0, -1.0):
        with pytest.raises(UndefinedMetric):
            measure_rtf(1.0, sim)


def test_slip():
    assert compute_slip(0.8 * 0.25, 0.8, 0.25) == pytest.approx(0.0)
    assert compute_slip(0.0, 0.8, 0.25) == 1.0
    assert compute_slip(0.1, 0.8, 0.25) == pytest.approx(0.5)
    with pytest.raises(UndefinedMetric):
        compute_slip(0.1, 0.0, 0.25)


def test_empirical_depths():
    assert empirical_depth(2200, 1510, 0.0125, 0.2, 0.3) == pytest.approx(0.0282, abs=5e-5)
    assert empirical_depth(700, 1510, 0.0125, 0.05, 0.3) == pytest.approx(0.0100, abs=5e-5)


def test_fit_exact_law():
    xs = np.linspace(0.05, 0.25, 6)
    fit = fit_cratering_slope(zip(xs, 0.14 * xs))
    assert fit.slope == pytest.approx(0.14, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.mse < 1e-28 and fit.mse_empirical < 1e-28


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 2), st.floats(-0.1, 0.1),
       st.lists(st.floats(0.01, 1.0), min_size=3, max_size=12, unique=True))
def test_fit_recovers_generating_line(a, b, xs):
    xs = np.array(xs)
    if np.ptp(xs) < 1e-3:
        return
    fit = fit_cratering_slope(zip(xs, a * xs + b))
    assert fit.slope == pytest.approx(a, abs=1e-12)
    assert fit.intercept == pytest.approx(b, abs=1e-12)


def test_fit_refusals():
    with pytest.raises(ContractError):
        fit_cratering_slope([(0.1, 0.01), (0.2, 0.02)])
    with pytest.raises(ContractError):
        fit_cratering_slope([(0.1, 0.01), (0.1, 0.02), (0.1, 0.03)])


def test_abscissa_rejects_bad_inputs():
    with pytest.raises(ValueError):
        crater_abscissa(2200, 1510, 0.0125, 0.2, 0.0)


# -------------------------------------------------------------- snapshots


def _random_particles(n, seed):
    r = np.random.default_rng(seed)
    p = ParticleState.allocate(n)
    p.kind[:] = r.integers(0, 3, n)
    p.activity[:] = r.integers(0, 3, n)
    p.pos[:] = r.normal(size=(n, 3))
    p.vel[:] = r.normal(size=(n, 3)) * 10.0 ** r.integers(-300, 300, (n, 3))
    p.rho[:] = r.uniform(1000, 2000, n)
    t = r.normal(scale=1e4, size=(n, 3, 3))
    p.stress[:] = t + np.swapaxes(t, 1, 2)
    masses = {k: r.uniform(1e-7, 1e-3) for k in range(3)}
    p.mass[:] = [masses[k] for k in p.kind]
    dev = p.stress - (np.trace(p.stress, axis1=1, axis2=2) / 3)[:, None, None] * np.eye(3)
    p.tau_bar[:] = np.sqrt(0.5 * np.sum(dev * dev, axis=(1, 2)))
    return p


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 40), st.integers(0, 2**32 - 1))
def test_snapshot_round_trip(tmp_path_factory, n, seed):
    path = tmp_path_factory.mktemp("snap") / "s.txt"
    p = _random_particles(n, seed)
    state = SimState(particles=p, material=MaterialParams(), config=small_config(), step=17)
    write_snapshot(state, path)
    snap = read_snapshot(path)
    assert snap.step == 17 and snap.time == state.time
    for f in ("pid", "kind", "activity", "pos", "vel", "rho", "stress", "mass"):
        assert np.array_equal(getattr(snap.particles, f), getattr(p, f)), f
    np.testing.assert_allclose(snap.particles.tau_bar, p.tau_bar, rtol=1e-12)


def test_empty_snapshot_is_header_only(tmp_path):
    path = write_snapshot(ParticleState.empty(), tmp_path / "e.txt")
    lines = path.read_text().splitlines()
    assert lines and all(ln.startswith("#") for ln in lines)
    assert read_snapshot(path).particles.n == 0


def test_malformed_row_is_reported(tmp_path):
    state = init_block((0.03, 0.03, 0.03), MaterialParams(), small_config())
    path = write_snapshot(state, tmp_path / "s.txt")
    lines = path.read_text().splitlines()
    first = next(i for i, ln in enumerate(lines) if not ln.startswith("#"))
    lines[first + 2] = " ".join(lines[first + 2].split()[:-1])   # drop one stress column
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SnapshotParseError) as exc:
        read_snapshot(path)
    assert exc.value.row == first + 3
    assert f"row {first + 3}" in str(exc.value)


# ----------------------------------------------------------------- runner


def tiny_collapse(**kw):
    base = dict(d0=0.01, h_ratio=1.2, dt=2e-4, container_x=0.08, container_y=0.03,
                container_z=0.06, soil_depth=0.04, column_x=0.03, column_z=0.04,
                settle_time=0.0, duration=10 * 2e-4)
    base.update(kw)
    return presets.collapse(**base)


def test_zero_duration_run():
    r = run_scenario(tiny_collapse(duration=0.0))
    assert r.status == "ok" and r.steps == 0
    assert r.rtf == 0.0 and not r.rtf_defined
    assert r.metrics == {}


def test_short_run_report(tmp_path):
    cfg = tiny_collapse(output_hz=1000.0)
    r = run_scenario(cfg, out_dir=tmp_path)
    assert r.status == "ok" and r.steps == 10 and r.rtf_defined
    assert r.rtf == pytest.approx(r.wall_time / r.sim_time, rel=1e-12)
    assert r.metrics["runout"] > 0 and r.metrics["final_height"] > 0
    # 1000 Hz at dt = 0.2 ms is every 5 steps, plus the final state
    assert len(r.snapshots) == 3 and all(p.exists() for p in r.snapshots)
    path = write_reports([r], tmp_path / "report.csv")
    header = path.read_text().splitlines()[0]
    assert header.startswith("name,kind,status,rtf")


def test_failed_run_is_flagged():
    from granular_sph.scenarios.setups import build
    cfg = tiny_collapse()
    sc = build(cfg)
    sc.state.particles.stress[0, 0, 0] = np.nan
    r = run_scenario(cfg, scenario=sc, warm=False)
    assert r.status == "failed"


def test_report_points_round_trip(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("x,D\n0.1,0.014\n0.2,0.028\n0.3,0.042\n")
    assert read_fit_points(path) == [(0.1, 0.014), (0.2, 0.028), (0.3, 0.042)]


# -------------------------------------------------------------------- CLI


def test_cli_help(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("run", "bench", "fit", "validate"):
        assert cmd in out


def test_cli_run_and_fit(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(tiny_collapse().to_text())
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "out"), "--quiet"]) == 0
    assert (tmp_path / "out" / "report.csv").exists()
    pts = tmp_path / "pts.csv"
    pts.write_text("x,D\n0.1,0.014\n0.2,0.028\n0.3,0.042\n")
    assert main(["fit", str(pts)]) == 0
    assert "slope=0.14" in capsys.readouterr().out


def test_cli_bench(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(tiny_collapse().to_text())
    assert main(["bench", str(cfg), "--ps", "1,2", "--active", "off",
                 "--output-dir", str(tmp_path)]) == 0
    rows = (tmp_path / "bench.csv").read_text().splitlines()
    assert len(rows) == 3
