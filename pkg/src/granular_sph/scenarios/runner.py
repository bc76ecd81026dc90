"""Run a scenario end to end and collect its report; benchmark matrices."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dynamics import advance, prepare_step, rk2_step
from ..errors import SimulationError
from ..model import ParticleKind
from .config import ScenarioConfig
from .io import write_snapshot
from .metrics import UndefinedMetric, compute_slip, measure_rtf, speedup
from .setups import Scenario, build

log = logging.getLogger(__name__)


@dataclass
class RunReport:
    name: str
    kind: str
    status: str = "ok"
    rtf: float = 0.0
    rtf_defined: bool = False
    wall_time: float = 0.0
    sim_time: float = 0.0
    steps: int = 0
    n_total: int = 0
    n_active_peak: int = 0
    n_extended_peak: int = 0
    processed: int = 0
    ps_freq: int = 1
    active: bool = False
    metrics: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)
    speedup: float | None = None
    state: object = field(default=None, repr=False)

    def as_row(self) -> dict:
        row = {k: getattr(self, k) for k in (
            "name", "kind", "status", "rtf", "rtf_defined", "wall_time", "sim_time", "steps",
            "n_total", "n_active_peak", "n_extended_peak", "processed", "ps_freq", "active",
            "speedup")}
        row.update(self.metrics)
        return row


def warm_up(scenario: Scenario) -> None:
    """Compile the step kernels on a throwaway copy so timing excludes JIT."""
    probe = scenario.state.copy()
    probe.counters = dict(probe.counters)
    prepare_step(probe)
    rk2_step(probe)


class _Recorder:
    """Per-step probe-body history and snapshot cadence."""

    def __init__(self, scenario: Scenario, out_dir: Path | None):
        self.scenario = scenario
        self.out_dir = out_dir
        cfg = scenario.cfg
        self.every = max(1, int(round(1.0 / (cfg.output_hz * cfg.dt)))) if cfg.output_hz > 0 else 0
        self.t, self.pos, self.vel, self.force, self.torque = [], [], [], [], []
        self.files: list = []

    def __call__(self, state):
        if self.scenario.probe is not None:
            body = next(b for b in state.bodies if b.name == self.scenario.probe.name)
            self.t.append(state.time)
            self.pos.append(body.position.copy())
            self.vel.append(body.lin_vel.copy())
            self.force.append(np.asarray(body.force, dtype=np.float64).copy())
            self.torque.append(np.asarray(body.torque, dtype=np.float64).copy())
        if self.every and self.out_dir is not None and state.step % self.every == 0:
            self.files.append(self.snapshot(state))

    def snapshot(self, state) -> Path:
        name = self.scenario.cfg.name or self.scenario.cfg.kind
        return write_snapshot(state, self.out_dir / f"{name}_{state.step:07d}.txt")

    def series(self) -> dict:
        if not self.t:
            return {}
        return {"t": np.array(self.t), "pos": np.array(self.pos), "vel": np.array(self.vel),
                "force": np.array(self.force), "torque": np.array(self.torque)}


def _probe(state, scenario: Scenario):
    if scenario.probe is None:
        return None
    return next(b for b in state.bodies if b.name == scenario.probe.name)


def _finished(state, scenario: Scenario) -> bool:
    if scenario.cfg.kind != "cratering" or state.step < 10:
        return False
    body = _probe(state, scenario)
    ke = 0.5 * body.mass * float(body.lin_vel @ body.lin_vel)
    return ke < scenario.cfg.stop_ke_ratio * scenario.meta["impact_ke"]


def _metrics(state, scenario: Scenario, series: dict) -> dict:
    cfg = scenario.cfg
    out: dict = {}
    if not series and scenario.probe is not None:
        return out
    if cfg.kind == "cratering":
        body = _probe(state, scenario)
        out["penetration_depth"] = scenario.surface - (body.position[2] - cfg.sphere_radius)
        out["empirical_depth"] = scenario.meta["empirical_depth"]
    elif cfg.kind == "cone":
        body = _probe(state, scenario)
        out["penetration_depth"] = scenario.surface - body.position[2]
    elif cfg.kind == "drum":
        f = series["force"]
        out["contact_force_rms"] = float(np.sqrt(np.mean(np.sum(f * f, axis=1))))
        out["drive_torque_rms"] = float(np.sqrt(np.mean(series["torque"][:, 1] ** 2)))
        out["slip"] = compute_slip(cfg.drum_speed, cfg.drum_omega, cfg.drum_radius)
    elif cfg.kind == "collapse":
        p = state.particles
        f = p.kind == ParticleKind.FLUID
        out["runout"] = float(p.pos[f, 0].max() + 0.5 * cfg.d0 - cfg.column_x)
        out["final_height"] = float(p.pos[f, 2].max() + 0.5 * cfg.d0)
    return out


def run_scenario(cfg: ScenarioConfig, out_dir=None, cache_dir=None, scenario: Scenario | None = None,
                 warm: bool = True) -> RunReport:
    """Settle (cached), run the main phase for ``cfg.duration`` and report.

    Cratering runs stop early once the sphere's kinetic energy falls below
    ``stop_ke_ratio`` of its impact value. A non-finite state aborts the run
    and returns a report with status ``failed``.
    """
    scenario = scenario or build(cfg, cache_dir=cache_dir)
    state = scenario.state
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    rec = _Recorder(scenario, out_dir)
    n_steps = int(round(cfg.duration / cfg.dt))
    report = RunReport(name=cfg.name or cfg.kind, kind=cfg.kind, ps_freq=cfg.ps_freq,
                       active=cfg.active, n_total=state.n)
    if warm and n_steps > 0:
        warm_up(scenario)
    start_step = state.step
    t0 = time.perf_counter()
    try:
        for _ in range(n_steps):
            advance(state, 1, rec)
            if _finished(state, scenario):
                break
    except SimulationError as exc:
        report.status = "failed"
        log.error("%s aborted: %s", report.name, exc)
    wall = time.perf_counter() - t0
    report.wall_time = wall
    report.steps = state.step - start_step
    report.sim_time = report.steps * cfg.dt
    try:
        report.rtf = measure_rtf(wall, report.sim_time)
        report.rtf_defined = True
    except UndefinedMetric:
        report.rtf, report.rtf_defined = 0.0, False
    c = state.counters
    report.processed = int(c["processed"])
    report.n_active_peak = int(c.get("n_active_peak", 0))
    report.n_extended_peak = int(c.get("n_extended_peak", 0))
    report.series = rec.series()
    if report.steps > 0:
        report.metrics = _metrics(state, scenario, report.series)
    report.snapshots = rec.files
    if out_dir is not None and report.steps > 0:
        report.snapshots.append(rec.snapshot(state))
    report.state = state
    return report


def bench_matrix(cfg: ScenarioConfig, ps_list=(1, 10), active_list=(False, True),
                 cache_dir=None) -> list:
    """One run per (ps_freq, active) cell; speedup is relative to ps_freq = ps_list[0]."""
    reports = []
    for active in active_list:
        base = None
        for ps in ps_list:
            c = cfg.with_(ps_freq=ps, active=active,
                          name=f"{cfg.name or cfg.kind}_ps{ps}_{'on' if active else 'off'}")
            r = run_scenario(c, cache_dir=cache_dir)
            if base is None:
                base = r
            if base.rtf_defined and r.rtf_defined and r.rtf > 0:
                r.speedup = speedup(base.rtf, r.rtf)
            if "penetration_depth" in base.metrics and "penetration_depth" in r.metrics:
                d0 = base.metrics["penetration_depth"]
                r.metrics["depth_rel_change"] = (r.metrics["penetration_depth"] - d0) / d0 \
                    if d0 else math.nan
            reports.append(r)
    return reports
