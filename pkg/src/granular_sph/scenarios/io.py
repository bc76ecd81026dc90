"""Columnar text snapshots and CSV run reports."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ContractError, SnapshotParseError
from ..model import ParticleState

COLUMNS = ("id", "kind", "activity", "x", "y", "z", "vx", "vy", "vz", "rho",
           "s_xx", "s_xy", "s_xz", "s_yy", "s_yz", "s_zz")
UNITS = ("-", "-", "-", "m", "m", "m", "m/s", "m/s", "m/s", "kg/m^3",
         "Pa", "Pa", "Pa", "Pa", "Pa", "Pa")
_UPPER = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


@dataclass
class Snapshot:
    particles: ParticleState
    time: float = 0.0
    step: int = 0


def write_snapshot(state, path) -> Path:
    """Write particles (a ``SimState`` or ``ParticleState``) as one row per particle.

    Floats use 17 significant digits, so reading back is exact.
    """
    p = getattr(state, "particles", state)
    time = getattr(state, "time", 0.0)
    step = getattr(state, "step", 0)
    path = Path(path)
    masses = {}
    for k in np.unique(p.kind):
        m = p.mass[p.kind == k]
        if np.any(m != m[0]):
            raise ContractError(f"particles of kind {int(k)} do not share one mass")
        masses[int(k)] = float(m[0])
    with path.open("w") as fh:
        fh.write(f"# time {time!r} s\n# step {step}\n")
        for k, m in masses.items():
            fh.write(f"# particle_mass kind={k} {m!r} kg\n")
        fh.write("# units " + " ".join(UNITS) + "\n")
        fh.write("# " + " ".join(COLUMNS) + "\n")
        if p.n:
            cols = [p.pid, p.kind, p.activity, *p.pos.T, *p.vel.T, p.rho,
                    *(p.stress[:, a, b] for a, b in _UPPER)]
            fmt = ["%d"] * 3 + ["%.17g"] * 13
            np.savetxt(fh, np.column_stack(cols), fmt=fmt)
    return path


def _header(lines):
    time, step, masses = 0.0, 0, {}
    for raw in lines:
        parts = raw[1:].split()
        if not parts:
            continue
        if parts[0] == "time":
            time = float(parts[1])
        elif parts[0] == "step":
            step = int(parts[1])
        elif parts[0] == "particle_mass":
            masses[int(parts[1].split("=")[1])] = float(parts[2])
    return time, step, masses


def read_snapshot(path) -> Snapshot:
    text = Path(path).read_text().splitlines()
    header = [ln for ln in text if ln.startswith("#")]
    time, step, masses = _header(header)
    rows = []
    for lineno, line in enumerate(text, start=1):
        if line.startswith("#") or not line.strip():
            continue
        fields = line.split()
        if len(fields) != len(COLUMNS):
            raise SnapshotParseError(
                f"expected {len(COLUMNS)} columns, found {len(fields)}", row=lineno)
        try:
            rows.append((int(fields[0]), int(fields[1]), int(fields[2]),
                         *(float(v) for v in fields[3:])))
        except ValueError as exc:
            raise SnapshotParseError(str(exc), row=lineno) from None
    p = ParticleState.allocate(len(rows))
    if rows:
        ints = np.array([r[:3] for r in rows], dtype=np.int64)
        vals = np.array([r[3:] for r in rows], dtype=np.float64)
        p.pid[:] = ints[:, 0]
        p.kind[:] = ints[:, 1]
        p.activity[:] = ints[:, 2]
        p.pos[:] = vals[:, 0:3]
        p.vel[:] = vals[:, 3:6]
        p.rho[:] = vals[:, 6]
        for c, (a, b) in enumerate(_UPPER):
            p.stress[:, a, b] = vals[:, 7 + c]
            p.stress[:, b, a] = vals[:, 7 + c]
        for k in np.unique(p.kind):
            if int(k) not in masses:
                raise SnapshotParseError(f"no particle_mass header for kind {int(k)}")
            p.mass[p.kind == k] = masses[int(k)]
        dev = p.stress - (np.trace(p.stress, axis1=1, axis2=2) / 3.0)[:, None, None] * np.eye(3)
        p.tau_bar[:] = np.sqrt(0.5 * np.sum(dev * dev, axis=(1, 2)))
    return Snapshot(p, time, step)


REPORT_FIELDS = ("name", "kind", "status", "rtf", "rtf_defined", "wall_time", "sim_time", "steps",
                 "n_total", "n_active_peak", "n_extended_peak", "processed", "ps_freq", "active",
                 "penetration_depth", "empirical_depth", "slip", "drive_torque_rms",
                 "contact_force_rms", "speedup")


def write_reports(reports, path) -> Path:
    """One CSV row per run with a fixed header."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, extrasaction="ignore")
        w.writeheader()
        for r in reports:
            row = r.as_row() if hasattr(r, "as_row") else dict(r)
            w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in REPORT_FIELDS})
    return path


def read_fit_points(path):
    """``(abscissa, depth)`` pairs from a CSV with columns ``x`` and ``D`` (or a report CSV)."""
    pts = []
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            if "x" in row and "D" in row:
                pts.append((float(row["x"]), float(row["D"])))
            elif row.get("empirical_depth") and row.get("penetration_depth"):
                pts.append((float(row["empirical_depth"]) / 0.14, float(row["penetration_depth"])))
    return pts
