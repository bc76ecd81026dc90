"""Right-hand side of the discretized equations and the time integrator.

Per fluid particle i the pair loop accumulates

* the velocity gradient L_i = sum_j V_j (u_j - u_i) (x) grad_i W_ij,
* the density rate -rho_i sum_j V_j (u_j - u_i) . grad_i W_ij,
* the symmetric-form stress divergence sum_j V_j (sigma_i + sigma_j) grad_i W_ij / rho_i,
* artificial viscosity.

The stress rate is the Jaumann-corrected hypoelastic law evaluated from L.
All accumulation is gather-only, so results do not depend on thread order.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .active import (ActiveBox, CapacityTracker, compact, freeze_inactive, update_activity)
from .boundary import apply_body_rate, body_rate, extrapolate_markers
from .errors import SimulationError
from .kernels import grad_coeff, grad_factor_c
from .model import Activity, ParticleKind, ParticleState, SimConfig, SimState, ViscosityMode
from .neighbor import NeighborTable, neighbor_search, should_rebuild
from .rheology import return_map_many

WANT_GRADIENT = 1
WANT_STRESS_DIV = 2
WANT_VISCOSITY = 4
WANT_GRAVITY = 8
WANT_ALL = WANT_GRADIENT | WANT_STRESS_DIV | WANT_VISCOSITY | WANT_GRAVITY


@njit(cache=True)
def _fluid_loop(items, rows, offsets, nbrs, pos, vel, rho, mass, stress,
                h, kern, gravity, gamma_a, unilateral, xi2, K, G, flags,
                drho, acc, dsig, L):
    want_grad = (flags & 1) != 0
    want_div = (flags & 2) != 0
    want_visc = (flags & 4) != 0 and gamma_a > 0.0
    want_g = (flags & 8) != 0
    inv_h = 1.0 / h
    coeff = grad_coeff(h, kern)
    visc_c = gamma_a * h
    Li = np.zeros((3, 3))
    for k in range(items.size):
        i = items[k]
        r = rows[i]
        l00 = l01 = l02 = l10 = l11 = l12 = l20 = l21 = l22 = 0.0
        ax = ay = az = 0.0
        vx = vy = vz = 0.0
        xi = pos[i, 0]
        yi = pos[i, 1]
        zi = pos[i, 2]
        vxi = vel[i, 0]
        vyi = vel[i, 1]
        vzi = vel[i, 2]
        for q in range(offsets[r], offsets[r + 1]):
            j = nbrs[q]
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            dz = zi - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            f = grad_factor_c(math.sqrt(r2), inv_h, coeff, kern)
            if f == 0.0:
                continue
            gx = f * dx
            gy = f * dy
            gz = f * dz
            Vj = mass[j] / rho[j]
            ux = vel[j, 0] - vxi
            uy = vel[j, 1] - vyi
            uz = vel[j, 2] - vzi
            if want_grad:
                wx = Vj * ux
                wy = Vj * uy
                wz = Vj * uz
                l00 += wx * gx
                l01 += wx * gy
                l02 += wx * gz
                l10 += wy * gx
                l11 += wy * gy
                l12 += wy * gz
                l20 += wz * gx
                l21 += wz * gy
                l22 += wz * gz
            if want_div:
                s00 = stress[i, 0, 0] + stress[j, 0, 0]
                s01 = stress[i, 0, 1] + stress[j, 0, 1]
                s02 = stress[i, 0, 2] + stress[j, 0, 2]
                s11 = stress[i, 1, 1] + stress[j, 1, 1]
                s12 = stress[i, 1, 2] + stress[j, 1, 2]
                s22 = stress[i, 2, 2] + stress[j, 2, 2]
                ax += Vj * (s00 * gx + s01 * gy + s02 * gz)
                ay += Vj * (s01 * gx + s11 * gy + s12 * gz)
                az += Vj * (s02 * gx + s12 * gy + s22 * gz)
            if want_visc:
                # v_ij . r_ij with v_ij = v_i - v_j = -u
                vr = -(ux * dx + uy * dy + uz * dz)
                if unilateral and vr >= 0.0:
                    continue
                rbar = 0.5 * (rho[i] + rho[j])
                c = visc_c * mass[j] / rbar * math.sqrt(K / rbar) * vr / (r2 + xi2)
                vx += c * gx
                vy += c * gy
                vz += c * gz
        if want_grad:
            drho[i] = -rho[i] * (l00 + l11 + l22)
            Li[0, 0] = l00
            Li[0, 1] = l01
            Li[0, 2] = l02
            Li[1, 0] = l10
            Li[1, 1] = l11
            Li[1, 2] = l12
            Li[2, 0] = l20
            Li[2, 1] = l21
            Li[2, 2] = l22
            L[i, :, :] = Li
            _stress_rate_one(Li, stress[i], K, G, dsig[i])
        inv = 1.0 / rho[i]
        acc[i, 0] = ax * inv + vx
        acc[i, 1] = ay * inv + vy
        acc[i, 2] = az * inv + vz
        if want_g:
            acc[i, 0] += gravity[0]
            acc[i, 1] += gravity[1]
            acc[i, 2] += gravity[2]


@njit(cache=True)
def _stress_rate_one(Lm, s, K, G, out):
    tr = Lm[0, 0] + Lm[1, 1] + Lm[2, 2]
    for a in range(3):
        for b in range(a, 3):
            spin = 0.0
            for c in range(3):
                wac = 0.5 * (Lm[a, c] - Lm[c, a])
                wcb = 0.5 * (Lm[c, b] - Lm[b, c])
                spin += wac * s[c, b] - s[a, c] * wcb
            e = 0.5 * (Lm[a, b] + Lm[b, a])
            v = spin + 2.0 * G * e
            if a == b:
                v += (K - 2.0 * G / 3.0) * tr
            out[a, b] = v
            out[b, a] = v


@njit(cache=True)
def _marker_loop(items, rows, offsets, nbrs, pos, vel, rho, mass, stress, kind,
                 h, kern, gamma_a, unilateral, xi2, K, acc):
    """Acceleration of each marker from its fluid neighbors (no gravity)."""
    inv_h = 1.0 / h
    coeff = grad_coeff(h, kern)
    for k in range(items.size):
        a = items[k]
        r = rows[a]
        ax = 0.0
        ay = 0.0
        az = 0.0
        vx = 0.0
        vy = 0.0
        vz = 0.0
        for q in range(offsets[r], offsets[r + 1]):
            j = nbrs[q]
            if kind[j] != 0:
                continue
            dx = pos[a, 0] - pos[j, 0]
            dy = pos[a, 1] - pos[j, 1]
            dz = pos[a, 2] - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            f = grad_factor_c(math.sqrt(r2), inv_h, coeff, kern)
            if f == 0.0:
                continue
            gx = f * dx
            gy = f * dy
            gz = f * dz
            Vj = mass[j] / rho[j]
            s00 = stress[a, 0, 0] + stress[j, 0, 0]
            s01 = stress[a, 0, 1] + stress[j, 0, 1]
            s02 = stress[a, 0, 2] + stress[j, 0, 2]
            s11 = stress[a, 1, 1] + stress[j, 1, 1]
            s12 = stress[a, 1, 2] + stress[j, 1, 2]
            s22 = stress[a, 2, 2] + stress[j, 2, 2]
            ax += Vj * (s00 * gx + s01 * gy + s02 * gz)
            ay += Vj * (s01 * gx + s11 * gy + s12 * gz)
            az += Vj * (s02 * gx + s12 * gy + s22 * gz)
            if gamma_a > 0.0:
                vr = ((vel[a, 0] - vel[j, 0]) * dx + (vel[a, 1] - vel[j, 1]) * dy
                      + (vel[a, 2] - vel[j, 2]) * dz)
                if unilateral and vr >= 0.0:
                    continue
                rbar = 0.5 * (rho[a] + rho[j])
                c = gamma_a * h * mass[j] / rbar * math.sqrt(K / rbar) * vr / (r2 + xi2)
                vx += c * gx
                vy += c * gy
                vz += c * gz
        inv = 1.0 / rho[a]
        acc[a, 0] = ax * inv + vx
        acc[a, 1] = ay * inv + vy
        acc[a, 2] = az * inv + vz


# ------------------------------------------------------------ public RHS ops


def _rows(table: NeighborTable, n: int) -> np.ndarray:
    cached = getattr(table, "_rows", None)
    if cached is None or len(cached) != n:
        cached = table.row_lookup(n)
        table._rows = cached
    return cached


def _fluid_items(particles: ParticleState, table: NeighborTable) -> np.ndarray:
    idx = table.index
    return idx[particles.kind[idx] == ParticleKind.FLUID]


def _run_fluid_loop(particles: ParticleState, table: NeighborTable, config: SimConfig, K: float,
                    G: float, flags: int, items=None, gamma_a=None, mode=None):
    n = particles.n
    drho = np.zeros(n)
    acc = np.zeros((n, 3))
    dsig = np.zeros((n, 3, 3))
    L = np.zeros((n, 3, 3))
    if items is None:
        items = _fluid_items(particles, table)
    gamma_a = config.gamma_a if gamma_a is None else gamma_a
    mode = config.viscosity_mode if mode is None else mode
    _fluid_loop(items, _rows(table, n), table.offsets, table.neighbors, particles.pos,
                particles.vel, particles.rho, particles.mass, particles.stress,
                config.h, int(config.kernel), np.asarray(config.gravity, dtype=np.float64),
                float(gamma_a), mode is ViscosityMode.UNILATERAL, config.xi_sq, K, G, flags,
                drho, acc, dsig, L)
    return drho, acc, dsig, L


def compute_velocity_gradient(state: SimState, table: NeighborTable | None = None) -> np.ndarray:
    table = table or state.neighbor_table
    m = state.material
    return _run_fluid_loop(state.particles, table, state.config, m.K, m.G, WANT_GRADIENT)[3]


def compute_density_rate(state: SimState, table: NeighborTable | None = None) -> np.ndarray:
    table = table or state.neighbor_table
    m = state.material
    return _run_fluid_loop(state.particles, table, state.config, m.K, m.G, WANT_GRADIENT)[0]


def artificial_viscosity(state: SimState, table: NeighborTable | None, mode: ViscosityMode,
                         gamma_a: float) -> np.ndarray:
    """Viscous acceleration; pairs repel when approaching and (bilateral) damp when separating."""
    table = table or state.neighbor_table
    m = state.material
    return _run_fluid_loop(state.particles, table, state.config, m.K, m.G, WANT_VISCOSITY,
                           gamma_a=gamma_a, mode=mode)[1]


def compute_acceleration(state: SimState, table: NeighborTable | None = None,
                         config: SimConfig | None = None) -> np.ndarray:
    table = table or state.neighbor_table
    config = config or state.config
    m = state.material
    acc = _run_fluid_loop(state.particles, table, config, m.K, m.G,
                          WANT_STRESS_DIV | WANT_VISCOSITY | WANT_GRAVITY)[1]
    bad = ~np.isfinite(acc).all(axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise SimulationError(f"non-finite acceleration at particle {i}, step {state.step}",
                              step=state.step, particle=i)
    return acc


def compute_stress_rate(state: SimState, L: np.ndarray, material=None) -> np.ndarray:
    material = material or state.material
    L = np.asarray(L)
    sig = state.particles.stress
    eps = 0.5 * (L + np.swapaxes(L, 1, 2))
    spin = 0.5 * (L - np.swapaxes(L, 1, 2))
    tr = np.trace(eps, axis1=1, axis2=2)[:, None, None]
    eye = np.eye(3)
    rate = (spin @ sig - sig @ spin + 2.0 * material.G * (eps - tr / 3.0 * eye)
            + material.K * tr * eye)
    return 0.5 * (rate + np.swapaxes(rate, 1, 2))


def explicit_midpoint(f, t: float, y, dt: float):
    """y_{n+1} = y_n + dt f(t + dt/2, y_n + dt/2 f(t, y_n))."""
    k1 = f(t, y)
    return y + dt * f(t + 0.5 * dt, y + 0.5 * dt * k1)


# ------------------------------------------------------------------ stepping


def _place_markers(particles: ParticleState, bodies, body_vel, body_acc):
    for b in bodies:
        idx = b.marker_index
        if idx is None or len(idx) == 0:
            continue
        if not b.is_static:
            particles.pos[idx] = b.marker_positions()
        pts = particles.pos[idx]
        body_vel[idx] = b.velocity_at(pts)
        body_acc[idx] = b.acceleration_at(pts)


def _evaluate(state: SimState, particles: ParticleState, bodies, fluid, markers):
    """One RHS evaluation: marker extrapolation, fluid rates, body loads."""
    cfg, mat = state.config, state.material
    table = state.neighbor_table
    n = particles.n
    rows = _rows(table, n)
    body_vel = np.zeros((n, 3))
    body_acc = np.zeros((n, 3))
    _place_markers(particles, bodies, body_vel, body_acc)
    if len(markers):
        extrapolate_markers(markers, particles, table, body_vel, body_acc, cfg.gravity,
                            cfg.h, cfg.kernel, rows=rows)
    drho, acc, dsig, _ = _run_fluid_loop(particles, table, cfg, mat.K, mat.G, WANT_ALL,
                                         items=fluid)
    loads = []
    if len(markers):
        macc = np.zeros((n, 3))
        _marker_loop(markers, rows, table.offsets, table.neighbors, particles.pos, particles.vel,
                     particles.rho, particles.mass, particles.stress, particles.kind, cfg.h,
                     int(cfg.kernel), cfg.gamma_a,
                     cfg.viscosity_mode is ViscosityMode.UNILATERAL, cfg.xi_sq, mat.K, macc)
        f = particles.mass[:, None] * macc
        in_set = np.zeros(n, dtype=bool)
        in_set[markers] = True
        for b in bodies:
            idx = b.marker_index
            idx = idx[in_set[idx]]
            fb = f[idx]
            loads.append((fb.sum(axis=0),
                          np.cross(particles.pos[idx] - b.position, fb).sum(axis=0)))
    else:
        loads = [(np.zeros(3), np.zeros(3)) for _ in bodies]
    state.counters["rhs_evals"] += 1
    state.counters["processed"] += len(fluid) + len(markers)
    return drho, acc, dsig, loads


def _check_finite(state: SimState, particles: ParticleState, fluid):
    ok = (np.isfinite(particles.pos[fluid]).all(axis=1)
          & np.isfinite(particles.vel[fluid]).all(axis=1)
          & np.isfinite(particles.rho[fluid])
          & np.isfinite(particles.stress[fluid]).all(axis=(1, 2)))
    if not ok.all():
        i = int(fluid[np.flatnonzero(~ok)[0]])
        raise SimulationError(f"non-finite state at particle {i} after step {state.step}",
                              step=state.step, particle=i, snapshot=particles.copy())


def rk2_step(state: SimState) -> SimState:
    """Advance by one dt with the explicit midpoint method, then correct stresses.

    Both stages use ``state.neighbor_table`` as is. Rigid bodies are part of
    the integrated state and exchange loads with the fluid at both stages.
    """
    cfg, mat = state.config, state.material
    dt = cfg.dt
    P = state.particles
    idx = state.neighbor_table.index
    fluid = idx[P.kind[idx] == ParticleKind.FLUID]
    markers = idx[P.kind[idx] != ParticleKind.FLUID]
    g = cfg.gravity

    bodies0 = state.bodies
    drho1, acc1, dsig1, loads1 = _evaluate(state, P, bodies0, fluid, markers)
    rates1 = [body_rate(b, F, T, g) for b, (F, T) in zip(bodies0, loads1)]

    M = P.copy()
    half = 0.5 * dt
    M.pos[fluid] += half * P.vel[fluid]
    M.vel[fluid] += half * acc1[fluid]
    M.rho[fluid] += half * drho1[fluid]
    M.stress[fluid] += half * dsig1[fluid]
    bodies_mid = [apply_body_rate(b, r, half) for b, r in zip(bodies0, rates1)]

    drho2, acc2, dsig2, loads2 = _evaluate(state, M, bodies_mid, fluid, markers)
    rates2 = [body_rate(b, F, T, g) for b, (F, T) in zip(bodies_mid, loads2)]

    P.pos[fluid] += dt * M.vel[fluid]
    P.vel[fluid] += dt * acc2[fluid]
    P.rho[fluid] += dt * drho2[fluid]
    P.stress[fluid] += dt * dsig2[fluid]
    # markers keep the last extrapolated values for diagnostics
    P.vel[markers] = M.vel[markers]
    P.stress[markers] = M.stress[markers]
    new_bodies = []
    for b, r, (F, T) in zip(bodies0, rates2, loads2):
        nb = apply_body_rate(b, r, dt)
        nb.force, nb.torque = F, T
        new_bodies.append(nb)
    state.bodies = new_bodies

    return_map_many(P.stress, P.tau_bar, fluid, mat.rho0, mat.G, mat.mu_s, mat.mu_2, mat.I0,
                    mat.cohesion_c, mat.grain_d, dt)
    _check_finite(state, P, fluid)
    state.step += 1
    state.counters["steps"] += 1
    return state


def active_boxes(state: SimState) -> list:
    return [ActiveBox.of_body(b) for b in state.bodies if b.active_box is not None]


def wall_markers_in_reach(pos: np.ndarray, kind: np.ndarray, h: float) -> np.ndarray:
    """Mask keeping every particle except wall markers more than two 2h-cells from any fluid.

    Such markers have no fluid neighbor, so leaving them out of the
    processed set changes no result.
    """
    keep = kind != ParticleKind.BCE_WALL
    fluid = kind == ParticleKind.FLUID
    if not fluid.any() or keep.all():
        return keep if fluid.any() else np.ones(len(kind), dtype=bool)
    cs = 2.0 * h
    cells = np.floor((pos - pos.min(axis=0)) / cs).astype(np.int64) + 1
    dims = cells.max(axis=0) + 2
    occ = np.zeros(dims, dtype=bool)
    fc = cells[fluid]
    occ[fc[:, 0], fc[:, 1], fc[:, 2]] = True
    near = np.zeros_like(occ)
    X, Y, Z = dims - 2
    for ox in range(3):
        for oy in range(3):
            for oz in range(3):
                near[1:-1, 1:-1, 1:-1] |= occ[ox:ox + X, oy:oy + Y, oz:oz + Z]
    # a second dilation keeps markers that fluid can reach before the next rebuild
    occ, near = near, near.copy()
    for ox in range(3):
        for oy in range(3):
            for oz in range(3):
                near[1:-1, 1:-1, 1:-1] |= occ[ox:ox + X, oy:oy + Y, oz:oz + Z]
    return keep | near[cells[:, 0], cells[:, 1], cells[:, 2]]


def prepare_step(state: SimState) -> None:
    """Activity update and neighbor-list rebuild, as scheduled by ps_freq and t_delay.

    The processed set (Active first, then ExtendedActive) only changes at
    rebuild steps, so it always matches the neighbor table.
    """
    cfg = state.config
    P = state.particles
    n = P.n
    if not (should_rebuild(state.step, cfg.ps_freq) or state.neighbor_table is None):
        return
    if state.capacity is None:
        state.capacity = CapacityTracker(capacity=n)
    boxes = active_boxes(state)
    if boxes and state.time > cfg.t_delay:
        always = np.flatnonzero(P.kind == ParticleKind.BCE_RIGID)
        flags = update_activity(P.pos, boxes, cfg.h, always_active=always)
        freeze_inactive(P, P.activity, flags)
        P.activity[:] = flags
        n_a, n_e, index = compact(flags)
    else:
        P.activity[:] = Activity.ACTIVE
        n_a, n_e, index = n, 0, np.arange(n, dtype=np.int64)
    index = index[wall_markers_in_reach(P.pos, P.kind, cfg.h)[index]]
    state.capacity.request(n_a + n_e, state.step)
    c = state.counters
    c["n_active_peak"] = max(c.get("n_active_peak", 0), n_a)
    c["n_extended_peak"] = max(c.get("n_extended_peak", 0), n_e)
    state.process_index = index
    state.neighbor_table = neighbor_search(P.pos[index], cfg.h, state.step, index=index)
    c["rebuilds"] += 1


def advance(state: SimState, n_steps: int = 1, callback=None) -> SimState:
    """Run the main loop: schedule, integrate, optional per-step callback."""
    for _ in range(n_steps):
        prepare_step(state)
        rk2_step(state)
        if callback is not None:
            callback(state)
    return state
