"""BCE markers, rigid bodies and fluid-solid load exchange.

Solids are represented by layers of boundary markers at spacing d0. Marker
velocity and stress are extrapolated from nearby fluid particles every RHS
evaluation (Adami extrapolation with a no-slip velocity correction and a
hydrostatic stress correction), and the pair forces between markers and
fluid particles are summed into a force and torque per body.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from .errors import SizingError
from .kernels import SUPPORT_FACTOR, w_value
from .model import MaterialParams, ParticleKind, ParticleState

# ---------------------------------------------------------------- quaternions


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_exp(rotvec) -> np.ndarray:
    """Unit quaternion for a rotation vector (axis * angle)."""
    rotvec = np.asarray(rotvec, dtype=np.float64)
    angle = float(np.linalg.norm(rotvec))
    if angle == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    axis = rotvec / angle
    return np.concatenate([[math.cos(0.5 * angle)], math.sin(0.5 * angle) * axis])


def quat_angle(q) -> float:
    """Rotation angle in [0, 2*pi) of a unit quaternion (sign of w kept)."""
    w = float(np.clip(q[0], -1.0, 1.0))
    return 2.0 * math.atan2(float(np.linalg.norm(q[1:])), w)


# --------------------------------------------------------------------- shapes


@dataclass(frozen=True)
class BoxContainer:
    """Open-top container; interior [0, Lx] x [0, Ly] x [0, Lz]."""
    size: tuple


@dataclass(frozen=True)
class Sphere:
    radius: float


@dataclass(frozen=True)
class Cylinder:
    """Solid cylinder with its axis along local y, centred at the origin."""
    radius: float
    length: float


@dataclass(frozen=True)
class Cone:
    """Solid cone, apex at the local origin, axis +z, base at z = length."""
    apex_angle_deg: float
    base_diameter: float

    @property
    def half_angle(self) -> float:
        return math.radians(self.apex_angle_deg) / 2.0

    @property
    def base_radius(self) -> float:
        return self.base_diameter / 2.0

    @property
    def length(self) -> float:
        return self.base_radius / math.tan(self.half_angle)

    @property
    def centroid(self) -> np.ndarray:
        return np.array([0.0, 0.0, 0.75 * self.length])


def bce_layer_count(h: float, d0: float, support_factor: float = SUPPORT_FACTOR) -> int:
    return int(math.ceil(support_factor * h / d0 - 1e-9))


def _fibonacci_shell(radius: float, d0: float) -> np.ndarray:
    if radius < 0.5 * d0:
        return np.zeros((1, 3))
    n = max(int(round(4.0 * math.pi * radius * radius / (d0 * d0))), 4)
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(1.0 - z * z)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    return radius * np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _ring(radius: float, d0: float, offset: float = 0.0) -> np.ndarray:
    """Points on a circle in the (x, z) plane."""
    if radius < 0.5 * d0:
        return np.zeros((1, 2))
    n = max(int(round(2.0 * math.pi * radius / d0)), 3)
    t = 2.0 * math.pi * (np.arange(n) + offset) / n
    return radius * np.column_stack([np.cos(t), np.sin(t)])


def _disk(radius: float, d0: float) -> np.ndarray:
    pts = [np.zeros((1, 2))]
    k = 1
    while k * d0 <= radius + 1e-12:
        pts.append(_ring(k * d0, d0))
        k += 1
    return np.concatenate(pts)


def _dedupe(points: np.ndarray, min_dist: float) -> np.ndarray:
    if len(points) < 2:
        return points
    tree = cKDTree(points)
    drop = np.zeros(len(points), dtype=bool)
    for i, j in sorted(tree.query_pairs(min_dist)):
        if not drop[i] and not drop[j]:
            drop[j] = True
    return points[~drop]


def _container_markers(size, d0: float, n_layers: int) -> np.ndarray:
    counts = np.floor(np.asarray(size, dtype=np.float64) / d0 + 1e-6).astype(int)
    nx, ny, nz = counts
    layer = np.arange(1, n_layers + 1)
    xi = np.arange(nx)
    yi = np.arange(ny)
    yo = np.arange(-n_layers, ny + n_layers)
    zo = np.arange(-n_layers, nz)

    def grid(a, b, c):
        A, B, C = np.meshgrid(a, b, c, indexing="ij")
        return np.column_stack([A.ravel(), B.ravel(), C.ravel()])

    floor = grid(xi, yi, -layer)
    xwalls = np.concatenate([grid(-layer, yo, zo), grid(nx - 1 + layer, yo, zo)])
    ywalls = np.concatenate([grid(xi, -layer, zo), grid(xi, ny - 1 + layer, zo)])
    idx = np.concatenate([floor, xwalls, ywalls]).astype(np.float64)
    return (idx + 0.5) * d0


def _sphere_markers(s: Sphere, d0: float, n_layers: int) -> np.ndarray:
    if (n_layers - 1) * d0 >= s.radius:
        raise SizingError(f"sphere radius {s.radius} too small for {n_layers} layers at d0={d0}")
    return np.concatenate([_fibonacci_shell(s.radius - l * d0, d0) for l in range(n_layers)])


def _cylinder_markers(c: Cylinder, d0: float, n_layers: int) -> np.ndarray:
    if (n_layers - 1) * d0 >= c.radius or 2 * (n_layers - 1) * d0 >= c.length:
        raise SizingError(f"cylinder {c} too small for {n_layers} layers at d0={d0}")
    half = 0.5 * c.length
    ny = max(int(round(c.length / d0)), 1)
    ys = np.linspace(-half, half, ny + 1)
    pts = []
    for l in range(n_layers):
        ring = _ring(c.radius - l * d0, d0, 0.5 * (l % 2))
        for y in ys:
            pts.append(np.column_stack([ring[:, 0], np.full(len(ring), y), ring[:, 1]]))
    inner = c.radius - n_layers * d0
    if inner >= 0:
        disk = _disk(inner, d0)
        for l in range(n_layers):
            for y in (half - l * d0, -half + l * d0):
                pts.append(np.column_stack([disk[:, 0], np.full(len(disk), y), disk[:, 1]]))
    return np.concatenate(pts)


def _cone_markers(c: Cone, d0: float, n_layers: int) -> np.ndarray:
    L, R, a = c.length, c.base_radius, c.half_angle
    if (n_layers - 1) * d0 / math.sin(a) >= L or (n_layers - 1) * d0 >= R:
        raise SizingError(f"cone {c} too small for {n_layers} layers at d0={d0}")
    pts = []
    for l in range(n_layers):
        apex = l * d0 / math.sin(a)
        top = L - l * d0
        k = 0
        while True:
            z = apex + k * d0 * math.cos(a)
            if z > top + 1e-12:
                break
            r = (z - apex) * math.tan(a)
            ring = _ring(r, d0, 0.5 * (k % 2)) if r >= 0.5 * d0 else np.zeros((1, 2))
            pts.append(np.column_stack([ring[:, 0], ring[:, 1], np.full(len(ring), z)]))
            k += 1
        cap_r = (top - apex) * math.tan(a) - d0
        if cap_r > 0:
            disk = _disk(cap_r, d0)
            pts.append(np.column_stack([disk[:, 0], disk[:, 1], np.full(len(disk), top)]))
    return np.concatenate(pts)


def generate_bce(shape, d0: float, n_layers: int) -> np.ndarray:
    """Marker positions in the shape's local frame.

    Solids get their first layer on the surface and further layers inward;
    containers get layers outside the fluid region. Near-duplicates closer
    than d0/2 are removed.
    """
    if n_layers < 1:
        raise SizingError("need at least one marker layer")
    if isinstance(shape, BoxContainer):
        if np.any(np.asarray(shape.size) < d0):
            raise SizingError(f"container {shape.size} smaller than d0")
        return _container_markers(shape.size, d0, n_layers)
    if isinstance(shape, Sphere):
        pts = _sphere_markers(shape, d0, n_layers)
    elif isinstance(shape, Cylinder):
        pts = _cylinder_markers(shape, d0, n_layers)
    elif isinstance(shape, Cone):
        pts = _cone_markers(shape, d0, n_layers)
    else:
        raise TypeError(f"unsupported shape {shape!r}")
    return _dedupe(pts, 0.5 * d0)


def inside_shape(shape, local_points: np.ndarray, pad: float = 0.0) -> np.ndarray:
    """Mask of points within ``pad`` of the solid (local frame)."""
    p = np.asarray(local_points)
    if isinstance(shape, Sphere):
        return np.linalg.norm(p, axis=1) < shape.radius + pad
    if isinstance(shape, Cylinder):
        r = np.hypot(p[:, 0], p[:, 2])
        return (r < shape.radius + pad) & (np.abs(p[:, 1]) < 0.5 * shape.length + pad)
    if isinstance(shape, Cone):
        a = shape.half_angle
        z = p[:, 2]
        r = np.hypot(p[:, 0], p[:, 1])
        # signed distance to the lateral surface, positive outside
        lateral = r * math.cos(a) - z * math.sin(a)
        return (lateral < pad) & (z > -pad) & (z < shape.length + pad)
    raise TypeError(f"unsupported shape {shape!r}")


# ---------------------------------------------------------------- rigid bodies


@dataclass(frozen=True)
class FreeMotion:
    """Newton-Euler motion; mask order (x, y, z, rx, ry, rz)."""
    dof_mask: tuple = (True, True, True, True, True, True)


@dataclass(frozen=True)
class PrescribedMotion:
    linear: tuple = (0.0, 0.0, 0.0)
    angular: tuple = (0.0, 0.0, 0.0)


@dataclass
class RigidBody:
    name: str
    position: np.ndarray
    orientation: np.ndarray
    lin_vel: np.ndarray
    ang_vel: np.ndarray
    mass: float
    inertia: np.ndarray
    motion: FreeMotion | PrescribedMotion
    bce_local: np.ndarray
    marker_kind: ParticleKind = ParticleKind.BCE_RIGID
    marker_index: np.ndarray | None = None
    active_box: np.ndarray | None = None       # half extents, body frame
    shape: object = None
    lin_acc: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ang_acc: np.ndarray = field(default_factory=lambda: np.zeros(3))
    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.orientation = np.asarray(self.orientation, dtype=np.float64)
        self.orientation = self.orientation / np.linalg.norm(self.orientation)
        self.lin_vel = np.asarray(self.lin_vel, dtype=np.float64)
        self.ang_vel = np.asarray(self.ang_vel, dtype=np.float64)
        self.inertia = np.asarray(self.inertia, dtype=np.float64)
        if isinstance(self.motion, PrescribedMotion):
            self.lin_vel = np.asarray(self.motion.linear, dtype=np.float64)
            self.ang_vel = np.asarray(self.motion.angular, dtype=np.float64)

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    @property
    def is_static(self) -> bool:
        return (isinstance(self.motion, PrescribedMotion)
                and not any(self.motion.linear) and not any(self.motion.angular))

    def marker_positions(self) -> np.ndarray:
        return self.position + self.bce_local @ self.rotation.T

    def velocity_at(self, points: np.ndarray) -> np.ndarray:
        return self.lin_vel + np.cross(self.ang_vel, points - self.position)

    def acceleration_at(self, points: np.ndarray) -> np.ndarray:
        r = points - self.position
        return (self.lin_acc + np.cross(self.ang_acc, r)
                + np.cross(self.ang_vel, np.cross(self.ang_vel, r)))

    def copy(self) -> "RigidBody":
        return replace(
            self,
            position=self.position.copy(), orientation=self.orientation.copy(),
            lin_vel=self.lin_vel.copy(), ang_vel=self.ang_vel.copy(),
            lin_acc=self.lin_acc.copy(), ang_acc=self.ang_acc.copy(),
            force=self.force.copy(), torque=self.torque.copy(),
        )


def static_body(name: str, markers: np.ndarray, kind: ParticleKind = ParticleKind.BCE_WALL,
                position=(0.0, 0.0, 0.0)) -> RigidBody:
    return RigidBody(name=name, position=np.asarray(position, dtype=np.float64),
                     orientation=np.array([1.0, 0, 0, 0]), lin_vel=np.zeros(3),
                     ang_vel=np.zeros(3), mass=math.inf, inertia=np.full(3, math.inf),
                     motion=PrescribedMotion(), bce_local=np.asarray(markers) - position,
                     marker_kind=kind)


def marker_particles(body: RigidBody, material: MaterialParams, d0: float) -> ParticleState:
    """Particle records for a body's markers (rest density, volume d0^3)."""
    pts = body.marker_positions()
    ps = ParticleState.allocate(len(pts), body.marker_kind)
    ps.pos[:] = pts
    ps.vel[:] = body.velocity_at(pts)
    ps.rho[:] = material.rho0
    ps.mass[:] = material.rho0 * d0 ** 3
    return ps


def attach_body(particles: ParticleState, bodies: list, body: RigidBody,
                material: MaterialParams, d0: float) -> ParticleState:
    """Append ``body``'s markers to ``particles`` and register the body."""
    markers = marker_particles(body, material, d0)
    markers.body_id[:] = len(bodies)
    start = particles.n
    out = particles.append(markers)
    body.marker_index = np.arange(start, out.n, dtype=np.int64)
    bodies.append(body)
    return out


def reindex_bodies(particles: ParticleState, bodies: list) -> None:
    """Refresh each body's ``marker_index`` after particles were removed or reordered."""
    for k, b in enumerate(bodies):
        b.marker_index = np.flatnonzero(particles.body_id == k).astype(np.int64)


# --------------------------------------------------------------- extrapolation


@njit(cache=True)
def _extrapolate(markers, rows, offsets, nbrs, pos, vel, rho, stress, kind,
                 body_vel, body_acc, gravity, h, kern, out_vel, out_stress):
    s = np.zeros((3, 3))
    for k in range(markers.size):
        a = markers[k]
        r = rows[a]
        wsum = 0.0
        u0 = 0.0
        u1 = 0.0
        u2 = 0.0
        s[:, :] = 0.0
        hyd = 0.0
        ga0 = gravity[0] - body_acc[a, 0]
        ga1 = gravity[1] - body_acc[a, 1]
        ga2 = gravity[2] - body_acc[a, 2]
        if r >= 0:
            for q in range(offsets[r], offsets[r + 1]):
                b = nbrs[q]
                if kind[b] != 0:
                    continue
                dx = pos[a, 0] - pos[b, 0]
                dy = pos[a, 1] - pos[b, 1]
                dz = pos[a, 2] - pos[b, 2]
                w = w_value(math.sqrt(dx * dx + dy * dy + dz * dz), h, kern)
                wsum += w
                u0 += vel[b, 0] * w
                u1 += vel[b, 1] * w
                u2 += vel[b, 2] * w
                for i in range(3):
                    for j in range(3):
                        s[i, j] += stress[b, i, j] * w
                hyd += rho[b] * (ga0 * dx + ga1 * dy + ga2 * dz) * w
        if wsum > 0.0:
            out_vel[a, 0] = 2.0 * body_vel[a, 0] - u0 / wsum
            out_vel[a, 1] = 2.0 * body_vel[a, 1] - u1 / wsum
            out_vel[a, 2] = 2.0 * body_vel[a, 2] - u2 / wsum
            for i in range(3):
                for j in range(3):
                    out_stress[a, i, j] = s[i, j] / wsum
                out_stress[a, i, i] -= hyd / wsum
        else:
            for i in range(3):
                out_vel[a, i] = body_vel[a, i]
                for j in range(3):
                    out_stress[a, i, j] = 0.0


def extrapolate_markers(markers: np.ndarray, particles: ParticleState, table, body_vel: np.ndarray,
                        body_acc: np.ndarray, gravity, h: float, kernel, rows=None):
    """Extrapolated (no-slip corrected) velocity and stress for ``markers``.

    Writes into ``particles.vel`` and ``particles.stress`` at the marker
    indices and returns them. ``body_vel``/``body_acc`` are (N, 3) arrays
    holding the solid's velocity/acceleration at each marker location.
    """
    if rows is None:
        rows = table.row_lookup(particles.n)
    markers = np.asarray(markers, dtype=np.int64)
    _extrapolate(markers, rows, table.offsets, table.neighbors, particles.pos, particles.vel,
                 particles.rho, particles.stress, particles.kind, body_vel, body_acc,
                 np.asarray(gravity, dtype=np.float64), float(h), int(kernel),
                 particles.vel, particles.stress)
    return particles.vel[markers], particles.stress[markers]


def _marker_fields(particles: ParticleState, markers, body_velocity, body_accel=None):
    n = particles.n
    bv = np.zeros((n, 3))
    ba = np.zeros((n, 3))
    bv[markers] = body_velocity
    if body_accel is not None:
        ba[markers] = body_accel
    return bv, ba


def extrapolate_bce_velocity(markers, particles: ParticleState, table, body_velocity,
                             h: float, kernel=0) -> np.ndarray:
    """Marker velocities u_a = 2 u_body - (Shepard average of fluid velocity)."""
    work = particles.copy()
    bv, ba = _marker_fields(work, markers, body_velocity)
    vel, _ = extrapolate_markers(markers, work, table, bv, ba, (0.0, 0.0, 0.0), h, kernel)
    return vel


def extrapolate_bce_stress(markers, particles: ParticleState, table, gravity, body_accel,
                           h: float, kernel=0) -> np.ndarray:
    """Shepard-averaged fluid stress with the hydrostatic (g - a_s) correction."""
    work = particles.copy()
    bv, ba = _marker_fields(work, markers, np.zeros(3), body_accel)
    _, stress = extrapolate_markers(markers, work, table, bv, ba, gravity, h, kernel)
    return stress


# ---------------------------------------------------------------------- loads


def aggregate_body_loads(body: RigidBody, marker_acc: np.ndarray, marker_mass: np.ndarray,
                         marker_pos: np.ndarray | None = None):
    """Resultant force and torque (about the body origin) from marker accelerations."""
    f = np.asarray(marker_mass)[:, None] * np.asarray(marker_acc)
    if marker_pos is None:
        marker_pos = body.marker_positions()
    force = f.sum(axis=0)
    torque = np.cross(np.asarray(marker_pos) - body.position, f).sum(axis=0)
    return force, torque


@dataclass
class BodyRate:
    lin_vel: np.ndarray
    lin_acc: np.ndarray
    ang_vel: np.ndarray
    ang_acc: np.ndarray


def body_rate(body: RigidBody, force, torque, gravity) -> BodyRate:
    """Time derivative of a body's state under the given loads."""
    if isinstance(body.motion, PrescribedMotion):
        return BodyRate(np.asarray(body.motion.linear, dtype=np.float64), np.zeros(3),
                        np.asarray(body.motion.angular, dtype=np.float64), np.zeros(3))
    mask = np.asarray(body.motion.dof_mask, dtype=bool)
    lin_acc = np.where(mask[:3], np.asarray(force) / body.mass + np.asarray(gravity), 0.0)
    R = body.rotation
    w_b = R.T @ body.ang_vel
    t_b = R.T @ np.asarray(torque)
    alpha_b = (t_b - np.cross(w_b, body.inertia * w_b)) / body.inertia
    ang_acc = np.where(mask[3:], R @ alpha_b, 0.0)
    return BodyRate(np.where(mask[:3], body.lin_vel, 0.0), lin_acc,
                    np.where(mask[3:], body.ang_vel, 0.0), ang_acc)


def apply_body_rate(body: RigidBody, rate: BodyRate, dt: float) -> RigidBody:
    """Explicit update of ``body`` by ``rate`` over ``dt`` (quaternion exponential for rotation)."""
    new = body.copy()
    new.position = body.position + dt * rate.lin_vel
    new.orientation = quat_mul(quat_exp(rate.ang_vel * dt), body.orientation)
    new.orientation /= np.linalg.norm(new.orientation)
    if isinstance(body.motion, FreeMotion):
        new.lin_vel = body.lin_vel + dt * rate.lin_acc
        new.ang_vel = body.ang_vel + dt * rate.ang_acc
    new.lin_acc = rate.lin_acc.copy()
    new.ang_acc = rate.ang_acc.copy()
    return new


def advance_rigid_body(body: RigidBody, loads, gravity, dt: float) -> RigidBody:
    """One explicit step; ``loads`` is a (force, torque) pair."""
    force, torque = loads
    return apply_body_rate(body, body_rate(body, force, torque, gravity), dt)
