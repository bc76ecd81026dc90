"""Particle storage, material and solver parameters, and the global state."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import ParameterError, SizingError
from .kernels import SUPPORT_FACTOR, KernelKind

if TYPE_CHECKING:
    from .active import CapacityTracker
    from .boundary import RigidBody
    from .neighbor import NeighborTable


class ParticleKind(enum.IntEnum):
    FLUID = 0
    BCE_RIGID = 1
    BCE_WALL = 2


class Activity(enum.IntEnum):
    ACTIVE = 0
    EXTENDED_ACTIVE = 1
    INACTIVE = 2


class ViscosityMode(enum.Enum):
    BILATERAL = "bilateral"
    UNILATERAL = "unilateral"


class BoundaryMethod(enum.Enum):
    ADAMI = "adami"
    HOLMES = "holmes"


@dataclass
class ParticleState:
    """Structure-of-arrays particle storage.

    ``pid`` is a stable identifier; array order may change (e.g. when
    particles are removed or appended) but ``pid`` follows the particle.
    """

    pid: np.ndarray          # (N,) int64
    kind: np.ndarray         # (N,) int8, ParticleKind
    activity: np.ndarray     # (N,) int8, Activity
    body_id: np.ndarray      # (N,) int32, -1 for fluid
    pos: np.ndarray          # (N, 3) m
    vel: np.ndarray          # (N, 3) m/s
    rho: np.ndarray          # (N,) kg/m^3
    stress: np.ndarray       # (N, 3, 3) Pa
    mass: np.ndarray         # (N,) kg
    tau_bar: np.ndarray      # (N,) Pa, last accepted equivalent shear stress

    @property
    def n(self) -> int:
        return self.pos.shape[0]

    @property
    def volume(self) -> np.ndarray:
        return self.mass / self.rho

    @classmethod
    def empty(cls) -> "ParticleState":
        return cls.allocate(0)

    @classmethod
    def allocate(cls, n: int, kind: ParticleKind = ParticleKind.FLUID) -> "ParticleState":
        return cls(
            pid=np.arange(n, dtype=np.int64),
            kind=np.full(n, int(kind), dtype=np.int8),
            activity=np.full(n, int(Activity.ACTIVE), dtype=np.int8),
            body_id=np.full(n, -1, dtype=np.int32),
            pos=np.zeros((n, 3)),
            vel=np.zeros((n, 3)),
            rho=np.zeros(n),
            stress=np.zeros((n, 3, 3)),
            mass=np.zeros(n),
            tau_bar=np.zeros(n),
        )

    def _fields(self):
        return ("pid", "kind", "activity", "body_id", "pos", "vel", "rho", "stress",
                "mass", "tau_bar")

    def copy(self) -> "ParticleState":
        return ParticleState(**{f: getattr(self, f).copy() for f in self._fields()})

    def select(self, mask_or_index) -> "ParticleState":
        return ParticleState(**{f: getattr(self, f)[mask_or_index].copy() for f in self._fields()})

    def append(self, other: "ParticleState") -> "ParticleState":
        """Concatenate; ``other`` receives fresh pids after the current maximum."""
        other = other.copy()
        start = int(self.pid.max()) + 1 if self.n else 0
        other.pid = np.arange(start, start + other.n, dtype=np.int64)
        return ParticleState(**{f: np.concatenate([getattr(self, f), getattr(other, f)])
                                for f in self._fields()})


@dataclass(frozen=True)
class MaterialParams:
    rho0: float = 1510.0        # kg/m^3
    K: float = 8.333e5          # Pa
    G: float = 3.846e5          # Pa
    mu_s: float = 0.3
    mu_2: float = 0.3
    I0: float = 0.03
    cohesion_c: float = 0.0     # Pa
    grain_d: float = 1e-3       # m

    def __post_init__(self):
        checks = [
            (self.rho0 > 0, "rho0 > 0"),
            (self.K > 0, "K > 0"),
            (self.G > 0, "G > 0"),
            (0 < self.mu_s <= self.mu_2, "0 < mu_s <= mu_2"),
            (self.I0 > 0, "I0 > 0"),
            (self.cohesion_c >= 0, "cohesion_c >= 0"),
            (self.grain_d > 0, "grain_d > 0"),
        ]
        for ok, what in checks:
            if not ok:
                raise ParameterError(f"material parameters violate {what}")

    @classmethod
    def from_elastic(cls, youngs: float, poisson: float, **kw) -> "MaterialParams":
        K = youngs / (3.0 * (1.0 - 2.0 * poisson))
        G = youngs / (2.0 * (1.0 + poisson))
        return cls(K=K, G=G, **kw)

    def sound_speed(self, rho: float | None = None) -> float:
        return float(np.sqrt(self.K / (self.rho0 if rho is None else rho)))


@dataclass(frozen=True)
class SimConfig:
    d0: float = 0.005
    h: float = 0.0065
    dt: float = 1e-4
    kernel: KernelKind = KernelKind.CUBIC
    support_factor: float = SUPPORT_FACTOR
    viscosity_mode: ViscosityMode = ViscosityMode.BILATERAL
    gamma_a: float = 0.01
    boundary_method: BoundaryMethod = BoundaryMethod.ADAMI
    ps_freq: int = 1
    t_delay: float = 0.0
    gravity: tuple = (0.0, 0.0, -9.81)
    xi_sq: float | None = None

    def __post_init__(self):
        if not (self.d0 > 0 and self.h >= self.d0):
            raise ParameterError("need d0 > 0 and h >= d0")
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        if int(self.ps_freq) != self.ps_freq or self.ps_freq < 1:
            raise ParameterError("ps_freq must be an integer >= 1")
        if self.gamma_a < 0:
            raise ParameterError("gamma_a must be non-negative")
        if self.support_factor != SUPPORT_FACTOR:
            raise ParameterError("support factor is fixed at 2.0 for both kernels")
        if self.boundary_method is not BoundaryMethod.ADAMI:
            raise ParameterError(f"boundary method {self.boundary_method.value!r} is not implemented")
        if self.xi_sq is None:
            object.__setattr__(self, "xi_sq", 0.01 * self.h * self.h)
        object.__setattr__(self, "gravity", tuple(float(g) for g in self.gravity))

    @property
    def support_radius(self) -> float:
        return self.support_factor * self.h


@dataclass
class SimState:
    particles: ParticleState
    material: MaterialParams
    config: SimConfig
    bodies: list["RigidBody"] = field(default_factory=list)
    step: int = 0
    neighbor_table: "NeighborTable | None" = None
    process_index: np.ndarray | None = None
    capacity: "CapacityTracker | None" = None
    counters: dict = field(default_factory=lambda: {
        "rhs_evals": 0, "processed": 0, "rebuilds": 0, "steps": 0,
    })

    @property
    def time(self) -> float:
        return self.step * self.config.dt

    @property
    def n(self) -> int:
        return self.particles.n

    def fluid_mask(self) -> np.ndarray:
        return self.particles.kind == ParticleKind.FLUID

    def copy(self) -> "SimState":
        from copy import deepcopy
        return SimState(
            particles=self.particles.copy(),
            material=self.material,
            config=self.config,
            bodies=[b.copy() for b in self.bodies],
            step=self.step,
            neighbor_table=self.neighbor_table,
            process_index=None if self.process_index is None else self.process_index.copy(),
            capacity=deepcopy(self.capacity),
            counters=dict(self.counters),
        )


def lattice_points(extent, d0: float, origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Cell-centred cubic lattice filling an axis-aligned box."""
    extent = np.asarray(extent, dtype=np.float64)
    counts = np.floor(extent / d0 + 1e-6).astype(int)
    axes = [(np.arange(c) + 0.5) * d0 + o for c, o in zip(counts, origin)]
    zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])


def fluid_particles(points: np.ndarray, material: MaterialParams, d0: float) -> ParticleState:
    ps = ParticleState.allocate(len(points), ParticleKind.FLUID)
    ps.pos[:] = points
    ps.rho[:] = material.rho0
    ps.mass[:] = material.rho0 * d0 ** 3
    return ps


def init_block(extent, material: MaterialParams, config: SimConfig,
               origin=(0.0, 0.0, 0.0)) -> SimState:
    """Seed a block of quiescent, stress-free fluid particles at spacing d0."""
    extent = np.asarray(extent, dtype=np.float64)
    if extent.shape != (3,):
        raise SizingError("extent must have three components")
    if np.any(extent < 2.0 * config.d0 * (1.0 - 1e-9)):
        raise SizingError(f"extent {tuple(extent)} is below 2*d0 = {2 * config.d0} on some axis")
    pts = lattice_points(extent, config.d0, origin)
    return SimState(particles=fluid_particles(pts, material, config.d0),
                    material=material, config=config)
