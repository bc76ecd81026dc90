"""Active domains: body-attached boxes that limit which particles are processed.

Particles inside a box are Active, those within 2h of a box are
ExtendedActive, everything else is Inactive and keeps a frozen copy of its
state. Array capacity is tracked logically with a grow/shrink policy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit

from .errors import ParameterError
from .model import Activity, ParticleKind


@dataclass(frozen=True)
class ActiveBox:
    """Oriented box rigidly attached to a body's origin."""
    center: np.ndarray
    rotation: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.half_extents) <= 0):
            raise ParameterError("active box half extents must be positive")

    @classmethod
    def of_body(cls, body) -> "ActiveBox":
        return cls(body.position.copy(), body.rotation, np.asarray(body.active_box, dtype=np.float64))


@njit(cache=True)
def _flag(pos, centers, rots, halves, fringe, out):
    for i in range(pos.shape[0]):
        best = 2
        for b in range(centers.shape[0]):
            d2 = 0.0
            for a in range(3):
                loc = 0.0
                for k in range(3):
                    loc += rots[b, k, a] * (pos[i, k] - centers[b, k])
                excess = abs(loc) - halves[b, a]
                if excess > 0.0:
                    d2 += excess * excess
            if d2 == 0.0:
                best = 0
                break
            if d2 <= fringe * fringe:
                best = 1
        out[i] = best


def update_activity(positions: np.ndarray, boxes: list, h: float,
                    always_active: np.ndarray | None = None) -> np.ndarray:
    """Activity flag per particle; with no boxes every particle is Active."""
    pos = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
    out = np.zeros(len(pos), dtype=np.int8)
    if boxes:
        centers = np.array([b.center for b in boxes], dtype=np.float64)
        rots = np.array([b.rotation for b in boxes], dtype=np.float64)
        halves = np.array([b.half_extents for b in boxes], dtype=np.float64)
        _flag(pos, centers, rots, halves, 2.0 * h, out)
    if always_active is not None:
        out[always_active] = Activity.ACTIVE
    return out


def compact(flags: np.ndarray):
    """Processing order: Active particles, then ExtendedActive, each ascending.

    Returns ``(n_active, n_extended, index_map)``.
    """
    flags = np.asarray(flags)
    act = np.flatnonzero(flags == Activity.ACTIVE)
    ext = np.flatnonzero(flags == Activity.EXTENDED_ACTIVE)
    return len(act), len(ext), np.concatenate([act, ext]).astype(np.int64)


def freeze_inactive(particles, previous_flags: np.ndarray, flags: np.ndarray) -> np.ndarray:
    """Zero the velocity of newly deactivated particles; returns their indices."""
    newly = np.flatnonzero((flags == Activity.INACTIVE) & (previous_flags != Activity.INACTIVE))
    particles.vel[newly] = 0.0
    return newly


@dataclass(frozen=True)
class MemoryPolicy:
    growth_factor: float = 1.2
    shrink_threshold: float = 0.75
    shrink_interval: int = 50

    def __post_init__(self):
        if not (self.growth_factor > 1 and 0 < self.shrink_threshold < 1
                and self.shrink_interval >= 1):
            raise ParameterError("invalid memory policy")


GROW, KEEP, SHRINK = "Grow", "Keep", "Shrink"


def manage_capacity(capacity: int, required: int, step: int,
                    policy: MemoryPolicy = MemoryPolicy()):
    """Returns ``(new_capacity, action)``."""
    if required > capacity:
        grown = math.ceil(Fraction(required) * Fraction(str(policy.growth_factor)))
        return int(grown), GROW
    if step % policy.shrink_interval == 0 and capacity > 0 \
            and Fraction(required, capacity) < Fraction(str(policy.shrink_threshold)):
        return int(required), SHRINK
    return int(capacity), KEEP


@dataclass
class CapacityTracker:
    capacity: int
    policy: MemoryPolicy = field(default_factory=MemoryPolicy)
    log: list = field(default_factory=list)

    def request(self, required: int, step: int) -> str:
        self.capacity, action = manage_capacity(self.capacity, required, step, self.policy)
        self.log.append((step, required, action, self.capacity))
        return action


def bodies_always_active(kinds: np.ndarray) -> np.ndarray:
    return np.flatnonzero(kinds == ParticleKind.BCE_RIGID)
