"""Cell-linked-list neighbor search and the persistent-list rebuild policy.

The grid uses cubic cells of edge 2h, so every neighbor of a particle lies
in its own cell or one of the 26 surrounding cells. Particles are hashed to
a linear cell index, stably sorted by it, and ``cell_start``/``cell_end``
delimit each cell's run in the sorted order. Lists are built with a
counting pass, a prefix sum into ``offsets`` and a filling pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import GuardError, OutOfBoundsError

EMPTY = -1
BRUTE_FORCE_GUARD = 10_000


@dataclass(frozen=True)
class Grid:
    origin: np.ndarray
    cell_size: float
    dims: tuple

    @classmethod
    def covering(cls, positions: np.ndarray, h: float) -> "Grid":
        """Smallest grid of 2h cells anchored at the minimum corner of ``positions``."""
        cs = 2.0 * h
        if len(positions) == 0:
            return cls(np.zeros(3), cs, (1, 1, 1))
        lo = positions.min(axis=0)
        hi = positions.max(axis=0)
        dims = tuple(int(d) for d in np.floor((hi - lo) / cs).astype(np.int64) + 1)
        return cls(lo.astype(np.float64), cs, dims)

    @property
    def n_cells(self) -> int:
        x, y, z = self.dims
        return x * y * z


@dataclass
class NeighborTable:
    """CSR neighbor lists.

    Row ``k`` describes particle ``index[k]``; ``neighbors`` holds global
    particle indices. Self-pairs are never listed.
    """

    offsets: np.ndarray
    neighbors: np.ndarray
    built_at_step: int = 0
    index: np.ndarray | None = None

    def __post_init__(self):
        if self.index is None:
            self.index = np.arange(len(self.offsets) - 1, dtype=np.int64)

    @property
    def n_rows(self) -> int:
        return len(self.offsets) - 1

    def row(self, k: int) -> np.ndarray:
        return self.neighbors[self.offsets[k]:self.offsets[k + 1]]

    def as_sets(self) -> dict:
        return {int(self.index[k]): set(self.row(k).tolist()) for k in range(self.n_rows)}

    def row_lookup(self, n_total: int) -> np.ndarray:
        """Map global particle index -> row, -1 where absent."""
        rows = np.full(n_total, -1, dtype=np.int64)
        rows[self.index] = np.arange(self.n_rows)
        return rows


@njit(cache=True)
def _hash(pos, origin, cs, dx, dy, dz, out):
    for i in range(pos.shape[0]):
        x = int(math.floor((pos[i, 0] - origin[0]) / cs))
        y = int(math.floor((pos[i, 1] - origin[1]) / cs))
        z = int(math.floor((pos[i, 2] - origin[2]) / cs))
        if x < 0 or y < 0 or z < 0 or x >= dx or y >= dy or z >= dz:
            return i
        out[i] = z * (dy * dx) + y * dx + x
    return -1


def hash_particles(positions: np.ndarray, grid: Grid) -> np.ndarray:
    """Linear cell index c = z*(Y*X) + y*X + x for every particle."""
    pos = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
    out = np.empty(len(pos), dtype=np.int64)
    dx, dy, dz = grid.dims
    bad = _hash(pos, np.asarray(grid.origin, dtype=np.float64), float(grid.cell_size),
                dx, dy, dz, out)
    if bad >= 0:
        raise OutOfBoundsError(int(bad), pos[bad])
    return out


@njit(cache=True)
def _cell_ranges(sorted_cells, n_cells):
    start = np.full(n_cells, -1, dtype=np.int64)
    end = np.full(n_cells, -1, dtype=np.int64)
    n = sorted_cells.size
    for k in range(n):
        c = sorted_cells[k]
        if k == 0 or sorted_cells[k - 1] != c:
            start[c] = k
        if k == n - 1 or sorted_cells[k + 1] != c:
            end[c] = k + 1
    return start, end


def sort_and_index(cells: np.ndarray, n_cells: int | None = None):
    """Stable sort by cell index.

    Returns ``(order, cell_start, cell_end)``: ``order`` is the sorting
    permutation (ties keep ascending particle index) and cells without
    particles carry ``EMPTY`` in both helper arrays.
    """
    cells = np.asarray(cells, dtype=np.int64)
    if n_cells is None:
        n_cells = int(cells.max()) + 1 if cells.size else 0
    order = np.argsort(cells, kind="stable")
    start, end = _cell_ranges(cells[order], n_cells)
    return order, start, end


@njit(cache=True)
def _scan_cells(pos, origin, cs, dx, dy, dz, order, start, end, radius, offsets, out, fill):
    r2 = radius * radius
    n = pos.shape[0]
    # candidates are read from a cell-sorted copy for memory locality
    sp = np.empty((n, 3))
    for k in range(n):
        j = order[k]
        sp[k, 0] = pos[j, 0]
        sp[k, 1] = pos[j, 1]
        sp[k, 2] = pos[j, 2]
    for i in range(n):
        px = pos[i, 0]
        py = pos[i, 1]
        pz = pos[i, 2]
        gx = int(math.floor((px - origin[0]) / cs))
        gy = int(math.floor((py - origin[1]) / cs))
        gz = int(math.floor((pz - origin[2]) / cs))
        count = 0
        base = offsets[i]
        for oz in range(-1, 2):
            z = gz + oz
            if z < 0 or z >= dz:
                continue
            for oy in range(-1, 2):
                y = gy + oy
                if y < 0 or y >= dy:
                    continue
                for ox in range(-1, 2):
                    x = gx + ox
                    if x < 0 or x >= dx:
                        continue
                    c = z * (dy * dx) + y * dx + x
                    b = start[c]
                    if b < 0:
                        continue
                    for k in range(b, end[c]):
                        ddx = px - sp[k, 0]
                        ddy = py - sp[k, 1]
                        ddz = pz - sp[k, 2]
                        if ddx * ddx + ddy * ddy + ddz * ddz < r2:
                            j = order[k]
                            if j == i:
                                continue
                            if fill:
                                out[base + count] = j
                            count += 1
        if not fill:
            offsets[i + 1] = count


def build_neighbor_list(positions: np.ndarray, grid: Grid, order: np.ndarray,
                        cell_start: np.ndarray, cell_end: np.ndarray,
                        step: int = 0) -> NeighborTable:
    """Neighbor lists for all particles at strict distance < 2h (= cell size).

    A counting traversal fills per-particle counts, a prefix sum turns them
    into ``offsets``, and an identical traversal writes the indices.
    """
    pos = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
    n = len(pos)
    dx, dy, dz = grid.dims
    origin = np.asarray(grid.origin, dtype=np.float64)
    cs = float(grid.cell_size)
    offsets = np.zeros(n + 1, dtype=np.int64)
    dummy = np.empty(0, dtype=np.int64)
    _scan_cells(pos, origin, cs, dx, dy, dz, order, cell_start, cell_end, cs, offsets, dummy, False)
    np.cumsum(offsets, out=offsets)
    out = np.empty(offsets[-1], dtype=np.int64)
    _scan_cells(pos, origin, cs, dx, dy, dz, order, cell_start, cell_end, cs, offsets, out, True)
    return NeighborTable(offsets, out, step)


def neighbor_search(positions: np.ndarray, h: float, step: int = 0,
                    index: np.ndarray | None = None) -> NeighborTable:
    """Full pipeline: grid, hash, sort, build.

    With ``index`` given, ``positions`` are the rows of that subset and the
    returned table lists global indices from ``index``.
    """
    pos = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
    grid = Grid.covering(pos, h)
    cells = hash_particles(pos, grid)
    order, start, end = sort_and_index(cells, grid.n_cells)
    table = build_neighbor_list(pos, grid, order, start, end, step)
    if index is not None:
        index = np.asarray(index, dtype=np.int64)
        table.neighbors = index[table.neighbors]
        table.index = index
    return table


@njit(cache=True)
def _brute(pos, r2, offsets, out, fill):
    n = pos.shape[0]
    for i in range(n):
        count = 0
        for j in range(n):
            if j == i:
                continue
            d = 0.0
            for a in range(3):
                t = pos[i, a] - pos[j, a]
                d += t * t
            if d < r2:
                if fill:
                    out[offsets[i] + count] = j
                count += 1
        if not fill:
            offsets[i + 1] = count


def brute_force_neighbors(positions: np.ndarray, radius: float) -> NeighborTable:
    """All-pairs O(N^2) reference search with the same strict '<' test."""
    pos = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
    n = len(pos)
    if n > BRUTE_FORCE_GUARD:
        raise GuardError(f"brute force search refuses N={n} > {BRUTE_FORCE_GUARD}")
    offsets = np.zeros(n + 1, dtype=np.int64)
    r2 = float(radius) ** 2
    _brute(pos, r2, offsets, np.empty(0, dtype=np.int64), False)
    np.cumsum(offsets, out=offsets)
    out = np.empty(offsets[-1], dtype=np.int64)
    _brute(pos, r2, offsets, out, True)
    return NeighborTable(offsets, out)


def should_rebuild(step: int, ps_freq: int) -> bool:
    return step % ps_freq == 0
