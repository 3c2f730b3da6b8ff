"""Cubulation of a triangular grid: integer lattice coordinates for every cell.

Each triangle edge belongs to one of three families of parallel lines; the
family is stored as the edge's color (1, 2 or 3). Crossing an edge of color
``i`` moves a cell by one unit along lattice axis ``i``. Before the final
shift, coordinate sums alternate between 0 and 1 across every edge, which
fixes the sign of each step.
"""
from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .grid import NO_NEIGHBOR, Report, TriGrid

HEADER_RE = re.compile(r"^tricubo-cubulation v1 start=(\d+) radius=(\d+) shift=(\d+)$")


class CubulationError(ValueError):
    """The grid cannot be cubulated, or a cached cubulation is unusable."""


class ColoringConflict(CubulationError):
    pass


class CoordinateConflict(CubulationError):
    pass


@dataclass(frozen=True, eq=False)
class Cubulation:
    """Per-cell lattice coordinates and per-edge colors.

    ``coords`` holds post-shift triples; rows of cells outside the radius are
    zero and flagged False in ``reached``. ``edge_color`` is 0 for edges not
    touched by any reached cell.
    """

    coords: np.ndarray
    reached: np.ndarray
    edge_color: np.ndarray
    start_cell: int
    radius: int
    shift: int

    def __post_init__(self):
        for name, dtype in (("coords", np.int64), ("reached", bool), ("edge_color", np.int8)):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_cells(self) -> int:
        return self.coords.shape[0]

    @property
    def n_reached(self) -> int:
        return int(self.reached.sum())

    @property
    def reached_cells(self) -> np.ndarray:
        return np.flatnonzero(self.reached)

    def pre_shift(self) -> np.ndarray:
        """Coordinates before the shift (start cell at the origin)."""
        return self.coords - self.shift

    def coord(self, cell: int) -> tuple[int, int, int]:
        if not self.reached[cell]:
            raise KeyError(f"cell {cell} is not covered by the cubulation")
        return tuple(int(v) for v in self.coords[cell])

    def __eq__(self, other):
        if not isinstance(other, Cubulation):
            return NotImplemented
        return (
            (self.start_cell, self.radius, self.shift) == (other.start_cell, other.radius, other.shift)
            and np.array_equal(self.reached, other.reached)
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.edge_color, other.edge_color)
        )

    __hash__ = None


def suggest_radius(n_c: int) -> int:
    """Smallest radius whose full disc of rounds holds ``n_c`` cells.

    Exact for patches that are discs around the start cell, a lower bound for
    any other shape.
    """
    n_c = int(n_c)
    if n_c < 1:
        raise ValueError(f"cell count must be >= 1, got {n_c}")
    r = max(0, math.ceil(-0.5 + math.sqrt(0.25 + 2.0 / 3.0 * (n_c - 1))))
    # float rounding can be off by one near exact patch sizes
    while 1 + 3 * r * (r + 1) // 2 < n_c:
        r += 1
    while r > 0 and 1 + 3 * (r - 1) * r // 2 >= n_c:
        r -= 1
    return r


def _print_progress(rnd: int, new: int) -> None:
    print(f"round={rnd} new={new}", file=sys.stdout)


def compute_cubulation(
    grid: TriGrid,
    start_cell: int,
    radius: int | None = None,
    progress: bool | Callable[[int, int], None] = False,
) -> Cubulation:
    """Breadth-first assignment of lattice coordinates and edge colors.

    Parameters
    ----------
    grid : TriGrid
    start_cell : int
        Cell placed at the origin before shifting.
    radius : int or None
        Number of breadth-first rounds. ``None`` keeps going until a round
        adds nothing and records the number of productive rounds.
    progress : bool or callable
        ``True`` prints ``round=<i> new=<n>`` per round; a callable receives
        ``(round, n_new)``.

    Raises
    ------
    ColoringConflict, CoordinateConflict
        The grid is not a patch of the regular triangle tiling.
    """
    nc = grid.n_cells
    start_cell = int(start_cell)
    if not 0 <= start_cell < nc:
        raise IndexError(f"start cell {start_cell} out of range [0, {nc})")
    if radius is not None and radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    report = _print_progress if progress is True else (progress or None)

    nbr = grid.neighbor_cell_index.tolist()
    eoc = grid.edge_of_cell.tolist()
    ev = grid.edge_vertices.tolist()
    color = [0] * grid.n_edges
    coords: list = [None] * nc
    sums = [0] * nc

    for c, e in enumerate(sorted(eoc[start_cell]), start=1):
        color[e] = c
    coords[start_cell] = (0, 0, 0)
    frontier = [start_cell]
    rnd = 0
    while radius is None or rnd < radius:
        pairs = sorted(
            (new, old) for old in frontier for new in nbr[old]
            if new != NO_NEIGHBOR and coords[new] is None
        )
        if not pairs:
            break
        rnd += 1
        fresh = []
        for new, old in pairs:
            old_edges = eoc[old]
            new_edges = eoc[new]
            shared = [e for e in new_edges if e in old_edges]
            if len(shared) != 1:
                raise CubulationError(f"cells {old} and {new} share {len(shared)} edges")
            s = shared[0]
            old_rest = [e for e in old_edges if e != s]
            for e in new_edges:
                if e == s:
                    continue
                a, b = ev[e]
                parallel = [o for o in old_rest if a not in ev[o] and b not in ev[o]]
                if len(parallel) != 1:
                    raise ColoringConflict(f"edge {e} of cell {new} has no parallel edge in cell {old}")
                want = color[parallel[0]]
                if color[e] == 0:
                    color[e] = want
                elif color[e] != want:
                    raise ColoringConflict(
                        f"edge {e} reached with colors {color[e]} and {want} (cells {old}->{new})"
                    )
            axis = color[s] - 1
            x = list(coords[old])
            x[axis] += 1 if sums[old] == 0 else -1
            x = tuple(x)
            if coords[new] is None:
                coords[new] = x
                sums[new] = 1 - sums[old]
                fresh.append(new)
            elif coords[new] != x:
                raise CoordinateConflict(
                    f"cell {new} reached with coordinates {coords[new]} and {x} (via cell {old})"
                )
        fresh_set = set(fresh)
        for c in fresh:
            for d in nbr[c]:
                if d in fresh_set:
                    raise CoordinateConflict(f"cells {c} and {d} are adjacent but reached in the same round")
        if report:
            report(rnd, len(fresh))
        frontier = fresh

    used_radius = rnd if radius is None else int(radius)
    shift = used_radius // 2
    reached = np.array([c is not None for c in coords], dtype=bool)
    out = np.zeros((nc, 3), dtype=np.int64)
    idx = np.flatnonzero(reached)
    out[idx] = np.array([coords[i] for i in idx], dtype=np.int64).reshape(-1, 3) + shift
    if (out[idx] < 0).any():
        bad = int(idx[np.flatnonzero((out[idx] < 0).any(axis=1))[0]])
        raise CubulationError(f"cell {bad} has a negative coordinate after shifting by {shift}")
    return Cubulation(out, reached, np.array(color, dtype=np.int8), start_cell, used_radius, shift)


# ----------------------------------------------------------------------------
# verification


def _lookup(sorted_keys: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Positions of ``keys`` in ``sorted_keys``, -1 where absent."""
    if sorted_keys.size == 0:
        return np.full(keys.shape, -1, dtype=np.int64)
    pos = np.clip(np.searchsorted(sorted_keys, keys), 0, sorted_keys.size - 1)
    return np.where(sorted_keys[pos] == keys, pos, -1)


def verify_cubulation(grid: TriGrid, cub: Cubulation, max_findings_per_kind: int = 20) -> Report:
    """Check a cubulation against the grid it claims to describe.

    Findings are reported per kind: ``shape``, ``start-origin``,
    ``negative-coordinate``, ``parity``, ``injectivity``, ``edge-color``,
    ``stray-color``, ``adjacency-violated``, ``hexagon-in-cube`` and
    ``adjacency-converse``.
    """
    report = Report()
    cap = max_findings_per_kind
    if cub.coords.shape != (grid.n_cells, 3) or cub.reached.shape != (grid.n_cells,):
        report.add("shape", (), f"cubulation covers {cub.coords.shape[0]} cells, grid has {grid.n_cells}")
        return report
    if cub.edge_color.shape != (grid.n_edges,):
        report.add("shape", (), f"cubulation colors {cub.edge_color.shape[0]} edges, grid has {grid.n_edges}")
        return report
    if not 0 <= cub.start_cell < grid.n_cells or not cub.reached[cub.start_cell]:
        report.add("start-origin", (cub.start_cell,), "start cell is not covered")
        return report

    coords = cub.coords
    pre = cub.pre_shift()
    idx = cub.reached_cells
    if (pre[cub.start_cell] != 0).any():
        report.add("start-origin", (cub.start_cell,), f"start cell at {pre[cub.start_cell].tolist()}")

    for c in idx[(coords[idx] < 0).any(axis=1)][:cap]:
        report.add("negative-coordinate", (c,), f"coordinates {coords[c].tolist()}")

    sums = pre.sum(axis=1)
    for c in idx[~np.isin(sums[idx], (0, 1))][:cap]:
        report.add("parity", (c,), f"pre-shift coordinate sum {sums[c]}")

    lo = coords[idx].min(axis=0) if idx.size else np.zeros(3, dtype=np.int64)
    span = (coords[idx].max(axis=0) - lo + 3) if idx.size else np.ones(3, dtype=np.int64)
    # one spare slot per axis so +1 probes stay inside the key space
    def key(x):
        x = x - lo + 1
        return (x[..., 0] * span[1] + x[..., 1]) * span[2] + x[..., 2]

    keys = key(coords[idx])
    order = np.argsort(keys, kind="stable")
    skeys = keys[order]
    dup = np.flatnonzero(skeys[1:] == skeys[:-1])
    for i in dup[:cap]:
        report.add("injectivity", (idx[order[i]], idx[order[i + 1]]),
                   f"both cells at {coords[idx[order[i]]].tolist()}")

    colors = cub.edge_color[grid.edge_of_cell[idx]]
    good = np.sort(colors, axis=1) == np.array([1, 2, 3])
    for c in idx[~good.all(axis=1)][:cap]:
        report.add("edge-color", (c,), f"edge colors {cub.edge_color[grid.edge_of_cell[c]].tolist()}")
    touched = np.zeros(grid.n_edges, dtype=bool)
    touched[grid.edge_of_cell[idx].ravel()] = True
    for e in np.flatnonzero((cub.edge_color != 0) & ~touched)[:cap]:
        report.add("stray-color", (e,), "edge colored but not part of any covered cell")

    ec = grid.edge_cells
    both = (ec[:, 1] != NO_NEIGHBOR) & (ec[:, 0] != NO_NEIGHBOR)
    edges = np.flatnonzero(both)
    a, b = ec[edges, 0], ec[edges, 1]
    keep = cub.reached[a] & cub.reached[b]
    edges, a, b = edges[keep], a[keep], b[keep]
    diff = coords[b] - coords[a]
    nz = diff != 0
    one = (nz.sum(axis=1) == 1) & (np.abs(diff).sum(axis=1) == 1)
    axis = np.argmax(nz, axis=1) + 1
    ok = one & (axis == cub.edge_color[edges])
    for i in np.flatnonzero(~ok)[:cap]:
        report.add("adjacency-violated", (a[i], b[i]),
                   f"{coords[a[i]].tolist()} vs {coords[b[i]].tolist()} across edge {edges[i]} "
                   f"of color {cub.edge_color[edges[i]]}")

    cv = grid.cell_vertices[idx]
    verts = cv.ravel()
    cells = np.repeat(idx, 3)
    if verts.size:
        vorder = np.argsort(verts, kind="stable")
        verts, cells = verts[vorder], cells[vorder]
        starts = np.flatnonzero(np.r_[True, verts[1:] != verts[:-1]])
        lo_v = np.minimum.reduceat(coords[cells], starts, axis=0)
        hi_v = np.maximum.reduceat(coords[cells], starts, axis=0)
        for i in np.flatnonzero(((hi_v - lo_v) > 1).any(axis=1))[:cap]:
            report.add("hexagon-in-cube", (verts[starts[i]],),
                       f"cells around vertex span {(hi_v[i] - lo_v[i]).tolist()}")

    # a unit step from a sum-0 cell to a sum-1 cell must be a grid edge
    even = idx[sums[idx] == 0]
    pair_keys = np.sort(np.concatenate([a * grid.n_cells + b, b * grid.n_cells + a]))
    found = 0
    for ax in range(3):
        step = np.zeros(3, dtype=np.int64)
        step[ax] = 1
        hit = _lookup(skeys, key(coords[even] + step))
        src = even[hit >= 0]
        dst = idx[order[hit[hit >= 0]]]
        linked = _lookup(pair_keys, src * grid.n_cells + dst) >= 0
        for i in np.flatnonzero(~linked):
            if found >= cap:
                break
            report.add("adjacency-converse", (src[i], dst[i]),
                       "unit lattice step between cells that share no edge")
            found += 1
    return report


# ----------------------------------------------------------------------------
# cache files


def save_cubulation(cub: Cubulation, sink) -> None:
    """Write the text cache: header, ``cell,x,y,z`` rows, then ``edge,color`` rows."""
    lines = [f"tricubo-cubulation v1 start={cub.start_cell} radius={cub.radius} shift={cub.shift}"]
    idx = cub.reached_cells
    c = cub.coords[idx]
    lines.extend(f"{i},{x},{y},{z}" for i, x, y, z in zip(idx.tolist(), *c.T.tolist()))
    edges = np.flatnonzero(cub.edge_color)
    lines.extend(f"{e},{k}" for e, k in zip(edges.tolist(), cub.edge_color[edges].tolist()))
    text = "\n".join(lines) + "\n"
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        Path(sink).write_text(text)


def load_cubulation(source, grid: TriGrid, verify: bool = True) -> Cubulation:
    """Read a cache written by :func:`save_cubulation` for ``grid``.

    Unless ``verify`` is False the result is checked with
    :func:`verify_cubulation` and rejected on any finding.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    lines = text.splitlines()
    if not lines:
        raise CubulationError("empty cubulation file")
    m = HEADER_RE.match(lines[0].strip())
    if not m:
        raise CubulationError(f"bad cubulation header: {lines[0][:80]!r}")
    start, radius, shift = (int(g) for g in m.groups())

    cell_rows, edge_rows = [], []
    for n, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        try:
            values = [int(p) for p in parts]
        except ValueError:
            raise CubulationError(f"line {n}: non-integer field in {line!r}") from None
        if len(values) == 4:
            if edge_rows:
                raise CubulationError(f"line {n}: cell row after edge rows")
            cell_rows.append(values)
        elif len(values) == 2:
            edge_rows.append(values)
        else:
            raise CubulationError(f"line {n}: expected 4 or 2 fields, got {len(values)}")

    cells = np.array(cell_rows, dtype=np.int64).reshape(-1, 4)
    edges = np.array(edge_rows, dtype=np.int64).reshape(-1, 2)
    if cells.size and ((cells[:, 0] < 0) | (cells[:, 0] >= grid.n_cells)).any():
        raise CubulationError("cubulation references cells outside the grid")
    if edges.size and ((edges[:, 0] < 0) | (edges[:, 0] >= grid.n_edges)).any():
        raise CubulationError("cubulation references edges outside the grid")
    if edges.size and ~np.isin(edges[:, 1], (1, 2, 3)).all():
        raise CubulationError("edge colors must be 1, 2 or 3")
    if np.unique(cells[:, 0]).size != cells.shape[0] or np.unique(edges[:, 0]).size != edges.shape[0]:
        raise CubulationError("duplicate cell or edge rows")

    coords = np.zeros((grid.n_cells, 3), dtype=np.int64)
    reached = np.zeros(grid.n_cells, dtype=bool)
    coords[cells[:, 0]] = cells[:, 1:]
    reached[cells[:, 0]] = True
    color = np.zeros(grid.n_edges, dtype=np.int8)
    color[edges[:, 0]] = edges[:, 1]
    cub = Cubulation(coords, reached, color, start, radius, shift)
    if verify:
        report = verify_cubulation(grid, cub)
        if not report.ok:
            raise CubulationError(f"cubulation does not match grid: {report.findings[0]}")
    return cub
