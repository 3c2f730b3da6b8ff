"""Connected components of thresholded fields.

Lattice labeling goes through the cubulation: edge connectivity on the
triangles is face (6-) connectivity on the lattice, vertex connectivity is
26-connectivity. The breadth-first oracles work on the triangle adjacency
directly and never touch the cubulation.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .cubulation import Cubulation
from .fields import DEFAULT_DENSE_CAP, BinaryField, CubicField, MultiLevelBinaryField, to_cubic
from .grid import NO_NEIGHBOR, MAX_VERTEX_VALENCE, TriGrid


class Connectivity(str, enum.Enum):
    VERTEX = "vertex"
    EDGE = "edge"

    @property
    def lattice_neighbors(self) -> int:
        return 26 if self is Connectivity.VERTEX else 6


def _conn(conn) -> Connectivity:
    return Connectivity(conn)


class ComponentSet:
    """Ordered partition of active cells or (level, cell) pairs.

    Components are ordered by size, largest first; equal sizes are ordered by
    their smallest member. Members within a component are ascending. For
    3-d sets members are (level, cell) pairs, stored internally as
    ``level * n_cells + cell``.
    """

    def __init__(self, members: np.ndarray, offsets: np.ndarray, n_cells: int | None = None):
        self._members = np.asarray(members, dtype=np.int64)
        self._offsets = np.asarray(offsets, dtype=np.int64)
        self.n_cells = n_cells

    @classmethod
    def from_labels(cls, keys, labels, n_cells: int | None = None) -> "ComponentSet":
        """Canonical set from ascending member ``keys`` and arbitrary ``labels``."""
        keys = np.asarray(keys, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if keys.size == 0:
            return cls(keys, np.zeros(1, dtype=np.int64), n_cells)
        _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
        sizes = np.bincount(inv)
        # keys ascending, so the first occurrence is the smallest member
        rank = np.empty(sizes.size, dtype=np.int64)
        rank[np.lexsort((keys[first], -sizes))] = np.arange(sizes.size)
        lab = rank[inv]
        order = np.argsort(lab, kind="stable")
        offsets = np.zeros(sizes.size + 1, dtype=np.int64)
        np.cumsum(np.bincount(lab), out=offsets[1:])
        return cls(keys[order], offsets, n_cells)

    @property
    def is_3d(self) -> bool:
        return self.n_cells is not None

    def __len__(self) -> int:
        return self._offsets.size - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self._offsets)

    @property
    def n_active(self) -> int:
        return int(self._members.size)

    def member_keys(self, i: int) -> np.ndarray:
        return self._members[self._offsets[i]:self._offsets[i + 1]]

    def __getitem__(self, i: int) -> np.ndarray:
        """Cell ids of component ``i``, or an (n, 2) array of (level, cell) rows."""
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i %= len(self)
        keys = self.member_keys(i)
        if self.is_3d:
            return np.stack([keys // self.n_cells, keys % self.n_cells], axis=1)
        return keys

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def components(self) -> list:
        """Components as lists of cell ids or (level, cell) tuples."""
        if self.is_3d:
            return [[tuple(r) for r in c.tolist()] for c in self]
        return [c.tolist() for c in self]

    def labeled(self) -> tuple[np.ndarray, np.ndarray]:
        """(member keys, label) for every active member, ascending by key."""
        labels = np.repeat(np.arange(len(self)), self.sizes)
        order = np.argsort(self._members, kind="stable")
        return self._members[order], labels[order]

    def as_sets(self) -> set[frozenset]:
        return {frozenset(c) for c in self.components}

    def same_partition(self, other: "ComponentSet") -> bool:
        ka, la = self.labeled()
        kb, lb = other.labeled()
        if not np.array_equal(ka, kb):
            return False
        # both canonical: identical partitions have identical labels
        return np.array_equal(la, lb)

    def __eq__(self, other):
        if not isinstance(other, ComponentSet):
            return NotImplemented
        return (
            self.n_cells == other.n_cells
            and np.array_equal(self._members, other._members)
            and np.array_equal(self._offsets, other._offsets)
        )

    __hash__ = None

    def __repr__(self) -> str:
        dim = "3d" if self.is_3d else "2d"
        return f"ComponentSet({dim}, components={len(self)}, active={self.n_active})"


# ----------------------------------------------------------------------------
# lattice labeling


def label_2d(
    cubic: CubicField,
    conn=Connectivity.VERTEX,
    engine: str = "sparse",
    dense_cap: int = DEFAULT_DENSE_CAP,
) -> ComponentSet:
    """Label occupied lattice points and map the labels back to cells.

    ``engine="sparse"`` merges hashed points directly; ``engine="dense"``
    runs a two-pass raster scan over the bounding box and refuses boxes
    larger than ``dense_cap`` points.
    """
    conn = _conn(conn)
    offsets = _kernels.FULL_OFFSETS if conn is Connectivity.VERTEX else _kernels.FACE_OFFSETS
    if len(cubic) == 0:
        return ComponentSet.from_labels([], [])
    if engine == "sparse":
        lo, _ = cubic.bounds
        roots = _kernels.sparse_label(np.ascontiguousarray(cubic.occupied - lo), offsets)
    elif engine == "dense":
        volume, lo = cubic.dense(cap=dense_cap)
        labels = _kernels.dense_label(volume, np.ascontiguousarray(-offsets))
        rel = cubic.occupied - lo
        roots = labels[rel[:, 0], rel[:, 1], rel[:, 2]]
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return ComponentSet.from_labels(cubic.origin, roots)


def label_3d(
    levels: MultiLevelBinaryField,
    cub: Cubulation,
    conn=Connectivity.VERTEX,
    engine: str = "sparse",
) -> ComponentSet:
    """3-d components from per-level labeling plus vertical merging.

    Components on adjacent levels are merged when they have a cell in
    common; there is no diagonal vertical connection.
    """
    conn = _conn(conn)
    nc, nlev = levels.n_cells, levels.nlev
    comp_of = np.full((nlev, nc), -1, dtype=np.int64)
    base = 0
    for k in range(nlev):
        comps = label_2d(to_cubic(levels.level(k), cub, level=k), conn, engine)
        keys, lab = comps.labeled()
        comp_of[k, keys] = lab + base
        base += len(comps)

    pa, pb = [], []
    for k in range(nlev - 1):
        both = (comp_of[k] >= 0) & (comp_of[k + 1] >= 0)
        pa.append(comp_of[k, both])
        pb.append(comp_of[k + 1, both])
    pa = np.concatenate(pa) if pa else np.zeros(0, dtype=np.int64)
    pb = np.concatenate(pb) if pb else np.zeros(0, dtype=np.int64)
    roots = _kernels.union_pairs(base, pa, pb)

    flat = comp_of.ravel()
    keys = np.flatnonzero(flat >= 0)
    return ComponentSet.from_labels(keys, roots[flat[keys]], n_cells=nc)


# ----------------------------------------------------------------------------
# graph baselines


@dataclass(frozen=True, eq=False)
class CellGraph:
    """Adjacency of all grid cells in CSR form."""

    indptr: np.ndarray
    indices: np.ndarray
    conn: Connectivity

    @property
    def n_nodes(self) -> int:
        return self.indptr.size - 1

    @property
    def n_links(self) -> int:
        return self.indices.size // 2

    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, cell: int) -> np.ndarray:
        return self.indices[self.indptr[cell]:self.indptr[cell + 1]]


def _vertex_pairs(grid: TriGrid) -> tuple[np.ndarray, np.ndarray]:
    indptr, cells = grid.vertex_cells
    counts = np.diff(indptr)
    width = max(int(counts.max()) if counts.size else 0, 1)
    if width > MAX_VERTEX_VALENCE:
        raise ValueError(f"vertex valence {width} exceeds {MAX_VERTEX_VALENCE}")
    table = np.full((grid.n_vertices, width), -1, dtype=np.int64)
    slot = np.arange(cells.size) - np.repeat(indptr[:-1], counts)
    table[np.repeat(np.arange(grid.n_vertices), counts), slot] = cells
    a = np.repeat(table, width, axis=1).ravel()
    b = np.tile(table, (1, width)).ravel()
    keep = (a >= 0) & (b >= 0) & (a != b)
    return a[keep], b[keep]


def build_full_graph(grid: TriGrid, conn=Connectivity.VERTEX) -> CellGraph:
    """Adjacency lists of every cell, reusable across time steps."""
    conn = _conn(conn)
    nc = grid.n_cells
    if conn is Connectivity.EDGE:
        nbr = grid.neighbor_cell_index
        a = np.repeat(np.arange(nc), 3)
        b = nbr.ravel()
        keep = b != NO_NEIGHBOR
        a, b = a[keep], b[keep]
    else:
        a, b = _vertex_pairs(grid)
    keys = np.unique(a * nc + b)
    a, b = keys // nc, keys % nc
    indptr = np.zeros(nc + 1, dtype=np.int64)
    np.cumsum(np.bincount(a, minlength=nc), out=indptr[1:])
    return CellGraph(indptr, b, conn)


def _bfs(adjacency, active: list[int], is_active) -> list[int]:
    label = {}
    n = 0
    for seed in active:
        if seed in label:
            continue
        label[seed] = n
        queue = deque([seed])
        while queue:
            u = queue.popleft()
            for v in adjacency(u):
                if v not in label and is_active(v):
                    label[v] = n
                    queue.append(v)
        n += 1
    return [label[c] for c in active]


def _adjacency(grid: TriGrid, conn: Connectivity, graph: CellGraph | None):
    if graph is not None:
        if graph.conn is not conn or graph.n_nodes != grid.n_cells:
            raise ValueError("graph does not match grid and connectivity")
        indptr, indices = graph.indptr.tolist(), graph.indices.tolist()
        return lambda u: indices[indptr[u]:indptr[u + 1]]
    nbr = grid.neighbor_cell_index.tolist()
    if conn is Connectivity.EDGE:
        return lambda u: [v for v in nbr[u] if v != NO_NEIGHBOR]
    vptr, vcells = (x.tolist() for x in grid.vertex_cells)
    cverts = grid.cell_vertices.tolist()

    def around(u):
        out = []
        for v in cverts[u]:
            out.extend(vcells[vptr[v]:vptr[v + 1]])
        return [c for c in out if c != u]

    return around


def bfs_oracle_2d(grid: TriGrid, binary: BinaryField, conn=Connectivity.VERTEX,
                  graph: CellGraph | None = None) -> ComponentSet:
    """Breadth-first search over the triangle adjacency of the active cells."""
    conn = _conn(conn)
    if binary.n_cells != grid.n_cells:
        raise ValueError(f"field has {binary.n_cells} cells, grid {grid.n_cells}")
    mask = binary.mask.tolist()
    active = binary.active.tolist()
    labels = _bfs(_adjacency(grid, conn, graph), active, lambda v: mask[v])
    return ComponentSet.from_labels(active, labels)


def bfs_oracle_3d(grid: TriGrid, levels: MultiLevelBinaryField, conn=Connectivity.VERTEX,
                  graph: CellGraph | None = None) -> ComponentSet:
    """Breadth-first search over (level, cell) nodes.

    Horizontal links follow ``conn`` within a level; vertical links join the
    same cell on adjacent levels.
    """
    conn = _conn(conn)
    nc, nlev = grid.n_cells, levels.nlev
    if levels.n_cells != nc:
        raise ValueError(f"field has {levels.n_cells} cells, grid {nc}")
    horizontal = _adjacency(grid, conn, graph)
    mask = levels.mask.ravel().tolist()

    def adjacency(node):
        k, c = divmod(node, nc)
        out = [k * nc + v for v in horizontal(c)]
        if k > 0:
            out.append(node - nc)
        if k < nlev - 1:
            out.append(node + nc)
        return out

    active = np.flatnonzero(levels.mask.ravel()).tolist()
    labels = _bfs(adjacency, active, lambda v: mask[v])
    return ComponentSet.from_labels(active, labels, n_cells=nc)


# ----------------------------------------------------------------------------
# output files


def save_components(comps: ComponentSet, sink, conn=Connectivity.VERTEX) -> None:
    """CSV of ``cell,label`` (or ``level,cell,label``) plus a summary footer."""
    conn = _conn(conn)
    keys, labels = comps.labeled()
    lines = []
    if comps.is_3d:
        lines.append("level,cell,label")
        lev, cell = keys // comps.n_cells, keys % comps.n_cells
        lines.extend(f"{k},{c},{l}" for k, c, l in zip(lev.tolist(), cell.tolist(), labels.tolist()))
    else:
        lines.append("cell,label")
        lines.extend(f"{c},{l}" for c, l in zip(keys.tolist(), labels.tolist()))
    lines.append(f"# components={len(comps)} active={comps.n_active} connectivity={conn.value}")
    text = "\n".join(lines) + "\n"
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        Path(sink).write_text(text)


def load_components(source, n_cells: int | None = None) -> ComponentSet:
    """Read a component file back; pass ``n_cells`` for 3-d files."""
    text = source.read() if hasattr(source, "read") else Path(source).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].strip()
    rows = np.array([[int(v) for v in ln.split(",")] for ln in lines[1:] if not ln.startswith("#")],
                    dtype=np.int64)
    if header == "cell,label":
        rows = rows.reshape(-1, 2)
        return ComponentSet.from_labels(rows[:, 0], rows[:, 1])
    if header == "level,cell,label":
        if n_cells is None:
            raise ValueError("n_cells is required for 3-d component files")
        rows = rows.reshape(-1, 3)
        keys = rows[:, 0] * n_cells + rows[:, 1]
        order = np.argsort(keys)
        return ComponentSet.from_labels(keys[order], rows[order, 2], n_cells=n_cells)
    raise ValueError(f"unknown component header {header!r}")


def is_refinement(fine: ComponentSet, coarse: ComponentSet) -> bool:
    """True if every component of ``fine`` lies inside one of ``coarse``.

    Both sets must cover the same members; ``coarse`` may not have more
    components than ``fine``.
    """
    kf, lf = fine.labeled()
    kc, lc = coarse.labeled()
    if not np.array_equal(kf, kc) or len(coarse) > len(fine):
        return False
    if kf.size == 0:
        return True
    order = np.lexsort((lc, lf))
    lf, lc = lf[order], lc[order]
    # within one fine label the coarse label must be constant
    same = lf[1:] == lf[:-1]
    return bool(np.all(lc[1:][same] == lc[:-1][same]))
