"""Triangular grid topology: data model, validation, file I/O and synthetic patches.

Cells, edges and vertices are 0-based integer ids. A missing neighbor (the
boundary of a limited-area grid) is stored as :data:`NO_NEIGHBOR` and never
as an index into any array.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

NO_NEIGHBOR = -1
MAX_VERTEX_VALENCE = 6
EARTH_RADIUS_KM = 6371.0


class GridError(ValueError):
    """Raised when a grid file cannot be turned into a valid TriGrid."""


@dataclass(frozen=True)
class Finding:
    kind: str
    ids: tuple[int, ...]
    message: str = ""

    def __str__(self) -> str:
        ids = ",".join(str(i) for i in self.ids)
        text = f"{self.kind} [{ids}]"
        return f"{text}: {self.message}" if self.message else text


@dataclass
class Report:
    """Collected findings of a validation or verification pass."""

    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, kind: str, ids, message: str = "") -> None:
        self.findings.append(Finding(kind, tuple(int(i) for i in ids), message))

    def kinds(self) -> set[str]:
        return {f.kind for f in self.findings}

    def __len__(self) -> int:
        return len(self.findings)

    def __iter__(self):
        return iter(self.findings)

    def __str__(self) -> str:
        if self.ok:
            return "no findings"
        return "\n".join(str(f) for f in self.findings)


@dataclass(frozen=True, eq=False)
class TriGrid:
    """Topology of a patch of triangles.

    Attributes
    ----------
    neighbor_cell_index : (n_cells, 3) int array
        Edge neighbors of every cell, ``NO_NEIGHBOR`` at the boundary.
    edge_of_cell : (n_cells, 3) int array
    edge_vertices : (n_edges, 2) int array
    n_vertices : int
    cell_lon, cell_lat : (n_cells,) float arrays or None
        Cell centers in degrees.
    """

    neighbor_cell_index: np.ndarray
    edge_of_cell: np.ndarray
    edge_vertices: np.ndarray
    n_vertices: int
    cell_lon: np.ndarray | None = None
    cell_lat: np.ndarray | None = None

    def __post_init__(self):
        for name in ("neighbor_cell_index", "edge_of_cell", "edge_vertices"):
            arr = np.array(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("cell_lon", "cell_lat"):
            value = getattr(self, name)
            if value is not None:
                arr = np.array(value, dtype=np.float64)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        object.__setattr__(self, "n_vertices", int(self.n_vertices))

    @property
    def n_cells(self) -> int:
        return self.neighbor_cell_index.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_vertices.shape[0]

    @property
    def has_coordinates(self) -> bool:
        return self.cell_lon is not None and self.cell_lat is not None

    def neighbors(self, cell: int) -> list[int]:
        """Edge neighbors of ``cell``, boundary slots dropped."""
        row = self.neighbor_cell_index[_check_cell(self, cell)]
        return [int(c) for c in row if c != NO_NEIGHBOR]

    @cached_property
    def cell_vertices(self) -> np.ndarray:
        """(n_cells, 3) vertex ids, ascending per cell.

        Only meaningful on a grid whose cell edges close into a triangle.
        """
        ends = self.edge_vertices[self.edge_of_cell].reshape(self.n_cells, 6)
        ends = np.sort(ends, axis=1)
        # each vertex of a proper triangle appears exactly twice
        return np.ascontiguousarray(ends[:, ::2])

    @cached_property
    def edge_cells(self) -> np.ndarray:
        """(n_edges, 2) cells using each edge, ``NO_NEIGHBOR``-padded.

        Edges referenced by more than two cells keep the two smallest ids.
        """
        out = np.full((self.n_edges, 2), NO_NEIGHBOR, dtype=np.int64)
        edges = self.edge_of_cell.ravel()
        cells = np.repeat(np.arange(self.n_cells), 3)
        order = np.lexsort((cells, edges))
        edges, cells = edges[order], cells[order]
        first = np.ones(edges.size, dtype=bool)
        first[1:] = edges[1:] != edges[:-1]
        out[edges[first], 0] = cells[first]
        second = np.zeros(edges.size, dtype=bool)
        second[1:] = first[:-1] & ~first[1:]
        out[edges[second], 1] = cells[second]
        return out

    @cached_property
    def vertex_cells(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR map vertex -> incident cells as ``(indptr, cells)``."""
        verts = self.cell_vertices.ravel()
        cells = np.repeat(np.arange(self.n_cells), 3)
        order = np.lexsort((cells, verts))
        indptr = np.zeros(self.n_vertices + 1, dtype=np.int64)
        np.cumsum(np.bincount(verts, minlength=self.n_vertices), out=indptr[1:])
        return indptr, cells[order]

    def same_content(self, other: "TriGrid") -> bool:
        if not isinstance(other, TriGrid):
            return False
        for name in ("neighbor_cell_index", "edge_of_cell", "edge_vertices"):
            if not np.array_equal(getattr(self, name), getattr(other, name)):
                return False
        if self.n_vertices != other.n_vertices:
            return False
        for name in ("cell_lon", "cell_lat"):
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True


def _check_cell(grid: TriGrid, cell: int) -> int:
    cell = int(cell)
    if not 0 <= cell < grid.n_cells:
        raise IndexError(f"cell {cell} out of range [0, {grid.n_cells})")
    return cell


# ----------------------------------------------------------------------------
# validation


def _first_ids(mask: np.ndarray) -> np.ndarray:
    return np.flatnonzero(mask)


def validate_grid(grid: TriGrid, max_findings_per_kind: int = 20) -> Report:
    """Check every structural invariant of a triangular grid.

    Returns a report whose findings are empty iff the grid is valid. The
    number of findings of each kind is capped at ``max_findings_per_kind``.
    """
    report = Report()
    cap = max_findings_per_kind
    nc, ne, nv = grid.n_cells, grid.n_edges, grid.n_vertices
    nbr, eoc, ev = grid.neighbor_cell_index, grid.edge_of_cell, grid.edge_vertices

    shapes = {"neighbor_cell_index": (nbr, 3), "edge_of_cell": (eoc, 3), "edge_vertices": (ev, 2)}
    for name, (arr, width) in shapes.items():
        if arr.ndim != 2 or arr.shape[1] != width:
            report.add("shape", (), f"{name} has shape {arr.shape}, expected (*, {width})")
    if eoc.shape[0] != nc:
        report.add("shape", (), f"edge_of_cell has {eoc.shape[0]} rows, expected {nc}")
    for name in ("cell_lon", "cell_lat"):
        arr = getattr(grid, name)
        if arr is not None and arr.shape != (nc,):
            report.add("shape", (), f"{name} has shape {arr.shape}, expected ({nc},)")
    if not report.ok:
        return report

    bad = (nbr != NO_NEIGHBOR) & ((nbr < 0) | (nbr >= nc))
    for c in _first_ids(bad.any(axis=1))[:cap]:
        report.add("index-out-of-range", (c,), f"neighbor ids {nbr[c].tolist()} with n_cells={nc}")
    bad = (eoc < 0) | (eoc >= ne)
    for c in _first_ids(bad.any(axis=1))[:cap]:
        report.add("index-out-of-range", (c,), f"edge ids {eoc[c].tolist()} with n_edges={ne}")
    bad = (ev < 0) | (ev >= nv)
    for e in _first_ids(bad.any(axis=1))[:cap]:
        report.add("index-out-of-range", (e,), f"edge {e} vertices {ev[e].tolist()} with n_vertices={nv}")
    if not report.ok:
        return report

    for e in _first_ids(ev[:, 0] == ev[:, 1])[:cap]:
        report.add("degenerate-edge", (e,), "edge joins a vertex to itself")

    s = np.sort(eoc, axis=1)
    for c in _first_ids((s[:, 0] == s[:, 1]) | (s[:, 1] == s[:, 2]))[:cap]:
        report.add("duplicate-edge", (c,), f"cell lists edges {eoc[c].tolist()}")

    ends = np.sort(ev[eoc].reshape(nc, 6), axis=1)
    closed = (
        (ends[:, 0] == ends[:, 1]) & (ends[:, 2] == ends[:, 3]) & (ends[:, 4] == ends[:, 5])
        & (ends[:, 1] != ends[:, 2]) & (ends[:, 3] != ends[:, 4])
    )
    for c in _first_ids(~closed)[:cap]:
        report.add("edge-vertex-mismatch", (c,), "cell edges do not close into a triangle on 3 vertices")

    cells = np.repeat(np.arange(nc), 3)
    flat = nbr.ravel()
    has = flat != NO_NEIGHBOR
    a, b = cells[has], flat[has]
    for c in np.unique(a[a == b])[:cap]:
        report.add("self-neighbor", (c,), "cell lists itself as neighbor")
    ns = np.sort(nbr, axis=1)
    dup = ((ns[:, 0] == ns[:, 1]) & (ns[:, 0] != NO_NEIGHBOR)) | (
        (ns[:, 1] == ns[:, 2]) & (ns[:, 1] != NO_NEIGHBOR)
    )
    for c in _first_ids(dup)[:cap]:
        report.add("duplicate-neighbor", (c,), f"neighbors {nbr[c].tolist()}")

    keys = a * nc + b
    rkeys = np.sort(b * nc + a)
    pos = np.clip(np.searchsorted(rkeys, keys), 0, max(rkeys.size - 1, 0))
    missing = rkeys[pos] != keys if rkeys.size else np.zeros(0, dtype=bool)
    for i in _first_ids(missing)[:cap]:
        report.add("asymmetric-adjacency", (a[i], b[i]),
                   f"cell {a[i]} lists {b[i]} as neighbor but not vice versa")

    shared = (eoc[a][:, :, None] == eoc[b][:, None, :]).sum(axis=(1, 2))
    for i in _first_ids((shared != 1) & (a < b))[:cap]:
        report.add("shared-edge-mismatch", (a[i], b[i]),
                   f"adjacent cells share {shared[i]} edges, expected 1")

    counts = np.bincount(eoc.ravel(), minlength=ne)
    for e in _first_ids(counts > 2)[:cap]:
        report.add("edge-overused", (e,), f"edge referenced by {counts[e]} cells")
    ec = grid.edge_cells
    two = _first_ids((ec[:, 1] != NO_NEIGHBOR) & (counts == 2))
    if two.size:
        pa, pb = ec[two, 0], ec[two, 1]
        nk = np.sort(keys)
        pk = pa * nc + pb
        p = np.clip(np.searchsorted(nk, pk), 0, max(nk.size - 1, 0))
        linked = (nk[p] == pk) if nk.size else np.zeros(pk.size, dtype=bool)
        for i in _first_ids(~linked)[:cap]:
            report.add("missing-adjacency", (pa[i], pb[i]),
                       f"cells share edge {two[i]} but are not listed as neighbors")

    if closed.all():
        valence = np.bincount(grid.cell_vertices.ravel(), minlength=nv)
        for v in _first_ids(valence > MAX_VERTEX_VALENCE)[:cap]:
            report.add("vertex-valence-exceeded", (v,),
                       f"vertex incident to {valence[v]} cells (max {MAX_VERTEX_VALENCE})")

    if grid.has_coordinates:
        finite = np.isfinite(grid.cell_lon) & np.isfinite(grid.cell_lat)
        for c in _first_ids(~finite)[:cap]:
            report.add("non-finite-coordinate", (c,))
    return report


# ----------------------------------------------------------------------------
# queries


def cells_sharing_vertex(grid: TriGrid, cell: int) -> set[int]:
    """All other cells that have at least one vertex in common with ``cell``."""
    cell = _check_cell(grid, cell)
    indptr, cells = grid.vertex_cells
    out: set[int] = set()
    for v in grid.cell_vertices[cell]:
        out.update(cells[indptr[v]:indptr[v + 1]].tolist())
    out.discard(cell)
    return out


def haversine_km(lon1, lat1, lon2, lat2):
    """Great circle distance in km; arguments in degrees, broadcastable."""
    lon1, lat1, lon2, lat2 = (np.radians(np.asarray(x, dtype=float)) for x in (lon1, lat1, lon2, lat2))
    h = (np.sin((lat2 - lat1) / 2) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def nearest_cell(grid: TriGrid, lon: float, lat: float) -> int:
    """Cell whose center is closest to (lon, lat); ties go to the smallest id."""
    if not grid.has_coordinates:
        raise GridError("grid has no cell_lon/cell_lat coordinates")
    d = haversine_km(grid.cell_lon, grid.cell_lat, lon, lat)
    # argmin returns the first minimum, i.e. the smallest id
    return int(np.argmin(d))


# ----------------------------------------------------------------------------
# file I/O


def _as_table(data, name: str, rows: int, width: int) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise GridError(f"{name}: not an integer array ({exc})") from None
    if arr.size == 0 and rows == 0:
        return arr.reshape(0, width)
    if arr.ndim == 2 and arr.shape == (rows, width):
        return arr
    # ICON stores these arrays as (width, rows)
    if arr.ndim == 2 and arr.shape == (width, rows):
        return arr.T.copy()
    raise GridError(f"{name}: dimension mismatch, got {arr.shape}, expected ({rows}, {width})")


def grid_from_dict(obj: dict, index_base: int = 0, sentinel: int = NO_NEIGHBOR) -> TriGrid:
    """Build and validate a TriGrid from a parsed Grid JSON object."""
    if index_base not in (0, 1):
        raise GridError(f"index base must be 0 or 1, got {index_base}")
    if not isinstance(obj, dict):
        raise GridError("grid file must contain a JSON object")
    try:
        nc, ne, nv = (int(obj[k]) for k in ("n_cells", "n_edges", "n_vertices"))
        raw_nbr = obj["neighbor_cell_index"]
        raw_eoc = obj["edge_of_cell"]
        raw_ev = obj["edge_vertices"]
    except KeyError as exc:
        raise GridError(f"missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise GridError(f"bad size field: {exc}") from None

    nbr = _as_table(raw_nbr, "neighbor_cell_index", nc, 3)
    eoc = _as_table(raw_eoc, "edge_of_cell", nc, 3)
    ev = _as_table(raw_ev, "edge_vertices", ne, 2)
    missing = nbr == sentinel
    nbr = np.where(missing, NO_NEIGHBOR, nbr - index_base)
    eoc = eoc - index_base
    ev = ev - index_base

    lon = lat = None
    if ("cell_lon" in obj) != ("cell_lat" in obj):
        raise GridError("cell_lon and cell_lat must be given together")
    if "cell_lon" in obj:
        lon = np.asarray(obj["cell_lon"], dtype=np.float64)
        lat = np.asarray(obj["cell_lat"], dtype=np.float64)
        if lon.shape != (nc,) or lat.shape != (nc,):
            raise GridError(f"cell_lon/cell_lat must have length {nc}")

    grid = TriGrid(nbr, eoc, ev, nv, lon, lat)
    report = validate_grid(grid)
    if not report.ok:
        raise GridError(f"invalid grid: {report.findings[0]}")
    return grid


def load_grid(source, index_base: int = 0, sentinel: int = NO_NEIGHBOR) -> TriGrid:
    """Read a Grid JSON file.

    Parameters
    ----------
    source : path or text file object
    index_base : {0, 1}
        Base of all ids in the file; ICON grids are 1-based.
    sentinel : int
        Value marking a missing neighbor in the file (ICON uses -9999).
    """
    try:
        if hasattr(source, "read"):
            obj = json.load(source)
        else:
            with open(source) as fh:
                obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise GridError(f"malformed grid file: {exc}") from None
    return grid_from_dict(obj, index_base=index_base, sentinel=sentinel)


def grid_to_dict(grid: TriGrid) -> dict:
    obj = {
        "n_cells": grid.n_cells,
        "n_edges": grid.n_edges,
        "n_vertices": grid.n_vertices,
        "neighbor_cell_index": grid.neighbor_cell_index.tolist(),
        "edge_of_cell": grid.edge_of_cell.tolist(),
        "edge_vertices": grid.edge_vertices.tolist(),
    }
    if grid.has_coordinates:
        obj["cell_lon"] = grid.cell_lon.tolist()
        obj["cell_lat"] = grid.cell_lat.tolist()
    return obj


def save_grid(grid: TriGrid, sink) -> None:
    """Write ``grid`` as canonical Grid JSON (0-based, -1 for no neighbor)."""
    obj = grid_to_dict(grid)
    if hasattr(sink, "write"):
        json.dump(obj, sink)
    else:
        Path(sink).write_text(json.dumps(obj))


# ----------------------------------------------------------------------------
# synthetic patches


def hex_patch_size(r: int) -> int:
    """Number of cells within ``r`` dual-graph steps of a triangle."""
    return 1 + 3 * r * (r + 1) // 2


def _corners(pos: np.ndarray) -> np.ndarray:
    # corner k of a cell sits opposite the edge lying on family-k lines
    eye = np.eye(3, dtype=np.int64)
    up = (pos.sum(axis=1) == 0)[:, None, None]
    return np.where(up, pos[:, None, :] - eye[None], pos[:, None, :] - 1 + eye[None])


def generate_hex_patch(r: int, seed: int | None = None, spacing_deg: float | None = None) -> TriGrid:
    """Patch of the regular triangle tiling within ``r`` steps of a base triangle.

    Cell 0 is the base triangle. Triangles are enumerated through lattice
    positions ``t`` with integer entries summing to 0 or 1, the dual-graph
    distance to the base being the L1 norm of ``t``; corners of a triangle
    are integer triples summing to -1. Only the resulting topology is kept.

    With ``seed`` set, the ids of all non-base cells, all edges and all
    vertices are randomly permuted.
    """
    if r < 0:
        raise ValueError(f"radius must be >= 0, got {r}")
    span = np.arange(-r, r + 1)
    x, y = np.meshgrid(span, span, indexing="ij")
    x, y = x.ravel(), y.ravel()
    pos = []
    for s in (0, 1):
        z = s - x - y
        keep = np.abs(x) + np.abs(y) + np.abs(z) <= r
        pos.append(np.stack([x[keep], y[keep], z[keep]], axis=1))
    pos = np.concatenate(pos)
    dist = np.abs(pos).sum(axis=1)
    pos = pos[np.lexsort((pos[:, 2], pos[:, 1], pos[:, 0], dist))]
    nc = pos.shape[0]

    corners = _corners(pos)
    width = 2 * r + 4
    vkey = (corners[..., 0] + r + 2) * width + (corners[..., 1] + r + 2)
    ukeys, vid = np.unique(vkey.ravel(), return_inverse=True)
    vid = vid.reshape(nc, 3)
    nv = ukeys.size

    rng = np.random.default_rng(seed) if seed is not None else None
    if rng is not None:
        vid = rng.permutation(nv)[vid]

    ends = np.stack([
        np.stack([vid[:, 1], vid[:, 2]], axis=-1),
        np.stack([vid[:, 2], vid[:, 0]], axis=-1),
        np.stack([vid[:, 0], vid[:, 1]], axis=-1),
    ], axis=1)
    ends = np.sort(ends, axis=-1)
    ekey = ends[..., 0] * nv + ends[..., 1]
    ukeys, eid = np.unique(ekey.ravel(), return_inverse=True)
    eid = eid.reshape(nc, 3)
    ne = ukeys.size
    edge_vertices = np.stack([ukeys // nv, ukeys % nv], axis=1)
    if rng is not None:
        perm = rng.permutation(ne)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(ne)
        eid = perm[eid]
        edge_vertices = edge_vertices[inv]

    if rng is not None and nc > 1:
        cperm = np.concatenate([[0], 1 + rng.permutation(nc - 1)])
        inv = np.empty_like(cperm)
        inv[cperm] = np.arange(nc)
        eid = eid[inv]
        pos = pos[inv]

    edge_cells = np.full((ne, 2), NO_NEIGHBOR, dtype=np.int64)
    flat = eid.ravel()
    cells = np.repeat(np.arange(nc), 3)
    order = np.lexsort((cells, flat))
    flat, cells = flat[order], cells[order]
    first = np.ones(flat.size, dtype=bool)
    first[1:] = flat[1:] != flat[:-1]
    edge_cells[flat[first], 0] = cells[first]
    later = ~first
    edge_cells[flat[later], 1] = cells[later]
    a, b = edge_cells[eid, 0], edge_cells[eid, 1]
    own = np.arange(nc)[:, None]
    nbr = np.where(a == own, b, a)

    if spacing_deg is None:
        spacing_deg = min(0.1, 40.0 / (r + 1))
    # lattice directions at 120 degrees; corner steps have length sqrt(3)
    dirs = np.array([[1.0, 0.0], [-0.5, np.sqrt(3) / 2], [-0.5, -np.sqrt(3) / 2]])
    centre = _corners(pos).mean(axis=1) @ dirs
    centre = (centre - centre[0]) * spacing_deg / np.sqrt(3)
    return TriGrid(nbr, eid, edge_vertices, nv, centre[:, 0], centre[:, 1])
