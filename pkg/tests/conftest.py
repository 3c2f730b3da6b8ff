import itertools

import numpy as np
import pytest

from tricubo.grid import NO_NEIGHBOR, TriGrid, generate_hex_patch


@pytest.fixture(scope="session")
def patches():
    cache = {}

    def get(r, seed=None):
        if (r, seed) not in cache:
            cache[r, seed] = generate_hex_patch(r, seed=seed)
        return cache[r, seed]

    return get


def cell_vertex_sets(grid):
    """Vertex sets per cell, straight from edge_vertices."""
    ev = grid.edge_vertices.tolist()
    return [frozenset(v for e in edges for v in ev[e]) for edges in grid.edge_of_cell.tolist()]


def brute_vertex_sharing(grid):
    verts = cell_vertex_sets(grid)
    out = {c: set() for c in range(grid.n_cells)}
    for a, b in itertools.combinations(range(grid.n_cells), 2):
        if verts[a] & verts[b]:
            out[a].add(b)
            out[b].add(a)
    return out


def brute_edge_sharing(grid):
    edges = [set(e) for e in grid.edge_of_cell.tolist()]
    out = {c: set() for c in range(grid.n_cells)}
    for a, b in itertools.combinations(range(grid.n_cells), 2):
        if edges[a] & edges[b]:
            out[a].add(b)
            out[b].add(a)
    return out


def brute_components(active, adjacency):
    """Partition of ``active`` by repeated union of adjacent members, as sets."""
    label = {c: c for c in active}

    def root(x):
        while label[x] != x:
            x = label[x]
        return x

    for a in active:
        for b in adjacency(a):
            if b in label:
                ra, rb = root(a), root(b)
                if ra != rb:
                    label[max(ra, rb)] = min(ra, rb)
    groups = {}
    for c in active:
        groups.setdefault(root(c), set()).add(c)
    return {frozenset(g) for g in groups.values()}


def dual_distances(grid, start):
    """Breadth-first dual-graph distance from ``start`` to every reachable cell."""
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for c in frontier:
            for d in grid.neighbor_cell_index[c].tolist():
                if d != NO_NEIGHBOR and d not in dist:
                    dist[d] = dist[c] + 1
                    nxt.append(d)
        frontier = nxt
    return dist


def subgrid(grid, keep):
    """Grid restricted to the cells in ``keep``, with ids renumbered."""
    keep = np.asarray(sorted(set(int(c) for c in keep)))
    cmap = np.full(grid.n_cells, NO_NEIGHBOR)
    cmap[keep] = np.arange(keep.size)
    edges = np.unique(grid.edge_of_cell[keep])
    emap = np.full(grid.n_edges, -1)
    emap[edges] = np.arange(edges.size)
    verts = np.unique(grid.edge_vertices[edges])
    vmap = np.full(grid.n_vertices, -1)
    vmap[verts] = np.arange(verts.size)
    nbr = grid.neighbor_cell_index[keep]
    nbr = np.where(nbr == NO_NEIGHBOR, NO_NEIGHBOR, cmap[np.where(nbr == NO_NEIGHBOR, 0, nbr)])
    lon = grid.cell_lon[keep] if grid.cell_lon is not None else None
    lat = grid.cell_lat[keep] if grid.cell_lat is not None else None
    return TriGrid(nbr, emap[grid.edge_of_cell[keep]], vmap[grid.edge_vertices[edges]], verts.size, lon, lat)


def fan_grid(n):
    """``n`` triangles around one central vertex (vertex 0)."""
    rim = list(range(1, n + 1))
    spokes = [(0, v) for v in rim]                       # edge i: 0 - rim[i]
    ring = [(rim[i], rim[(i + 1) % n]) for i in range(n)]  # edge n+i: rim[i] - rim[i+1]
    edge_vertices = spokes + ring
    edge_of_cell = [[i, (i + 1) % n, n + i] for i in range(n)]
    nbr = [[(i - 1) % n, (i + 1) % n, NO_NEIGHBOR] for i in range(n)]
    return TriGrid(nbr, edge_of_cell, edge_vertices, n + 1)


def single_triangle():
    return TriGrid([[NO_NEIGHBOR] * 3], [[0, 1, 2]], [[0, 1], [1, 2], [2, 0]], 3)
