"""Compiled union-find kernels for lattice labeling."""
import numpy as np
from numba import njit

# Forward halves of the 6- and 26-neighborhoods. Probing only these from every
# point visits each neighboring pair once; union is symmetric so nothing is lost.
FACE_OFFSETS = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=np.int64)
FULL_OFFSETS = np.array(
    [
        (dx, dy, dz)
        for dx in (-1, 0, 1)
        for dy in (-1, 0, 1)
        for dz in (-1, 0, 1)
        if (dx, dy, dz) > (0, 0, 0)
    ],
    dtype=np.int64,
)

_EMPTY = -1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def _union(parent, size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]


@njit(cache=True)
def union_pairs(n, a, b):
    """Roots of ``n`` items after merging every pair ``(a[i], b[i])``."""
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    for i in range(a.shape[0]):
        _union(parent, size, a[i], b[i])
    roots = np.empty(n, dtype=np.int64)
    for i in range(n):
        roots[i] = _find(parent, i)
    return roots


@njit(cache=True)
def _slot(key, mask):
    h = np.uint64(key) * _GOLDEN
    return np.int64((h >> np.uint64(29)) ^ h) & mask


@njit(cache=True)
def sparse_label(points, offsets):
    """Union-find labels of occupied lattice points.

    ``points`` are (m, 3) non-negative triples. Neighbors are looked up in an
    open-addressing hash table keyed by the linear index inside a bounding
    box padded by one on every side.
    """
    m = points.shape[0]
    roots = np.empty(m, dtype=np.int64)
    if m == 0:
        return roots
    ny = np.int64(0)
    nz = np.int64(0)
    for i in range(m):
        ny = max(ny, points[i, 1])
        nz = max(nz, points[i, 2])
    ny += 3
    nz += 3

    cap = 1
    while cap < 2 * m:
        cap *= 2
    mask = np.int64(cap - 1)
    table_key = np.full(cap, _EMPTY, dtype=np.int64)
    table_val = np.empty(cap, dtype=np.int64)
    keys = np.empty(m, dtype=np.int64)
    for i in range(m):
        k = ((points[i, 0] + 1) * ny + points[i, 1] + 1) * nz + points[i, 2] + 1
        keys[i] = k
        s = _slot(k, mask)
        while table_key[s] != _EMPTY:
            s = (s + 1) & mask
        table_key[s] = k
        table_val[s] = i

    parent = np.arange(m)
    size = np.ones(m, dtype=np.int64)
    deltas = np.empty(offsets.shape[0], dtype=np.int64)
    for j in range(offsets.shape[0]):
        deltas[j] = (offsets[j, 0] * ny + offsets[j, 1]) * nz + offsets[j, 2]
    for i in range(m):
        for j in range(deltas.shape[0]):
            k = keys[i] + deltas[j]
            s = _slot(k, mask)
            while table_key[s] != _EMPTY:
                if table_key[s] == k:
                    _union(parent, size, i, table_val[s])
                    break
                s = (s + 1) & mask
    for i in range(m):
        roots[i] = _find(parent, i)
    return roots


@njit(cache=True)
def dense_label(volume, backward):
    """Two-pass raster labeling of a 0/1 volume.

    ``backward`` holds the neighbor offsets that precede a voxel in C order.
    Returns an int64 array of provisional-label roots (0 for background).
    """
    nx, ny, nz = volume.shape
    labels = np.zeros((nx, ny, nz), dtype=np.int64)
    parent = np.zeros(16, dtype=np.int64)
    size = np.zeros(16, dtype=np.int64)
    next_label = 1
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                if volume[x, y, z] == 0:
                    continue
                current = 0
                for j in range(backward.shape[0]):
                    px = x + backward[j, 0]
                    py = y + backward[j, 1]
                    pz = z + backward[j, 2]
                    if px < 0 or py < 0 or pz < 0 or py >= ny or pz >= nz:
                        continue
                    lab = labels[px, py, pz]
                    if lab == 0:
                        continue
                    if current == 0:
                        current = lab
                    else:
                        _union(parent, size, current, lab)
                if current == 0:
                    if next_label >= parent.shape[0]:
                        grown = np.zeros(2 * parent.shape[0], dtype=np.int64)
                        grown[: parent.shape[0]] = parent
                        parent = grown
                        grown = np.zeros(2 * size.shape[0], dtype=np.int64)
                        grown[: size.shape[0]] = size
                        size = grown
                    parent[next_label] = next_label
                    size[next_label] = 1
                    current = next_label
                    next_label += 1
                labels[x, y, z] = current
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                if labels[x, y, z] != 0:
                    labels[x, y, z] = _find(parent, labels[x, y, z])
    return labels
