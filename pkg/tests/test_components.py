import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import (
    brute_components,
    brute_edge_sharing,
    brute_vertex_sharing,
    dual_distances,
    single_triangle,
)
from tricubo.components import (
    ComponentSet,
    Connectivity,
    bfs_oracle_2d,
    bfs_oracle_3d,
    build_full_graph,
    is_refinement,
    label_2d,
    label_3d,
    load_components,
    save_components,
)
from tricubo.cubulation import compute_cubulation
from tricubo.fields import BinaryField, FieldError, MultiLevelBinaryField, random_mask, to_cubic
from tricubo.grid import generate_hex_patch

MODES = [Connectivity.VERTEX, Connectivity.EDGE]


@pytest.fixture(scope="module")
def setups():
    cache = {}

    def get(r, seed=None):
        if (r, seed) not in cache:
            grid = generate_hex_patch(r, seed=seed)
            cache[r, seed] = grid, compute_cubulation(grid, 0)
        return cache[r, seed]

    return get


def _mask(n, cells):
    m = np.zeros(n, dtype=np.uint8)
    m[list(cells)] = 1
    return BinaryField(m)


def _levels(nlev, n, cells):
    m = np.zeros((nlev, n), dtype=np.uint8)
    for k, c in cells:
        m[k, c] = 1
    return MultiLevelBinaryField(m)


# --- ComponentSet -------------------------------------------------------------


def test_canonical_order_by_size_then_smallest_member():
    comps = ComponentSet.from_labels([1, 2, 3, 5, 8, 9], [7, 7, 4, 4, 0, 9])
    assert comps.components == [[1, 2], [3, 5], [8], [9]]
    assert comps.sizes.tolist() == [2, 2, 1, 1]
    assert comps.n_active == 6


def test_partition_ignores_label_values():
    a = ComponentSet.from_labels([0, 1, 2], [5, 5, 1])
    b = ComponentSet.from_labels([0, 1, 2], [0, 0, 9])
    assert a == b and a.same_partition(b)
    assert a.as_sets() == {frozenset({0, 1}), frozenset({2})}


def test_three_d_members_are_level_cell_pairs():
    comps = ComponentSet.from_labels([3, 13, 4], [0, 0, 1], n_cells=10)
    assert comps.is_3d
    assert comps.components == [[(0, 3), (1, 3)], [(0, 4)]]
    assert comps[0].tolist() == [[0, 3], [1, 3]]
    with pytest.raises(IndexError):
        comps[2]


def test_is_refinement():
    fine = ComponentSet.from_labels([0, 1, 2, 3], [0, 1, 2, 2])
    coarse = ComponentSet.from_labels([0, 1, 2, 3], [0, 0, 2, 2])
    assert is_refinement(fine, coarse)
    assert not is_refinement(coarse, fine)
    other = ComponentSet.from_labels([0, 1, 2, 4], [0, 0, 0, 0])
    assert not is_refinement(fine, other)


# --- label_2d -----------------------------------------------------------------


@pytest.mark.parametrize("engine", ["sparse", "dense"])
def test_empty_mask_has_no_components(engine, setups):
    grid, cub = setups(3)
    comps = label_2d(to_cubic(_mask(grid.n_cells, []), cub), engine=engine)
    assert len(comps) == 0 and comps.n_active == 0


@pytest.mark.parametrize("engine", ["sparse", "dense"])
def test_vertex_only_contact(engine, setups):
    grid, cub = setups(1)
    a, b = 1, 2
    assert b in brute_vertex_sharing(grid)[a] and b not in brute_edge_sharing(grid)[a]
    cubic = to_cubic(_mask(grid.n_cells, [a, b]), cub)
    assert len(label_2d(cubic, "vertex", engine)) == 1
    assert len(label_2d(cubic, "edge", engine)) == 2


@pytest.mark.parametrize("conn", MODES)
@pytest.mark.parametrize("engine", ["sparse", "dense"])
def test_full_patch_is_one_component(conn, engine, setups):
    grid, cub = setups(5, 1)
    comps = label_2d(to_cubic(_mask(grid.n_cells, range(grid.n_cells)), cub), conn, engine)
    assert len(comps) == 1 and comps.sizes[0] == grid.n_cells


def test_single_cell():
    grid = single_triangle()
    cub = compute_cubulation(grid, 0)
    for conn in MODES:
        assert label_2d(to_cubic(_mask(1, [0]), cub), conn).components == [[0]]
        assert bfs_oracle_2d(grid, _mask(1, [0]), conn).components == [[0]]


def _independent_set(grid):
    sharing = brute_vertex_sharing(grid)
    chosen, blocked = [], set()
    for c in range(grid.n_cells):
        if c not in blocked:
            chosen.append(c)
            blocked |= sharing[c] | {c}
    return chosen


@pytest.mark.parametrize("conn", MODES)
def test_checkerboard_gives_singletons(conn, setups):
    grid, cub = setups(6, 3)
    cells = _independent_set(grid)
    mask = _mask(grid.n_cells, cells)
    expected = {frozenset([c]) for c in cells}
    assert bfs_oracle_2d(grid, mask, conn).as_sets() == expected
    assert label_2d(to_cubic(mask, cub), conn).as_sets() == expected


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("conn", MODES)
def test_oracle_matches_brute_force(seed, conn, setups):
    grid, _ = setups(5, seed)
    mask = random_mask(grid.n_cells, 0.45, seed)
    pairs = brute_vertex_sharing(grid) if conn is Connectivity.VERTEX else brute_edge_sharing(grid)
    expected = brute_components(mask.active.tolist(), lambda c: pairs[c])
    assert bfs_oracle_2d(grid, mask, conn).as_sets() == expected


@pytest.mark.parametrize("seed", range(100))
def test_lattice_labeling_matches_oracle_r10(seed, setups):
    grid, cub = setups(10, 5)
    mask = random_mask(grid.n_cells, 0.3, seed)
    cubic = to_cubic(mask, cub)
    got = {}
    for conn in MODES:
        got[conn] = label_2d(cubic, conn)
        assert got[conn] == bfs_oracle_2d(grid, mask, conn)
        assert label_2d(cubic, conn, engine="dense") == got[conn]
    assert is_refinement(got[Connectivity.EDGE], got[Connectivity.VERTEX])


def test_off_centre_start_gives_same_partition(setups):
    grid, cub = setups(8, 2)
    other = compute_cubulation(grid, grid.n_cells - 1)
    mask = random_mask(grid.n_cells, 0.35, 11)
    for conn in MODES:
        assert label_2d(to_cubic(mask, cub), conn) == label_2d(to_cubic(mask, other), conn)


def test_dense_cap_error(setups):
    grid, cub = setups(5)
    cubic = to_cubic(_mask(grid.n_cells, range(grid.n_cells)), cub)
    with pytest.raises(FieldError, match="exceeds cap"):
        label_2d(cubic, engine="dense", dense_cap=8)


def test_unknown_engine(setups):
    grid, cub = setups(1)
    with pytest.raises(ValueError):
        label_2d(to_cubic(_mask(4, [0]), cub), engine="gpu")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.booleans(), min_size=64, max_size=64))
def test_partition_properties(bits):
    grid = generate_hex_patch(6, seed=4)
    cub = compute_cubulation(grid, 0)
    mask = BinaryField(np.array(bits, dtype=np.uint8))
    cubic = to_cubic(mask, cub)
    v, e = label_2d(cubic, "vertex"), label_2d(cubic, "edge")
    for comps in (v, e):
        # partition of the active cells
        keys, _ = comps.labeled()
        assert keys.tolist() == mask.active.tolist()
        assert sum(comps.sizes) == mask.active.size
        # canonical order
        order = [(-len(c), min(c)) for c in comps.components]
        assert order == sorted(order)
    assert is_refinement(e, v)
    assert len(v) <= len(e)


# --- label_3d -----------------------------------------------------------------


@pytest.mark.parametrize("conn", MODES)
def test_vertical_column(conn, setups):
    grid, cub = setups(3)
    levels = _levels(6, grid.n_cells, [(k, 7) for k in range(6)])
    comps = label_3d(levels, cub, conn)
    assert comps.components == [[(k, 7) for k in range(6)]]
    assert bfs_oracle_3d(grid, levels, conn) == comps


def _two_blobs(grid):
    # two edge-connected blobs on level 0 that share no vertex
    dist = dual_distances(grid, 0)
    a = [0] + sorted(grid.neighbors(0))
    far = min(c for c, d in dist.items() if d == 7 and len(grid.neighbors(c)) == 3)
    b = [far] + sorted(grid.neighbors(far))
    sharing = brute_vertex_sharing(grid)
    assert not set(b) & set(a).union(*(sharing[c] for c in a))
    return a, b


@pytest.mark.parametrize("conn", MODES)
def test_blobs_joined_only_through_overlap(conn, setups):
    grid, cub = setups(8)
    a, b = _two_blobs(grid)
    base = [(0, c) for c in a + b]
    assert len(label_3d(_levels(1, grid.n_cells, base), cub, conn)) == 2

    path = _path_between(grid, a[0], b[0])
    joined = _levels(2, grid.n_cells, base + [(1, c) for c in path])
    assert len(label_3d(joined, cub, conn)) == 1
    assert bfs_oracle_3d(grid, joined, conn) == label_3d(joined, cub, conn)

    # same level-1 blob shifted off both footprints
    off = [c for c in path if c not in set(a + b)]
    split = _levels(2, grid.n_cells, base + [(1, c) for c in off])
    assert len(label_3d(split, cub, conn)) == 3
    assert bfs_oracle_3d(grid, split, conn) == label_3d(split, cub, conn)


def _path_between(grid, s, t):
    prev = {s: None}
    frontier = [s]
    while t not in prev:
        nxt = []
        for c in frontier:
            for d in grid.neighbors(c):
                if d not in prev:
                    prev[d] = c
                    nxt.append(d)
        frontier = nxt
    out = [t]
    while prev[out[-1]] is not None:
        out.append(prev[out[-1]])
    return out


def test_single_level_equals_2d(setups):
    grid, cub = setups(7, 1)
    mask = random_mask(grid.n_cells, 0.3, 5)
    levels = MultiLevelBinaryField(mask.mask[None, :])
    for conn in MODES:
        flat = bfs_oracle_2d(grid, mask, conn)
        deep = bfs_oracle_3d(grid, levels, conn)
        assert [[c for _, c in comp] for comp in deep.components] == flat.components
        assert label_3d(levels, cub, conn) == deep


@pytest.mark.parametrize("seed", range(20))
def test_label_3d_matches_oracle(seed, setups):
    grid, cub = setups(8, 6)
    levels = random_mask(grid.n_cells, 0.3, seed, nlev=4)
    for conn in MODES:
        assert label_3d(levels, cub, conn) == bfs_oracle_3d(grid, levels, conn)
    assert label_3d(levels, cub, "vertex", engine="dense") == label_3d(levels, cub, "vertex")


# --- full graph ---------------------------------------------------------------


def test_full_graph_edge_degrees():
    graph = build_full_graph(generate_hex_patch(1), "edge")
    assert graph.degree().tolist() == [3, 1, 1, 1]


def test_full_graph_vertex_dominates_edge(patches):
    grid = patches(4, 2)
    v, e = build_full_graph(grid, "vertex"), build_full_graph(grid, "edge")
    assert (v.degree() >= e.degree()).all()
    for c in range(grid.n_cells):
        assert set(v.neighbors(c).tolist()) == brute_vertex_sharing(grid)[c]
        assert set(e.neighbors(c).tolist()) == brute_edge_sharing(grid)[c]


def test_full_graph_single_triangle():
    for conn in MODES:
        graph = build_full_graph(single_triangle(), conn)
        assert graph.n_nodes == 1 and graph.n_links == 0


def test_oracle_with_prebuilt_graph(setups):
    grid, _ = setups(6, 1)
    mask = random_mask(grid.n_cells, 0.4, 0)
    for conn in MODES:
        graph = build_full_graph(grid, conn)
        assert bfs_oracle_2d(grid, mask, conn, graph=graph) == bfs_oracle_2d(grid, mask, conn)
    with pytest.raises(ValueError):
        bfs_oracle_2d(grid, mask, "edge", graph=build_full_graph(grid, "vertex"))


# --- files --------------------------------------------------------------------


def test_components_round_trip_2d(setups):
    grid, cub = setups(5)
    comps = label_2d(to_cubic(random_mask(grid.n_cells, 0.3, 1), cub), "edge")
    buf = io.StringIO()
    save_components(comps, buf, "edge")
    text = buf.getvalue()
    assert text.startswith("cell,label\n")
    assert text.rstrip().endswith(f"# components={len(comps)} active={comps.n_active} connectivity=edge")
    assert load_components(io.StringIO(text)) == comps


def test_components_round_trip_3d(tmp_path, setups):
    grid, cub = setups(5)
    comps = label_3d(random_mask(grid.n_cells, 0.3, 2, nlev=3), cub)
    path = tmp_path / "c.csv"
    save_components(comps, path)
    assert path.read_text().startswith("level,cell,label\n")
    assert load_components(path, n_cells=grid.n_cells) == comps
    with pytest.raises(ValueError):
        load_components(path)
