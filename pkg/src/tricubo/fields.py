"""Per-cell data: loading, thresholding and embedding into the cubic lattice."""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cubulation import Cubulation
from .grid import TriGrid

DEFAULT_DENSE_CAP = 1 << 25


class FieldError(ValueError):
    pass


class UncoveredCellError(FieldError):
    """An active cell lies outside the cubulation (radius too small)."""

    def __init__(self, cell: int, level: int | None = None):
        self.cell = cell
        self.level = level
        where = f"cell {cell}" if level is None else f"cell {cell} on level {level}"
        super().__init__(f"uncovered active cell: {where} has no cubulation coordinate")


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Field2D:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, np.float64))
        if self.values.ndim != 1:
            raise FieldError(f"single-level field must be 1-d, got shape {self.values.shape}")

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class MultiLevelField:
    """Values of shape (nlev, n_cells); levels are ordered, adjacency is |k - k'| = 1."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, np.float64))
        if self.values.ndim != 2:
            raise FieldError(f"multi-level field must be 2-d, got shape {self.values.shape}")

    @property
    def nlev(self) -> int:
        return self.values.shape[0]

    @property
    def n_cells(self) -> int:
        return self.values.shape[1]

    def level(self, k: int) -> Field2D:
        return Field2D(self.values[k])


@dataclass(frozen=True, eq=False)
class BinaryField:
    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mask", _frozen(self.mask, np.uint8))
        if self.mask.ndim != 1:
            raise FieldError(f"binary field must be 1-d, got shape {self.mask.shape}")
        if self.mask.size and self.mask.max() > 1:
            raise FieldError("binary field values must be 0 or 1")

    @property
    def n_cells(self) -> int:
        return self.mask.shape[0]

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


@dataclass(frozen=True, eq=False)
class MultiLevelBinaryField:
    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mask", _frozen(self.mask, np.uint8))
        if self.mask.ndim != 2:
            raise FieldError(f"multi-level binary field must be 2-d, got shape {self.mask.shape}")
        if self.mask.size and self.mask.max() > 1:
            raise FieldError("binary field values must be 0 or 1")

    @property
    def nlev(self) -> int:
        return self.mask.shape[0]

    @property
    def n_cells(self) -> int:
        return self.mask.shape[1]

    def level(self, k: int) -> BinaryField:
        return BinaryField(self.mask[k])


def threshold_field(field, threshold: float):
    """Mask of cells whose value is equal to or larger than ``threshold``."""
    values = field.values
    if not np.isfinite(values).all():
        bad = np.argwhere(~np.isfinite(values))[0].tolist()
        raise FieldError(f"non-finite value at index {bad}")
    mask = (values >= threshold).astype(np.uint8)
    if isinstance(field, MultiLevelField):
        return MultiLevelBinaryField(mask)
    return BinaryField(mask)


def random_mask(n_cells: int, p: float = 0.3, seed=None, nlev: int | None = None):
    """Seeded synthetic mask: each cell (per level) active with probability ``p``.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if nlev is None:
        return BinaryField(rng.random(n_cells) < p)
    return MultiLevelBinaryField(rng.random((nlev, n_cells)) < p)


# ----------------------------------------------------------------------------
# cubic lattice


@dataclass(frozen=True, eq=False)
class CubicField:
    """Occupied lattice points of a thresholded single-level field.

    Attributes
    ----------
    occupied : (m, 3) int array
        Lattice triples, one row per active cell, ordered by ``origin``.
    origin : (m,) int array
        Originating cell id of every row, ascending.
    """

    occupied: np.ndarray
    origin: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "occupied", _frozen(self.occupied, np.int64).reshape(-1, 3))
        object.__setattr__(self, "origin", _frozen(self.origin, np.int64))

    def __len__(self) -> int:
        return self.origin.shape[0]

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Componentwise (min, max) of the occupied triples, None when empty."""
        if not len(self):
            return None
        return self.occupied.min(axis=0), self.occupied.max(axis=0)

    def origin_map(self) -> dict[tuple[int, int, int], int]:
        return {tuple(p): int(c) for p, c in zip(self.occupied.tolist(), self.origin.tolist())}

    def dense(self, cap: int = DEFAULT_DENSE_CAP) -> tuple[np.ndarray, np.ndarray]:
        """Bounding-box array with 1 at occupied points, and its lower corner.

        Raises FieldError when the box holds more than ``cap`` points.
        """
        if not len(self):
            return np.zeros((0, 0, 0), dtype=np.uint8), np.zeros(3, dtype=np.int64)
        lo, hi = self.bounds
        shape = tuple(int(s) for s in hi - lo + 1)
        volume = shape[0] * shape[1] * shape[2]
        if volume > cap:
            raise FieldError(f"dense volume {volume} exceeds cap {cap}; use the sparse engine")
        arr = np.zeros(shape, dtype=np.uint8)
        rel = self.occupied - lo
        arr[rel[:, 0], rel[:, 1], rel[:, 2]] = 1
        return arr, lo


def to_cubic(binary: BinaryField, cub: Cubulation, level: int | None = None) -> CubicField:
    """Move the active cells of ``binary`` onto their lattice points."""
    if binary.n_cells != cub.n_cells:
        raise FieldError(f"field has {binary.n_cells} cells, cubulation {cub.n_cells}")
    active = binary.active
    covered = cub.reached[active]
    if not covered.all():
        raise UncoveredCellError(int(active[np.argmin(covered)]), level)
    return CubicField(cub.coords[active], active)


def to_cubic_levels(levels: MultiLevelBinaryField, cub: Cubulation) -> list[CubicField]:
    return [to_cubic(levels.level(k), cub, level=k) for k in range(levels.nlev)]


# ----------------------------------------------------------------------------
# field files


def _read_table(source) -> tuple[list[str], np.ndarray]:
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    lines = text.splitlines()
    if not lines:
        raise FieldError("empty field file")
    header = [h.strip() for h in lines[0].split(",")]
    body = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("#")]
    if not body:
        return header, np.zeros((0, len(header)))
    try:
        table = np.loadtxt(io.StringIO("\n".join(body)), delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FieldError(f"malformed field file: {exc}") from None
    if table.shape[1] != len(header):
        raise FieldError(f"expected {len(header)} columns, got {table.shape[1]}")
    return header, table


def _ids(column: np.ndarray, name: str, upper: int) -> np.ndarray:
    if not np.all(np.isfinite(column)) or not np.all(column == np.round(column)):
        raise FieldError(f"{name} ids must be integers")
    ids = column.astype(np.int64)
    bad = (ids < 0) | (ids >= upper)
    if bad.any():
        raise FieldError(f"{name} id {ids[np.argmax(bad)]} out of range [0, {upper})")
    return ids


def load_field(source, grid: TriGrid, nlev: int | None = None):
    """Read a ``cell,value`` or ``level,cell,value`` CSV file.

    Cells (or level/cell pairs) not listed default to 0. For multi-level
    files the level count is ``nlev`` if given, else one more than the
    largest level listed.
    """
    header, table = _read_table(source)
    nc = grid.n_cells
    if header == ["cell", "value"]:
        cells = _ids(table[:, 0], "cell", nc)
        if np.unique(cells).size != cells.size:
            raise FieldError("duplicate cell entry")
        values = np.zeros(nc)
        values[cells] = table[:, 1]
        field = Field2D(values)
    elif header == ["level", "cell", "value"]:
        top = nlev if nlev is not None else (int(table[:, 0].max()) + 1 if table.size else 1)
        levels = _ids(table[:, 0], "level", top)
        cells = _ids(table[:, 1], "cell", nc)
        keys = levels * nc + cells
        if np.unique(keys).size != keys.size:
            raise FieldError("duplicate (level, cell) entry")
        values = np.zeros((top, nc))
        values[levels, cells] = table[:, 2]
        field = MultiLevelField(values)
    else:
        raise FieldError(f"unknown field header {','.join(header)!r}")
    if not np.isfinite(field.values).all():
        raise FieldError("field contains non-finite values")
    return field


def save_field(field, sink, skip_zeros: bool = False) -> None:
    """Write a field file; ``skip_zeros`` drops zero entries (they load as 0)."""
    out = io.StringIO()
    if isinstance(field, MultiLevelField):
        out.write("level,cell,value\n")
        lev, cell = np.nonzero(field.values) if skip_zeros else np.indices(field.values.shape).reshape(2, -1)
        for k, c, v in zip(lev.tolist(), cell.tolist(), field.values[lev, cell].tolist()):
            out.write(f"{k},{c},{v!r}\n")
    else:
        out.write("cell,value\n")
        cells = np.flatnonzero(field.values) if skip_zeros else np.arange(field.n_cells)
        for c, v in zip(cells.tolist(), field.values[cells].tolist()):
            out.write(f"{c},{v!r}\n")
    if hasattr(sink, "write"):
        sink.write(out.getvalue())
    else:
        Path(sink).write_text(out.getvalue())
