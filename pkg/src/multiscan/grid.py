"""Dense lattice grids, rectangles and prefix-sum tables.

Rectangles use 1-based inclusive index ranges per axis, matching the lattice
points ``(i_1/m_1, ..., i_d/m_d)`` with ``1 <= i_k <= m_k``. Internally all
arrays are ordinary 0-based numpy arrays.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numba as nb
import numpy as np

BINARY_MAGIC = b"MSGD"
COMPENSATED_MIN_AXIS = 512


class InvalidRectangle(ValueError):
    pass


def _check_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(m) for m in dims)
    if len(dims) < 1:
        raise ValueError("grid must have at least one axis")
    if any(m < 1 for m in dims):
        raise ValueError(f"every axis length must be >= 1, got {dims}")
    return dims


@dataclass(frozen=True, eq=False)
class GridField:
    """Observations on a d-dimensional lattice.

    ``values[i_1 - 1, ..., i_d - 1]`` holds ``Y(i_1/m_1, ..., i_d/m_d)``.
    The array is copied and made read-only.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim < 1 or arr.size == 0:
            raise ValueError("grid must have at least one axis and one value")
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, dims: Sequence[int]) -> "GridField":
        return cls(np.zeros(_check_dims(dims)))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    def __neg__(self) -> "GridField":
        return GridField(-self.values)

    def __add__(self, other: "GridField") -> "GridField":
        if self.dims != other.dims:
            raise ValueError(f"dimension mismatch {self.dims} vs {other.dims}")
        return GridField(self.values + other.values)

    def __eq__(self, other):
        if not isinstance(other, GridField):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class Rect:
    """Axis-aligned lattice rectangle, inclusive 1-based ``lo..hi`` per axis."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise InvalidRectangle("invalid rectangle: lo and hi must have equal, nonzero length")
        if any(a < 1 or a > b for a, b in zip(lo, hi)):
            raise InvalidRectangle(f"invalid rectangle: lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_lengths(cls, lo: Sequence[int], lengths: Sequence[int]) -> "Rect":
        return cls(tuple(lo), tuple(a + l - 1 for a, l in zip(lo, lengths)))

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def point_count(self) -> int:
        return math.prod(self.lengths)

    def fraction(self, dims: Sequence[int]) -> float:
        """Share of lattice points covered, the discrete stand-in for 2^d h_1...h_d."""
        return self.point_count / math.prod(dims)

    def check(self, dims: Sequence[int]) -> None:
        if len(dims) != self.d or any(b > m for b, m in zip(self.hi, dims)):
            raise InvalidRectangle(f"invalid rectangle: {self} outside grid {tuple(dims)}")

    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(a - 1, b) for a, b in zip(self.lo, self.hi))

    def contains(self, index: Sequence[int]) -> bool:
        return all(a <= i <= b for a, i, b in zip(self.lo, index, self.hi))

    def __str__(self):
        return "x".join(f"{a}..{b}" for a, b in zip(self.lo, self.hi))


@nb.njit(cache=True)
def _compensated_cumsum_rows(a):
    # Neumaier summation along the last axis of a 2-D array, in place
    n, m = a.shape
    for i in range(n):
        s = 0.0
        c = 0.0
        for j in range(m):
            x = a[i, j]
            t = s + x
            if abs(s) >= abs(x):
                c += (s - t) + x
            else:
                c += (x - t) + s
            s = t
            a[i, j] = s + c


def _cumsum_axis(a: np.ndarray, axis: int) -> np.ndarray:
    if a.shape[axis] < COMPENSATED_MIN_AXIS:
        return np.cumsum(a, axis=axis)
    moved = np.array(np.moveaxis(a, axis, -1), order="C")
    flat = moved.reshape(-1, moved.shape[-1])
    _compensated_cumsum_rows(flat)
    return np.moveaxis(flat.reshape(moved.shape), -1, axis)


@dataclass(frozen=True, eq=False)
class PrefixTable:
    """Cumulative sums of a grid, stored with a leading zero slab per axis.

    ``padded[i_1, ..., i_d]`` is the sum of all values with index ``<= i``
    (1-based), so ``padded`` has shape ``(m_1 + 1, ..., m_d + 1)``.
    """

    dims: tuple[int, ...]
    padded: np.ndarray = field(repr=False)

    @property
    def cumulative(self) -> np.ndarray:
        return self.padded[(slice(1, None),) * len(self.dims)]

    @property
    def total(self) -> float:
        return float(self.padded[(-1,) * len(self.dims)])


def build_prefix(grid: GridField) -> PrefixTable:
    with np.errstate(over="ignore", invalid="ignore"):
        total_abs = np.abs(grid.values).sum()
    if not np.isfinite(total_abs):
        raise OverflowError("overflow: total absolute sum of grid is not representable")
    padded = np.zeros(tuple(m + 1 for m in grid.dims), dtype=np.float64)
    acc = grid.values
    for axis in range(grid.d):
        acc = _cumsum_axis(acc, axis)
    padded[(slice(1, None),) * grid.d] = acc
    padded.setflags(write=False)
    return PrefixTable(grid.dims, padded)


def rect_sum(table: PrefixTable, rect: Rect) -> float:
    """Sum of the grid over ``rect`` by 2^d-term inclusion-exclusion."""
    rect.check(table.dims)
    total = 0.0
    for corner in itertools.product((0, 1), repeat=rect.d):
        idx = tuple(b if c else a - 1 for a, b, c in zip(rect.lo, rect.hi, corner))
        sign = -1.0 if (rect.d - sum(corner)) % 2 else 1.0
        total += sign * table.padded[idx]
    return float(total)


def window_sums(table: PrefixTable, lengths: Sequence[int]) -> np.ndarray:
    """Sums of every rectangle with the given per-axis lengths.

    Entry ``[j_1, ..., j_d]`` (0-based) is the sum over the rectangle whose
    lower corner is ``j + 1``; C-order of the result follows lexicographic
    order of ``lo``.
    """
    d = len(table.dims)
    out = np.zeros(tuple(m - l + 1 for m, l in zip(table.dims, lengths)))
    for corner in itertools.product((0, 1), repeat=d):
        sl = tuple(
            slice(l, m + 1) if c else slice(0, m - l + 1)
            for m, l, c in zip(table.dims, lengths, corner)
        )
        if (d - sum(corner)) % 2:
            out -= table.padded[sl]
        else:
            out += table.padded[sl]
    return out


ScaleFilter = Callable[[tuple[int, ...]], bool]


def iter_lengths(dims: Sequence[int], scale_filter: ScaleFilter | None = None) -> Iterator[tuple[int, ...]]:
    for lengths in itertools.product(*(range(1, m + 1) for m in dims)):
        if scale_filter is None or scale_filter(lengths):
            yield lengths


def enumerate_rects(dims: Sequence[int], scale_filter: ScaleFilter | None = None) -> Iterator[Rect]:
    """Yield every nonempty lattice rectangle, ordered by lengths then by ``lo``."""
    dims = _check_dims(dims)
    for lengths in iter_lengths(dims, scale_filter):
        for lo in itertools.product(*(range(1, m - l + 2) for m, l in zip(dims, lengths))):
            yield Rect.from_lengths(lo, lengths)


def rect_count(dims: Sequence[int], scale_filter: ScaleFilter | None = None) -> int:
    dims = _check_dims(dims)
    if scale_filter is None:
        return math.prod(m * (m + 1) // 2 for m in dims)
    return sum(
        math.prod(m - l + 1 for m, l in zip(dims, lengths))
        for lengths in iter_lengths(dims, scale_filter)
    )


# --- grid I/O -------------------------------------------------------------


def write_grid_csv(grid: GridField, path: str | Path) -> None:
    """Header line of axis lengths, then values row-major, one last-axis row per line."""
    rows = grid.values.reshape(-1, grid.dims[-1])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(grid.dims)
        for row in rows:
            w.writerow(repr(float(v)) for v in row)


def read_grid_csv(path: str | Path) -> GridField:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty grid file") from None
        dims = _check_dims(int(tok) for tok in header if tok.strip())
        values = [float(tok) for row in reader for tok in row if tok.strip()]
    if len(values) != math.prod(dims):
        raise ValueError(f"{path}: expected {math.prod(dims)} values for dims {dims}, got {len(values)}")
    return GridField(np.array(values).reshape(dims))


def grid_to_bytes(grid: GridField) -> bytes:
    buf = io.BytesIO()
    buf.write(BINARY_MAGIC)
    buf.write(struct.pack(f"<I{grid.d}I", grid.d, *grid.dims))
    buf.write(np.ascontiguousarray(grid.values, dtype="<f8").tobytes())
    return buf.getvalue()


def grid_from_bytes(data: bytes) -> GridField:
    if data[:4] != BINARY_MAGIC:
        raise ValueError("not a grid file: bad magic")
    (d,) = struct.unpack_from("<I", data, 4)
    dims = _check_dims(struct.unpack_from(f"<{d}I", data, 8))
    offset = 8 + 4 * d
    n = math.prod(dims)
    if len(data) != offset + 8 * n:
        raise ValueError(f"grid file truncated or oversized: {len(data)} bytes for dims {dims}")
    values = np.frombuffer(data, dtype="<f8", count=n, offset=offset)
    return GridField(values.reshape(dims))


def write_grid_binary(grid: GridField, path: str | Path) -> None:
    Path(path).write_bytes(grid_to_bytes(grid))


def read_grid_binary(path: str | Path) -> GridField:
    return grid_from_bytes(Path(path).read_bytes())


def read_grid(path: str | Path) -> GridField:
    """Read either format, sniffing the binary magic."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == BINARY_MAGIC:
        return read_grid_binary(path)
    return read_grid_csv(path)
