"""Rectangle statistics on a grid: multiscale T, T*, scan M_n and ALR A_n.

Every statistic is a reduction over the normalized rectangle statistic
``psi_hat(B) = sum_{x in B} Y(x) / sqrt(|B|)`` (or its kernel-weighted
version), with rectangles enumerated by :func:`multiscan.grid.enumerate_rects`.
The relative scale of a rectangle is its point fraction ``|B| / prod(m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np
from scipy import signal

from . import _scan
from .grid import GridField, PrefixTable, Rect, build_prefix, iter_lengths, rect_count, rect_sum, window_sums
from .kernels import Kernel, ScaledKernel, sampled_weights, window_weights
from .penalties import PenaltySpec, d_norm, gamma_v_pen

KINDS = ("multiscale", "multiscale-star", "scan", "alr")
# column of each kind in the fused sweep output
_COLUMN = {"multiscale": 0, "multiscale-star": 1, "scan": 2, "alr": 3}


class EmptyFamily(ValueError):
    pass


class PenaltyNotApplicable(ValueError):
    pass


@dataclass(frozen=True)
class SideBounds:
    """Keep rectangles whose every side has between ``min_side`` and ``max_side`` points."""

    min_side: int = 1
    max_side: int | None = None

    def __post_init__(self):
        if self.min_side < 1:
            raise ValueError("min_side must be >= 1")
        if self.max_side is not None and self.max_side < self.min_side:
            raise ValueError("max_side must be >= min_side")

    def __call__(self, lengths: Sequence[int]) -> bool:
        hi = self.max_side if self.max_side is not None else math.inf
        return all(self.min_side <= l <= hi for l in lengths)

    def bounds(self, dims: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        lmin = np.full(len(dims), self.min_side, dtype=np.int64)
        cap = self.max_side if self.max_side is not None else max(dims)
        lmax = np.minimum(np.asarray(dims, dtype=np.int64), cap)
        return lmin, lmax

    def __str__(self):
        return f"{self.min_side}-{'max' if self.max_side is None else self.max_side}"


@dataclass(frozen=True)
class StatisticSpec:
    """Which statistic to compute.

    ``kernel`` is a kernel spec string (``"indicator"`` or ``"holder:<beta>"``);
    scan and ALR accept only the indicator and the standard penalty.
    """

    kind: str
    kernel: str = "indicator"
    penalty: PenaltySpec = field(default_factory=PenaltySpec)
    scales: SideBounds | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown statistic {self.kind!r}; expected one of {KINDS}")
        Kernel.parse(self.kernel, 1)
        object.__setattr__(self, "kernel", str(Kernel.parse(self.kernel, 1)))
        if self.kind in ("scan", "alr"):
            if self.penalty != PenaltySpec():
                raise PenaltyNotApplicable(f"penalty not applicable to {self.kind}")
            if self.kernel != "indicator":
                raise ValueError(f"{self.kind} requires the indicator kernel")

    def kernel_for(self, d: int) -> Kernel:
        return Kernel.parse(self.kernel, d)

    @property
    def sweep_key(self) -> tuple:
        """Specs with equal keys share one pass over the rectangles."""
        return (self.kernel, self.penalty.v, self.scales)

    def label(self) -> str:
        parts = [self.kind]
        if self.kernel != "indicator":
            parts.append(self.kernel)
        if self.penalty.v != 1.0:
            parts.append(f"V={self.penalty.v!r}")
        if self.scales is not None:
            parts.append(f"sides={self.scales}")
        return ",".join(parts)


@dataclass
class DetectionResult:
    """Value of a statistic with its maximizing rectangle.

    For ALR ``value`` is ``log A_n`` and ``argmax_rect`` the rectangle with the
    largest ``psi_hat^2``.
    """

    kind: str
    value: float
    argmax_rect: Rect
    rect_count: int
    per_scale_max: dict[tuple[int, ...], float] | None = None

    @property
    def linear_value(self) -> float:
        """``A_n`` itself for ALR (inf if it overflows); ``value`` otherwise."""
        if self.kind != "alr":
            return self.value
        try:
            return math.exp(self.value)
        except OverflowError:
            return math.inf


def set_threads(n: int | None) -> int:
    """Cap compiled parallelism at ``n`` threads; returns the count in effect."""
    limit = numba.config.NUMBA_NUM_THREADS
    n = limit if n is None else max(1, min(int(n), limit))
    numba.set_num_threads(n)
    return n


def psi_hat_rect(table: PrefixTable, rect: Rect) -> float:
    return rect_sum(table, rect) / math.sqrt(rect.point_count)


def psi_hat_kernel(grid: GridField, sk: ScaledKernel) -> float:
    """Kernel-weighted statistic ``sum w Y / sqrt(sum w^2)`` with unit null variance."""
    idx, w, norm = sampled_weights(sk, grid.dims)
    vals = grid.values[tuple((idx - 1).T)]
    return float(np.dot(w, vals) / norm)


def scale_tables(dims: Sequence[int], v: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per point-count tables ``1/sqrt(c)``, ``Gamma_v(c/N)`` and ``1/D(c/N)``, index 0 unused."""
    n = math.prod(dims)
    c = np.arange(1, n + 1, dtype=np.float64)
    r = c / n
    r[-1] = 1.0
    isq = np.concatenate(([0.0], 1.0 / np.sqrt(c)))
    pen = np.concatenate(([0.0], gamma_v_pen(r, v)))
    idn = np.concatenate(([0.0], 1.0 / d_norm(r)))
    return isq, pen, idn


def _bounds(spec_scales: SideBounds | None, dims) -> tuple[np.ndarray, np.ndarray]:
    return (spec_scales or SideBounds()).bounds(dims)


def _check_family(dims, scales: SideBounds | None) -> int:
    count = rect_count(dims, scales)
    if count == 0:
        raise EmptyFamily(f"no rectangles in grid {tuple(dims)} pass the scale filter {scales}")
    return count


def _use_fast(kernel: str, d: int, per_scale: bool) -> bool:
    return kernel == "indicator" and d in _scan.SINGLE_SWEEPS and not per_scale


def _rect_from_args(row: np.ndarray, d: int) -> Rect:
    return Rect.from_lengths(tuple(int(v) for v in row[d:]), tuple(int(v) for v in row[:d]))


class _Reducer:
    """Running maxima and streaming log-sum-exp over size classes in enumeration order."""

    def __init__(self, want_alr: bool):
        self.best = [-math.inf, -math.inf, -math.inf]
        self.where: list[tuple | None] = [None, None, None]
        self.want_alr = want_alr
        self.lse_max = -math.inf
        self.lse_sum = 0.0

    def add(self, lengths, u, t, z):
        for col, arr in enumerate((u, t, z)):
            j = int(np.argmax(arr))
            val = float(arr.flat[j])
            if val > self.best[col]:
                self.best[col] = val
                self.where[col] = (lengths, np.unravel_index(j, arr.shape))
        if self.want_alr:
            x = 0.5 * z * z
            bm = float(x.max())
            bs = float(np.exp(x - bm).sum())
            if bm > self.lse_max:
                self.lse_sum = self.lse_sum * math.exp(self.lse_max - bm) + bs
                self.lse_max = bm
            else:
                self.lse_sum += bs * math.exp(bm - self.lse_max)

    def rect(self, col: int) -> Rect:
        lengths, pos = self.where[col]
        return Rect.from_lengths(tuple(int(p) + 1 for p in pos), lengths)

    @property
    def log_sum(self) -> float:
        return self.lse_max + math.log(self.lse_sum)


def _generic_sweep(grid: GridField, spec: StatisticSpec, want_alr: bool, per_scale: bool):
    dims = grid.dims
    n = grid.size
    kernel = spec.kernel_for(grid.d)
    table = build_prefix(grid) if kernel.kind == "indicator" else None
    red = _Reducer(want_alr)
    per = {} if per_scale else None
    for lengths in iter_lengths(dims, spec.scales):
        c = math.prod(lengths)
        if table is not None:
            z = np.abs(window_sums(table, lengths)) / math.sqrt(c)
        else:
            w = window_weights(kernel, lengths)
            z = np.abs(signal.correlate(grid.values, w, mode="valid")) / math.sqrt(float(np.sum(w * w)))
        r = min(c / n, 1.0)
        t = z - gamma_v_pen(r, spec.penalty.v)
        u = t / d_norm(r)
        red.add(lengths, u, t, z)
        if per is not None:
            per[lengths] = float(z.max())
    return red, per


def _sweep(grid: GridField, spec: StatisticSpec, per_scale: bool = False) -> DetectionResult:
    count = _check_family(grid.dims, spec.scales)
    want_alr = spec.kind == "alr"
    col = _COLUMN[spec.kind]
    if _use_fast(spec.kernel, grid.d, per_scale):
        isq, pen, idn = scale_tables(grid.dims, spec.penalty.v)
        lmin, lmax = _bounds(spec.scales, grid.dims)
        vals = np.empty(4)
        args = np.zeros((4, 2 * grid.d), dtype=np.int64)
        P = build_prefix(grid).padded
        _scan.SINGLE_SWEEPS[grid.d](P, lmin, lmax, isq, pen, idn, want_alr, vals, args)
        value = float(vals[col])
        rect = _rect_from_args(args[col], grid.d)
        per = None
    else:
        red, per = _generic_sweep(grid, spec, want_alr, per_scale)
        value = red.log_sum if want_alr else red.best[col]
        rect = red.rect(min(col, 2))
    if want_alr:
        value -= math.log(count)
    return DetectionResult(spec.kind, value, rect, count, per)


def _require(spec: StatisticSpec, kind: str) -> None:
    if spec.kind != kind:
        raise ValueError(f"expected a {kind!r} spec, got {spec.kind!r}")


def multiscale_T(grid: GridField, spec: StatisticSpec | None = None, per_scale: bool = False) -> DetectionResult:
    """Penalized and rescaled maximum ``max_B (|psi_hat(B)| - Gamma_V(r)) / D(r)``."""
    spec = spec or StatisticSpec("multiscale")
    _require(spec, "multiscale")
    return _sweep(grid, spec, per_scale)


def multiscale_T_star(grid: GridField, spec: StatisticSpec | None = None, per_scale: bool = False) -> DetectionResult:
    """Penalized maximum without the scale normalizer."""
    spec = spec or StatisticSpec("multiscale-star")
    _require(spec, "multiscale-star")
    return _sweep(grid, spec, per_scale)


def scan_Mn(grid: GridField, spec: StatisticSpec | None = None, per_scale: bool = False) -> DetectionResult:
    spec = spec or StatisticSpec("scan")
    _require(spec, "scan")
    return _sweep(grid, spec, per_scale)


def alr_An(grid: GridField, spec: StatisticSpec | None = None, per_scale: bool = False) -> DetectionResult:
    """Average of ``exp(psi_hat^2 / 2)`` over the family, returned as ``log A_n``."""
    spec = spec or StatisticSpec("alr")
    _require(spec, "alr")
    return _sweep(grid, spec, per_scale)


_DISPATCH = {
    "multiscale": multiscale_T,
    "multiscale-star": multiscale_T_star,
    "scan": scan_Mn,
    "alr": alr_An,
}


def evaluate(grid: GridField, spec: StatisticSpec, per_scale: bool = False) -> DetectionResult:
    return _DISPATCH[spec.kind](grid, spec, per_scale)


def evaluate_batch(grids: np.ndarray, specs: Sequence[StatisticSpec]) -> np.ndarray:
    """Values of several statistics on a stack of grids, shape ``(B, len(specs))``.

    ``grids`` has shape ``(B, *dims)``. Specs sharing kernel, penalty and scale
    filter are computed in a single fused sweep. Each grid is reduced serially,
    so results do not depend on the thread count.
    """
    grids = np.ascontiguousarray(grids, dtype=np.float64)
    dims = grids.shape[1:]
    d = len(dims)
    out = np.empty((grids.shape[0], len(specs)))
    groups: dict[tuple, list[int]] = {}
    for j, spec in enumerate(specs):
        groups.setdefault(spec.sweep_key, []).append(j)
    for members in groups.values():
        lead = specs[members[0]]
        count = _check_family(dims, lead.scales)
        want_alr = any(specs[j].kind == "alr" for j in members)
        if _use_fast(lead.kernel, d, False):
            isq, pen, idn = scale_tables(dims, lead.penalty.v)
            lmin, lmax = _bounds(lead.scales, dims)
            vals = np.empty((grids.shape[0], 4))
            args = np.zeros((grids.shape[0], 4, 2 * d), dtype=np.int64)
            _scan.BATCH_SWEEPS[d](grids, lmin, lmax, isq, pen, idn, want_alr, vals, args)
        else:
            vals = np.empty((grids.shape[0], 4))
            for i in range(grids.shape[0]):
                red, _ = _generic_sweep(GridField(grids[i]), lead, want_alr, False)
                vals[i, :3] = red.best
                vals[i, 3] = red.log_sum if want_alr else -math.inf
        for j in members:
            col = _COLUMN[specs[j].kind]
            out[:, j] = vals[:, col] - (math.log(count) if col == 3 else 0.0)
    return out
