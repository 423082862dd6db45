"""Numerical checks of the geometry behind the multiscale statistic.

* the symmetric-difference pseudometric between boxes and greedy packings of
  the set of boxes with volume at most ``delta``;
* growth of the finest-scale penalized maximum when the penalty constant
  ``V`` is below one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numba as nb
import numpy as np

from .penalties import gamma_v_pen
from .simulation import RngSpec, gaussian_values


@dataclass(frozen=True)
class BoxParam:
    """Open box ``prod (t_k - h_k, t_k + h_k)`` inside the unit cube."""

    t: tuple[float, ...]
    h: tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(v) for v in self.t)
        h = tuple(float(v) for v in self.h)
        if len(t) != len(h) or not t:
            raise ValueError("t and h must have equal, nonzero length")
        if any(not (0 < hk <= 0.5 and hk <= tk <= 1 - hk) for tk, hk in zip(t, h)):
            raise ValueError(f"box (t={t}, h={h}) is not inside the unit cube")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "h", h)

    @property
    def volume(self) -> float:
        """sigma^2(t, h) = 2^d prod h_k."""
        return math.prod(2.0 * hk for hk in self.h)


def intersection_volume(a: BoxParam, b: BoxParam) -> float:
    vol = 1.0
    for ta, ha, tb, hb in zip(a.t, a.h, b.t, b.h):
        vol *= max(0.0, min(ta + ha, tb + hb) - max(ta - ha, tb - hb))
    return vol


def sym_diff_rho(a: BoxParam, b: BoxParam) -> float:
    """Square root of the volume of the symmetric difference of the two boxes."""
    if len(a.t) != len(b.t):
        raise ValueError("boxes must have the same dimension")
    if a == b:
        # endpoint rounding would otherwise leave a residue of order sqrt(eps)
        return 0.0
    return math.sqrt(max(0.0, a.volume + b.volume - 2.0 * intersection_volume(a, b)))


@dataclass(frozen=True)
class PackingResult:
    d: int
    delta: float
    u: float
    count: int
    centers: np.ndarray
    halfwidths: np.ndarray

    @property
    def bound_ratio(self) -> float:
        """``N u^(2d) delta / log(e/delta)^(d-1)``, bounded by a constant depending only on d."""
        return self.count * self.u ** (2 * self.d) * self.delta / math.log(math.e / self.delta) ** (self.d - 1)


def candidate_boxes(d: int, delta: float, lattice_res: int) -> tuple[np.ndarray, np.ndarray]:
    """Boxes with dyadic half-widths ``2^-j >= 1/lattice_res`` and centers on ``i / lattice_res``.

    Only boxes inside the unit cube with volume ``<= delta`` are kept. Order is
    lexicographic in (half-width exponents, center indices), largest boxes first.
    """
    if lattice_res < 8:
        raise ValueError("lattice_res must be >= 8")
    exps = [j for j in range(1, 64) if 2.0**-j >= 1.0 / lattice_res]
    grid = np.arange(lattice_res + 1) / lattice_res
    ts, hs = [], []
    for js in itertools.product(exps, repeat=d):
        h = np.array([2.0**-j for j in js])
        if np.prod(2.0 * h) > delta:
            continue
        axes = [grid[(grid >= hk) & (grid <= 1.0 - hk)] for hk in h]
        if any(len(ax) == 0 for ax in axes):
            continue
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        ts.append(mesh)
        hs.append(np.broadcast_to(h, mesh.shape))
    if not ts:
        return np.empty((0, d)), np.empty((0, d))
    return np.ascontiguousarray(np.concatenate(ts)), np.ascontiguousarray(np.concatenate(hs))


@nb.njit(cache=True)
def _rho_sq(t, h, i, j):
    d = t.shape[1]
    va = 1.0
    vb = 1.0
    inter = 1.0
    for k in range(d):
        va *= 2.0 * h[i, k]
        vb *= 2.0 * h[j, k]
        lo = max(t[i, k] - h[i, k], t[j, k] - h[j, k])
        hi = min(t[i, k] + h[i, k], t[j, k] + h[j, k])
        inter *= max(0.0, hi - lo)
    return va + vb - 2.0 * inter


@nb.njit(cache=True)
def _greedy(t, h, order, threshold_sq):
    chosen = np.empty(order.shape[0], dtype=np.int64)
    n = 0
    for idx in order:
        ok = True
        for q in range(n):
            if _rho_sq(t, h, idx, chosen[q]) <= threshold_sq:
                ok = False
                break
        if ok:
            chosen[n] = idx
            n += 1
    return chosen[:n]


@nb.njit(cache=True)
def _min_pair_rho_sq(t, h):
    best = np.inf
    n = t.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            r = _rho_sq(t, h, i, j)
            if r < best:
                best = r
    return best


def greedy_packing(delta: float, u: float, lattice_res: int, d: int = 1, reverse: bool = False) -> PackingResult:
    """Maximal set of boxes with volume ``<= delta`` and pairwise rho ``> sqrt(u delta)``.

    Candidates are scanned in :func:`candidate_boxes` order (reversed when
    ``reverse``), so the count is a lower bound on the packing number.
    """
    if not (0 < delta <= 1 and 0 < u <= 1):
        raise ValueError("delta and u must lie in (0, 1]")
    t, h = candidate_boxes(d, delta, lattice_res)
    if len(t) == 0:
        return PackingResult(d, delta, u, 0, t, h)
    order = np.arange(len(t))
    if reverse:
        order = order[::-1].copy()
    chosen = _greedy(t, h, order, u * delta)
    return PackingResult(d, delta, u, len(chosen), t[chosen], h[chosen])


def packing_is_valid(result: PackingResult) -> bool:
    """Re-check every selected pair against the separation threshold."""
    if result.count < 2:
        return True
    return bool(_min_pair_rho_sq(result.centers, result.halfwidths) > result.u * result.delta)


def packing_bound_sweep(d: int, deltas: Iterable[float], us: Iterable[float], lattice_res: int) -> list[PackingResult]:
    us = list(us)
    return [greedy_packing(delta, u, lattice_res, d) for delta in deltas for u in us]


# --- penalty constant below one --------------------------------------------


@dataclass(frozen=True)
class FinestScaleRow:
    m: int
    mean: float
    se: float
    reference: float


def finest_scale_statistic(d: int, v: float, m: int, seeds: int, base_seed: int = 0) -> np.ndarray:
    """``max |psi_hat| - Gamma_V(m^-d)`` over the ``m^d`` single-point cells, one value per seed.

    At the finest scale each cell holds one lattice point, so ``psi_hat`` is
    the observation itself and the cells are independent.
    """
    if v <= 0:
        raise ValueError("v must be positive")
    pen = gamma_v_pen(float(m) ** -d, v)
    out = np.empty(seeds)
    for s in range(seeds):
        z = gaussian_values((m,) * d, RngSpec(base_seed, (m << 32) | s))
        out[s] = np.abs(z).max() - pen
    return out


def finest_scale_growth(d: int, v: float, m_list: Sequence[int], seeds: int, base_seed: int = 0) -> list[FinestScaleRow]:
    """Mean finest-scale statistic per ``m`` with the growth curve ``(1 - sqrt v) sqrt(2 d log m)``."""
    if list(m_list) != sorted(set(m_list)):
        raise ValueError("m_list must be strictly increasing")
    rows = []
    for m in m_list:
        vals = finest_scale_statistic(d, v, m, seeds, base_seed)
        se = float(vals.std(ddof=1) / math.sqrt(seeds)) if seeds > 1 else math.nan
        ref = (1.0 - math.sqrt(v)) * math.sqrt(2.0 * d * math.log(m))
        rows.append(FinestScaleRow(m, float(vals.mean()), se, ref))
    return rows


def v_less_one_divergence(d: int, v: float, m_list: Sequence[int], seeds: int, base_seed: int = 0) -> list[FinestScaleRow]:
    if not 0 < v < 1:
        raise ValueError(f"not in divergence regime: v={v} must lie in (0, 1)")
    return finest_scale_growth(d, v, m_list, seeds, base_seed)
