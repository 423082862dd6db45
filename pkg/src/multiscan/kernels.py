"""Kernel functions: the box indicator and the Hoelder bumps (1 - |x|^beta)_+."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_QUAD_RES = {1: 2001, 2: 501, 3: 121}
# weights below this are treated as outside the support
_WEIGHT_EPS = 1e-12


class DegenerateBandwidth(ValueError):
    pass


@dataclass(frozen=True)
class Kernel:
    """``kind`` is ``"indicator"`` (1 on [-1, 1]^d) or ``"holder"`` with ``0 < beta <= 1``."""

    kind: str
    d: int
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in ("indicator", "holder"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.d < 1:
            raise ValueError("kernel dimension must be >= 1")
        if self.kind == "holder":
            if self.beta is None or not 0.0 < self.beta <= 1.0:
                raise ValueError(f"holder kernel needs beta in (0, 1], got {self.beta}")
        elif self.beta is not None:
            raise ValueError("indicator kernel takes no beta")

    @classmethod
    def indicator(cls, d: int) -> "Kernel":
        return cls("indicator", d)

    @classmethod
    def holder(cls, beta: float, d: int) -> "Kernel":
        return cls("holder", d, float(beta))

    @classmethod
    def parse(cls, text: str, d: int) -> "Kernel":
        """Parse ``"indicator"`` or ``"holder:<beta>"``."""
        text = text.strip().lower()
        if text == "indicator":
            return cls.indicator(d)
        if text.startswith("holder:"):
            try:
                beta = float(text.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad kernel spec {text!r}") from None
            return cls.holder(beta, d)
        raise ValueError(f"bad kernel spec {text!r}; expected 'indicator' or 'holder:<beta>'")

    def __str__(self):
        return "indicator" if self.kind == "indicator" else f"holder:{self.beta!r}"

    def __call__(self, x) -> np.ndarray | float:
        return kernel_eval(self, x)


def kernel_eval(k: Kernel, x) -> np.ndarray | float:
    """Evaluate ``psi`` at one point (shape ``(d,)``) or many (shape ``(..., d)``)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (k.d,):
        raise ValueError(f"dimension mismatch: kernel has d={k.d}, point shape {x.shape}")
    if k.kind == "indicator":
        val = np.all(np.abs(x) <= 1.0, axis=-1).astype(np.float64)
    else:
        norm = np.sqrt(np.sum(x * x, axis=-1))
        val = np.where(norm <= 1.0, 1.0 - norm**k.beta, 0.0)
    return float(val) if val.ndim == 0 else val


def _midpoint_nodes(d: int, quad_res: int) -> tuple[np.ndarray, float]:
    step = 2.0 / quad_res
    axis = -1.0 + step * (np.arange(quad_res) + 0.5)
    mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1)
    return mesh, step**d


def kernel_inner_product(k1: Kernel, k2: Kernel, quad_res: int | None = None) -> float:
    """Tensor midpoint quadrature of the integral of ``psi_1 * psi_2`` over [-1, 1]^d."""
    if k1.d != k2.d:
        raise ValueError(f"dimension mismatch: {k1.d} vs {k2.d}")
    quad_res = quad_res or DEFAULT_QUAD_RES.get(k1.d, 41)
    if quad_res < 2:
        raise ValueError("quad_res must be >= 2")
    nodes, cell = _midpoint_nodes(k1.d, quad_res)
    return float(np.sum(kernel_eval(k1, nodes) * kernel_eval(k2, nodes)) * cell)


def kernel_l2_norm_sq(k: Kernel, quad_res: int | None = None) -> float:
    return kernel_inner_product(k, k, quad_res)


def kernel_l2_norm_sq_exact(k: Kernel) -> float:
    """Closed form of the squared norm (used to cross-check the quadrature).

    For the bump, polar coordinates give
    ``|S^{d-1}| * int_0^1 (1 - r^beta)^2 r^(d-1) dr``.
    """
    if k.kind == "indicator":
        return 2.0**k.d
    d, b = k.d, k.beta
    sphere = 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)
    radial = 1.0 / d - 2.0 / (d + b) + 1.0 / (d + 2 * b)
    return sphere * radial


@dataclass(frozen=True)
class ScaledKernel:
    """``psi_{t,h}(x) = psi((x - t) / h)``, supported on the open box ``t +- h``."""

    base: Kernel
    t: tuple[float, ...]
    h: tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(v) for v in self.t)
        h = tuple(float(v) for v in self.h)
        if len(t) != self.base.d or len(h) != self.base.d:
            raise ValueError("center and bandwidth must have the kernel's dimension")
        if any(not 0.0 < hk <= 0.5 for hk in h):
            raise ValueError(f"bandwidth must lie in (0, 1/2]^d, got {h}")
        if any(not 0.0 <= tk <= 1.0 for tk in t):
            raise ValueError(f"center must lie in [0, 1]^d, got {t}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "h", h)

    @property
    def in_a_h(self) -> bool:
        """True when the support lies inside [0, 1]^d."""
        return all(hk <= tk <= 1.0 - hk for tk, hk in zip(self.t, self.h))

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return kernel_eval(self.base, (x - np.asarray(self.t)) / np.asarray(self.h))


def sampled_weights(sk: ScaledKernel, dims: Sequence[int]) -> tuple[np.ndarray, np.ndarray, float]:
    """Kernel weights at the lattice points ``i/m`` inside the support.

    Returns ``(indices, weights, norm)``: 1-based indices of shape ``(n, d)``,
    the nonzero weights, and ``sqrt(sum w^2)``.
    """
    if len(dims) != sk.base.d:
        raise ValueError(f"dimension mismatch: kernel d={sk.base.d}, dims {tuple(dims)}")
    # candidate index range per axis, one step of slack on each side
    ranges = []
    for m, t, h in zip(dims, sk.t, sk.h):
        lo = max(1, math.floor((t - h) * m) - 1)
        hi = min(m, math.ceil((t + h) * m) + 1)
        if lo > hi:
            raise DegenerateBandwidth("degenerate bandwidth: support misses the lattice")
        ranges.append(np.arange(lo, hi + 1))
    mesh = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, sk.base.d)
    points = mesh / np.asarray(dims, dtype=np.float64)
    w = np.atleast_1d(sk(points))
    keep = w > _WEIGHT_EPS
    if not np.any(keep):
        raise DegenerateBandwidth("degenerate bandwidth: support misses the lattice")
    w = w[keep]
    return mesh[keep], w, float(np.sqrt(np.sum(w * w)))


def window_weights(k: Kernel, lengths: Sequence[int]) -> np.ndarray:
    """Weights of the kernel laid over a block of ``lengths`` lattice points.

    The center is the block midpoint and the half-width per axis is
    ``(l + 1) / (2 m)``, so the open support holds exactly the block and the
    scaled offsets ``(2 i - l - 1) / (l + 1)`` do not depend on ``m``.
    """
    if len(lengths) != k.d:
        raise ValueError("dimension mismatch")
    axes = [(2.0 * np.arange(1, l + 1) - l - 1) / (l + 1) for l in lengths]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    w = np.asarray(kernel_eval(k, mesh), dtype=np.float64).reshape(tuple(lengths))
    w[w <= _WEIGHT_EPS] = 0.0
    return w
