"""Scale penalties and the constants of the optimal detection thresholds.

All logarithms are natural. ``r`` is the relative size of a rectangle, which
on a lattice is the fraction of grid points it covers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InvalidScale(ValueError):
    pass


def _as_scale(r):
    arr = np.asarray(r, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr > 1.0):
        raise InvalidScale(f"invalid scale: r must lie in (0, 1], got {r!r}")
    return arr


def _out(arr):
    return float(arr) if arr.ndim == 0 else arr


def gamma_pen(r):
    """Penalty ``sqrt(2 log(1/r))``; accepts scalars or arrays."""
    arr = _as_scale(r)
    return _out(np.sqrt(2.0 * np.log(1.0 / arr)))


def gamma_v_pen(r, v: float):
    """Penalty ``sqrt(2 v log(1/r))``."""
    if not v > 0:
        raise ValueError(f"v must be positive, got {v}")
    arr = _as_scale(r)
    return _out(np.sqrt(2.0 * v * np.log(1.0 / arr)))


def d_norm(r):
    """Scale normalizer ``log(log(e^e / r)) / sqrt(log(e / r))``.

    Equals 1 at ``r = 1``, is positive on (0, 1] and tends to 0 as r -> 0.
    """
    arr = _as_scale(r)
    log_inv = np.log(1.0 / arr)
    return _out(np.log(math.e + log_inv) / np.sqrt(1.0 + log_inv))


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty variant: ``standard`` uses Gamma, ``gamma_v`` uses Gamma_V with factor ``v``."""

    variant: str = "standard"
    v: float = 1.0

    def __post_init__(self):
        if self.variant not in ("standard", "gamma_v"):
            raise ValueError(f"unknown penalty variant {self.variant!r}")
        if self.variant == "standard" and self.v != 1.0:
            raise ValueError("standard penalty has v = 1")
        if not self.v > 0:
            raise ValueError(f"v must be positive, got {self.v}")

    @classmethod
    def from_v(cls, v: float | None) -> "PenaltySpec":
        if v is None or v == 1.0:
            return cls()
        return cls("gamma_v", float(v))

    def __call__(self, r):
        return gamma_v_pen(r, self.v)


def separation_constant(beta: float, L: float, d: int, psi_norm_sq: float) -> float:
    """Exact separation constant c_*(beta, L) for Hoelder alternatives."""
    if beta <= 0 or L <= 0 or d < 1 or psi_norm_sq <= 0:
        raise ValueError("beta, L, psi_norm_sq must be positive and d >= 1")
    base = 2.0 * d * L ** (d / beta) / ((2.0 * beta + d) * psi_norm_sq)
    return base ** (beta / (2.0 * beta + d))


def minimax_rate(n: float, beta: float, d: int) -> float:
    """Sup-norm testing rate ``(log n / n)^(beta / (2 beta + d))``."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if beta <= 0 or d < 1:
        raise ValueError("beta must be positive and d >= 1")
    return (math.log(n) / n) ** (beta / (2.0 * beta + d))


def triangle_kernel_constant(beta: float, L: float, d: int, psi1_norm_sq: float, inner_1_beta: float) -> float:
    """Lower bound on M for the rate-optimal test with the beta=1 kernel when beta <= 1 is unknown."""
    if beta <= 0 or L <= 0 or d < 1 or psi1_norm_sq <= 0 or inner_1_beta <= 0:
        raise ValueError("all inputs must be positive and d >= 1")
    base = 2.0 * d * L ** (d / beta) * psi1_norm_sq / ((2.0 * beta + d) * inner_1_beta**2)
    return base ** (beta / (2.0 * beta + d))


def detection_boundary(b_measure: float, n: float) -> float:
    """Smallest |mu| detectable for a box signal of measure ``b_measure``: sqrt(2 log(1/|B|)) / sqrt(n |B|)."""
    if not 0.0 < b_measure < 1.0:
        raise ValueError(f"b_measure must lie in (0, 1), got {b_measure}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return math.sqrt(2.0 * math.log(1.0 / b_measure)) / math.sqrt(n * b_measure)
