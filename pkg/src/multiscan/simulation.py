"""Reproducible noise and signal grids.

Noise comes from a counter-based generator (Philox 4x64) keyed by
``(seed, stream)``; entry ``i`` of a grid (C order) is the ``i``-th 64-bit
output, i.e. word ``i % 4`` of counter block ``i // 4``. Any slice of a grid
can therefore be generated on its own, and the Gaussian variate is the
inverse normal CDF of the open-interval uniform built from the top 53 bits.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .grid import GridField, Rect
from .kernels import Kernel, kernel_eval

_U64 = 2**64


@dataclass(frozen=True)
class RngSpec:
    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            val = getattr(self, name)
            if not 0 <= int(val) < _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {val}")


def _philox(rng: RngSpec, block: int) -> np.random.Philox:
    key = np.array([rng.seed, rng.stream], dtype=np.uint64)
    counter = np.array([block, 0, 0, 0], dtype=np.uint64)
    return np.random.Philox(key=key, counter=counter)


def uniform_block(rng: RngSpec, start: int, stop: int) -> np.ndarray:
    """Uniforms in (0, 1) for entries ``start..stop-1`` of the stream."""
    if not 0 <= start <= stop:
        raise ValueError("need 0 <= start <= stop")
    block, skip = divmod(start, 4)
    raw = _philox(rng, block).random_raw(stop - start + skip)[skip:]
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def gaussian_block(rng: RngSpec, start: int, stop: int) -> np.ndarray:
    return ndtri(uniform_block(rng, start, stop))


def gaussian_values(dims: Sequence[int], rng: RngSpec) -> np.ndarray:
    dims = tuple(int(m) for m in dims)
    return gaussian_block(rng, 0, math.prod(dims)).reshape(dims)


def gaussian_grid(dims: Sequence[int], rng: RngSpec) -> GridField:
    """I.i.d. N(0, 1) grid, a pure function of ``(dims, seed, stream)``."""
    return GridField(gaussian_values(dims, rng))


@dataclass(frozen=True)
class SignalSpec:
    """Mean function sampled at the lattice points.

    ``kind`` is ``"null"``, ``"rect"`` (``mu`` on ``rect``) or ``"bump"``
    (``L * min(h)^beta * psi_beta((x - t) / h)``).
    """

    kind: str = "null"
    mu: float = 0.0
    rect: Rect | None = None
    beta: float = 1.0
    L: float = 1.0
    t: tuple[float, ...] = ()
    h: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("null", "rect", "bump"):
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.kind == "rect" and self.rect is None:
            raise ValueError("rect signal needs a rectangle")
        if self.kind == "bump":
            if not 0 < self.beta <= 1:
                raise ValueError("bump needs beta in (0, 1]")
            if self.L <= 0:
                raise ValueError("bump needs L > 0")
            if len(self.t) != len(self.h) or not self.t:
                raise ValueError("bump needs center and bandwidth of equal dimension")
            if any(not (0 < hk <= 0.5 and hk <= tk <= 1 - hk) for tk, hk in zip(self.t, self.h)):
                raise ValueError("bump support must lie in [0, 1]^d (h <= t <= 1 - h, 0 < h <= 1/2)")

    @classmethod
    def square(cls, dims: Sequence[int], k: int, mu: float, lo: Sequence[int] | None = None) -> "SignalSpec":
        """Cube of side ``k`` points with level ``mu``, lower corner at ``lo`` (default all ones)."""
        lo = tuple(lo) if lo is not None else (1,) * len(dims)
        return cls("rect", mu=float(mu), rect=Rect.from_lengths(lo, (k,) * len(dims)))

    def check(self, dims: Sequence[int]) -> None:
        if self.kind == "rect":
            self.rect.check(dims)
        elif self.kind == "bump" and len(self.t) != len(dims):
            raise ValueError(f"bump dimension {len(self.t)} does not match grid {tuple(dims)}")

    def __str__(self):
        if self.kind == "null":
            return "null"
        if self.kind == "rect":
            lo = ";".join(map(str, self.rect.lo))
            hi = ";".join(map(str, self.rect.hi))
            return f"rect:mu={self.mu!r},lo={lo},hi={hi}"
        t = ";".join(map(repr, self.t))
        h = ";".join(map(repr, self.h))
        return f"bump:beta={self.beta!r},L={self.L!r},t={t},h={h}"


_VEC_SEP = re.compile(r"[;:/ ]")


def _vec(text: str, cast=float) -> tuple:
    return tuple(cast(tok) for tok in _VEC_SEP.split(text.strip("()[] ")) if tok)


def parse_signal(text: str) -> SignalSpec:
    """Parse ``null``, ``rect:mu=2,lo=1;1,hi=3;3`` or ``bump:beta=1,L=1,t=0.5;0.5,h=0.25;0.25``.

    Vector components are separated by ``;`` (also ``:``, ``/`` or space).
    """
    text = text.strip()
    if text == "null":
        return SignalSpec()
    kind, _, rest = text.partition(":")
    fields = {}
    for part in rest.split(","):
        if not part:
            continue
        name, eq, value = part.partition("=")
        if not eq:
            raise ValueError(f"bad signal field {part!r} in {text!r}")
        fields[name.strip()] = value.strip()
    try:
        if kind == "rect":
            rect = Rect(_vec(fields["lo"], int), _vec(fields["hi"], int))
            return SignalSpec("rect", mu=float(fields["mu"]), rect=rect)
        if kind == "bump":
            return SignalSpec(
                "bump",
                beta=float(fields["beta"]),
                L=float(fields.get("L", 1.0)),
                t=_vec(fields["t"]),
                h=_vec(fields["h"]),
            )
    except KeyError as exc:
        raise ValueError(f"signal spec {text!r} is missing field {exc}") from None
    raise ValueError(f"unknown signal spec {text!r}")


def signal_values(dims: Sequence[int], sig: SignalSpec) -> np.ndarray:
    dims = tuple(int(m) for m in dims)
    sig.check(dims)
    f = np.zeros(dims)
    if sig.kind == "rect":
        f[sig.rect.slices()] = sig.mu
    elif sig.kind == "bump":
        axes = [np.arange(1, m + 1) / m for m in dims]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        x = (mesh - np.asarray(sig.t)) / np.asarray(sig.h)
        psi = kernel_eval(Kernel.holder(sig.beta, len(dims)), x)
        f = sig.L * min(sig.h) ** sig.beta * psi
    return f


def signal_grid(dims: Sequence[int], sig: SignalSpec) -> GridField:
    return GridField(signal_values(dims, sig))


def observed_grid(dims: Sequence[int], sig: SignalSpec, rng: RngSpec) -> GridField:
    """``Y = f + noise`` at the lattice points."""
    return GridField(signal_values(dims, sig) + gaussian_values(dims, rng))


def replicate_values(dims: Sequence[int], sig: SignalSpec, seed: int, streams: range) -> np.ndarray:
    """Stack of observed grids for consecutive streams, shape ``(len(streams), *dims)``."""
    f = signal_values(dims, sig)
    out = np.empty((len(streams),) + tuple(dims))
    for i, s in enumerate(streams):
        out[i] = gaussian_values(dims, RngSpec(seed, s))
        out[i] += f
    return out
