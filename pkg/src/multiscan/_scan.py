"""Compiled rectangle sweeps for the indicator kernel, d = 1, 2, 3.

One pass over every rectangle produces four reductions at once:

    vals[0]  max (|z| - pen) * inv_dnorm     multiscale T
    vals[1]  max |z| - pen                   T*
    vals[2]  max |z|                         scan
    vals[3]  log sum exp(z^2 / 2)            ALR numerator (only if want_alr)

where ``z`` is the rectangle sum over sqrt(point count) and the per-scale
tables are indexed by point count. ``args[i]`` holds the first maximizer as
``(lengths..., lo...)`` with 1-based ``lo``. Loops run lengths-major, then
``lo`` lexicographic; updates use strict ``>`` so ties keep the earliest.
"""

import math

import numba as nb
import numpy as np


@nb.njit(cache=True)
def prefix_1d(g):
    m = g.shape[0]
    P = np.zeros(m + 1)
    s = 0.0
    for i in range(m):
        s += g[i]
        P[i + 1] = s
    return P


@nb.njit(cache=True)
def prefix_2d(g):
    # same summation order as np.cumsum over axis 0, then axis 1
    m1, m2 = g.shape
    P = np.zeros((m1 + 1, m2 + 1))
    for i in range(m1):
        for j in range(m2):
            P[i + 1, j + 1] = g[i, j]
    for i in range(1, m1):
        for j in range(1, m2 + 1):
            P[i + 1, j] = P[i, j] + P[i + 1, j]
    for i in range(1, m1 + 1):
        for j in range(1, m2):
            P[i, j + 1] = P[i, j] + P[i, j + 1]
    return P


@nb.njit(cache=True)
def prefix_3d(g):
    m1, m2, m3 = g.shape
    P = np.zeros((m1 + 1, m2 + 1, m3 + 1))
    for i in range(m1):
        for j in range(m2):
            for k in range(m3):
                P[i + 1, j + 1, k + 1] = g[i, j, k]
    for i in range(1, m1):
        for j in range(1, m2 + 1):
            for k in range(1, m3 + 1):
                P[i + 1, j, k] = P[i, j, k] + P[i + 1, j, k]
    for i in range(1, m1 + 1):
        for j in range(1, m2):
            for k in range(1, m3 + 1):
                P[i, j + 1, k] = P[i, j, k] + P[i, j + 1, k]
    for i in range(1, m1 + 1):
        for j in range(1, m2 + 1):
            for k in range(1, m3):
                P[i, j, k + 1] = P[i, j, k] + P[i, j, k + 1]
    return P


@nb.njit(cache=True)
def _init(vals, args):
    vals[0] = -np.inf
    vals[1] = -np.inf
    vals[2] = -np.inf
    vals[3] = -np.inf
    args[:, :] = 0


@nb.njit(cache=True)
def sweep_1d(P, lmin, lmax, isq, pen, idn, want_alr, vals, args):
    _init(vals, args)
    m1 = P.shape[0] - 1
    mx = -np.inf
    s = 0.0
    for l1 in range(lmin[0], lmax[0] + 1):
        c = l1
        iq = isq[c]
        g = pen[c]
        dn = idn[c]
        for a in range(m1 - l1 + 1):
            z = abs(P[a + l1] - P[a]) * iq
            t = z - g
            u = t * dn
            if u > vals[0]:
                vals[0] = u
                args[0, 0] = l1
                args[0, 1] = a + 1
            if t > vals[1]:
                vals[1] = t
                args[1, 0] = l1
                args[1, 1] = a + 1
            if z > vals[2]:
                vals[2] = z
                args[2, 0] = l1
                args[2, 1] = a + 1
            if want_alr:
                x = 0.5 * z * z
                if x > mx:
                    s = s * math.exp(mx - x) + 1.0
                    mx = x
                else:
                    s += math.exp(x - mx)
    if want_alr and s > 0.0:
        vals[3] = mx + math.log(s)
    args[3, :] = args[2, :]


@nb.njit(cache=True)
def sweep_2d(P, lmin, lmax, isq, pen, idn, want_alr, vals, args):
    _init(vals, args)
    m1 = P.shape[0] - 1
    m2 = P.shape[1] - 1
    best_u = -np.inf
    best_t = -np.inf
    best_z = -np.inf
    mx = -np.inf
    s = 0.0
    for l1 in range(lmin[0], lmax[0] + 1):
        for l2 in range(lmin[1], lmax[1] + 1):
            c = l1 * l2
            iq = isq[c]
            g = pen[c]
            dn = idn[c]
            for a in range(m1 - l1 + 1):
                r0 = P[a]
                r1 = P[a + l1]
                for b in range(m2 - l2 + 1):
                    z = abs(r1[b + l2] - r1[b] - r0[b + l2] + r0[b]) * iq
                    t = z - g
                    u = t * dn
                    if u > best_u:
                        best_u = u
                        args[0, 0] = l1
                        args[0, 1] = l2
                        args[0, 2] = a + 1
                        args[0, 3] = b + 1
                    if t > best_t:
                        best_t = t
                        args[1, 0] = l1
                        args[1, 1] = l2
                        args[1, 2] = a + 1
                        args[1, 3] = b + 1
                    if z > best_z:
                        best_z = z
                        args[2, 0] = l1
                        args[2, 1] = l2
                        args[2, 2] = a + 1
                        args[2, 3] = b + 1
                    if want_alr:
                        x = 0.5 * z * z
                        if x > mx:
                            s = s * math.exp(mx - x) + 1.0
                            mx = x
                        else:
                            s += math.exp(x - mx)
    vals[0] = best_u
    vals[1] = best_t
    vals[2] = best_z
    if want_alr and s > 0.0:
        vals[3] = mx + math.log(s)
    args[3, :] = args[2, :]


@nb.njit(cache=True)
def sweep_3d(P, lmin, lmax, isq, pen, idn, want_alr, vals, args):
    _init(vals, args)
    m1 = P.shape[0] - 1
    m2 = P.shape[1] - 1
    m3 = P.shape[2] - 1
    best_u = -np.inf
    best_t = -np.inf
    best_z = -np.inf
    mx = -np.inf
    s = 0.0
    for l1 in range(lmin[0], lmax[0] + 1):
        for l2 in range(lmin[1], lmax[1] + 1):
            for l3 in range(lmin[2], lmax[2] + 1):
                c = l1 * l2 * l3
                iq = isq[c]
                g = pen[c]
                dn = idn[c]
                for a in range(m1 - l1 + 1):
                    for b in range(m2 - l2 + 1):
                        for e in range(m3 - l3 + 1):
                            v = (
                                P[a + l1, b + l2, e + l3]
                                - P[a, b + l2, e + l3]
                                - P[a + l1, b, e + l3]
                                - P[a + l1, b + l2, e]
                                + P[a, b, e + l3]
                                + P[a, b + l2, e]
                                + P[a + l1, b, e]
                                - P[a, b, e]
                            )
                            z = abs(v) * iq
                            t = z - g
                            u = t * dn
                            if u > best_u:
                                best_u = u
                                args[0, 0] = l1
                                args[0, 1] = l2
                                args[0, 2] = l3
                                args[0, 3] = a + 1
                                args[0, 4] = b + 1
                                args[0, 5] = e + 1
                            if t > best_t:
                                best_t = t
                                args[1, 0] = l1
                                args[1, 1] = l2
                                args[1, 2] = l3
                                args[1, 3] = a + 1
                                args[1, 4] = b + 1
                                args[1, 5] = e + 1
                            if z > best_z:
                                best_z = z
                                args[2, 0] = l1
                                args[2, 1] = l2
                                args[2, 2] = l3
                                args[2, 3] = a + 1
                                args[2, 4] = b + 1
                                args[2, 5] = e + 1
                            if want_alr:
                                x = 0.5 * z * z
                                if x > mx:
                                    s = s * math.exp(mx - x) + 1.0
                                    mx = x
                                else:
                                    s += math.exp(x - mx)
    vals[0] = best_u
    vals[1] = best_t
    vals[2] = best_z
    if want_alr and s > 0.0:
        vals[3] = mx + math.log(s)
    args[3, :] = args[2, :]


@nb.njit(cache=True, parallel=True)
def sweep_batch_1d(grids, lmin, lmax, isq, pen, idn, want_alr, vals, args):
    for i in nb.prange(grids.shape[0]):
        sweep_1d(prefix_1d(grids[i]), lmin, lmax, isq, pen, idn, want_alr, vals[i], args[i])


@nb.njit(cache=True, parallel=True)
def sweep_batch_2d(grids, lmin, lmax, isq, pen, idn, want_alr, vals, args):
    for i in nb.prange(grids.shape[0]):
        sweep_2d(prefix_2d(grids[i]), lmin, lmax, isq, pen, idn, want_alr, vals[i], args[i])


@nb.njit(cache=True, parallel=True)
def sweep_batch_3d(grids, lmin, lmax, isq, pen, idn, want_alr, vals, args):
    for i in nb.prange(grids.shape[0]):
        sweep_3d(prefix_3d(grids[i]), lmin, lmax, isq, pen, idn, want_alr, vals[i], args[i])


BATCH_SWEEPS = {1: sweep_batch_1d, 2: sweep_batch_2d, 3: sweep_batch_3d}
SINGLE_SWEEPS = {1: sweep_1d, 2: sweep_2d, 3: sweep_3d}
