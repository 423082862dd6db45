import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multiscan.theory import (
    BoxParam,
    PackingResult,
    candidate_boxes,
    finest_scale_growth,
    finest_scale_statistic,
    greedy_packing,
    packing_bound_sweep,
    packing_is_valid,
    sym_diff_rho,
    v_less_one_divergence,
)


@st.composite
def boxes(draw, d=2):
    h = [draw(st.floats(0.01, 0.5)) for _ in range(d)]
    t = [draw(st.floats(hk, 1 - hk)) for hk in h]
    return BoxParam(tuple(t), tuple(h))


class TestRho:
    def test_identical(self):
        a = BoxParam((0.5, 0.5), (0.2, 0.1))
        assert sym_diff_rho(a, a) == 0.0

    def test_disjoint(self):
        a = BoxParam((0.2,), (0.1,))
        b = BoxParam((0.7,), (0.2,))
        assert sym_diff_rho(a, b) == pytest.approx(math.sqrt(0.2 + 0.4), rel=1e-15)

    def test_overlapping_intervals(self):
        a = BoxParam((0.4,), (0.2,))  # (0.2, 0.6)
        b = BoxParam((0.6,), (0.2,))  # (0.4, 0.8)
        assert sym_diff_rho(a, b) == pytest.approx(math.sqrt(0.4), rel=1e-12)

    def test_invalid_box(self):
        with pytest.raises(ValueError):
            BoxParam((0.1,), (0.2,))

    @given(boxes(), boxes(), boxes())
    def test_pseudometric(self, a, b, c):
        assert sym_diff_rho(a, b) == sym_diff_rho(b, a)
        assert sym_diff_rho(a, c) <= sym_diff_rho(a, b) + sym_diff_rho(b, c) + 1e-12

    @given(boxes(), boxes())
    def test_volume_bound(self, a, b):
        assert b.volume <= a.volume + sym_diff_rho(a, b) ** 2 + 1e-12


class TestPacking:
    def test_empty_candidates(self):
        res = greedy_packing(1e-6, 0.5, 16, 1)
        assert res.count == 0

    def test_nonempty(self):
        assert greedy_packing(1.0, 1.0, 64, 1).count >= 1

    def test_lattice_res_minimum(self):
        with pytest.raises(ValueError):
            greedy_packing(0.5, 0.5, 4, 1)

    def test_reversed_order_same_order_of_magnitude(self):
        a = greedy_packing(0.5, 0.5, 128, 1)
        b = greedy_packing(0.5, 0.5, 128, 1, reverse=True)
        assert packing_is_valid(a) and packing_is_valid(b)
        assert 0.5 <= a.count / b.count <= 2.0

    def test_maximal(self):
        res = greedy_packing(0.25, 0.5, 32, 1)
        t, h = candidate_boxes(1, 0.25, 32)
        chosen = [BoxParam(tuple(c), tuple(w)) for c, w in zip(res.centers, res.halfwidths)]
        thr = math.sqrt(0.5 * 0.25)
        for c, w in zip(t, h):
            cand = BoxParam(tuple(c), tuple(w))
            assert any(sym_diff_rho(cand, s) <= thr + 1e-15 for s in chosen)

    def test_ratio_formula(self):
        res = PackingResult(1, 0.5, 0.5, 10, np.empty((0, 1)), np.empty((0, 1)))
        assert res.bound_ratio == 10 * 0.5**2 * 0.5
        res2 = PackingResult(2, 0.25, 0.5, 10, np.empty((0, 2)), np.empty((0, 2)))
        assert res2.bound_ratio == pytest.approx(10 * 0.5**4 * 0.25 / math.log(math.e / 0.25))

    def test_axis_relabel(self):
        # the candidate set is symmetric under swapping axes, so the greedy count is too
        res = greedy_packing(0.25, 0.5, 32, 2)
        swapped = PackingResult(2, 0.25, 0.5, res.count, res.centers[:, ::-1].copy(), res.halfwidths[:, ::-1].copy())
        assert packing_is_valid(swapped)
        t, h = candidate_boxes(2, 0.25, 32)
        assert {tuple(r) for r in np.hstack([t, h])} == {tuple(r) for r in np.hstack([t[:, ::-1], h[:, ::-1]])}

    def test_sweep_bounded(self):
        results = packing_bound_sweep(2, [1, 0.5, 0.25], [1, 0.5], 64)
        assert len(results) == 6
        base = results[0].bound_ratio
        assert all(packing_is_valid(r) for r in results)
        assert max(r.bound_ratio for r in results) <= 4 * base


class TestDivergence:
    def test_rejects_v_at_least_one(self):
        with pytest.raises(ValueError, match="not in divergence regime"):
            v_less_one_divergence(2, 1.0, [4, 8], 3)

    def test_m_list_increasing(self):
        with pytest.raises(ValueError):
            finest_scale_growth(2, 0.5, [8, 4], 3)

    def test_finest_cells_independent(self):
        # neighbouring single-point cells are disjoint, hence uncorrelated
        from multiscan.simulation import RngSpec, gaussian_values

        z = gaussian_values((2, 100_000), RngSpec(3))
        assert abs(np.corrcoef(z[0], z[1])[0, 1]) <= 0.02

    def test_statistic_definition(self):
        from multiscan.penalties import gamma_v_pen
        from multiscan.simulation import RngSpec, gaussian_values

        vals = finest_scale_statistic(2, 0.25, 8, 3, base_seed=5)
        for s, v in enumerate(vals):
            z = gaussian_values((8, 8), RngSpec(5, (8 << 32) | s))
            assert v == np.abs(z).max() - gamma_v_pen(8.0**-2, 0.25)

    def test_growth_table(self):
        rows = v_less_one_divergence(2, 0.25, [8, 32], 10)
        assert [r.m for r in rows] == [8, 32]
        assert rows[0].reference == pytest.approx(0.5 * math.sqrt(4 * math.log(8)))
        assert rows[1].mean > rows[0].mean
