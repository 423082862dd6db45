import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiscan.grid import Rect
from multiscan.simulation import (
    RngSpec,
    SignalSpec,
    gaussian_block,
    gaussian_grid,
    gaussian_values,
    observed_grid,
    parse_signal,
    replicate_values,
    signal_values,
    uniform_block,
)


class TestNoise:
    def test_deterministic(self):
        a = gaussian_grid((7, 9), RngSpec(42, 3))
        b = gaussian_grid((7, 9), RngSpec(42, 3))
        assert a == b
        assert np.array_equal(a.values, b.values)

    def test_distinct_keys_differ(self):
        base = gaussian_values((50,), RngSpec(1, 0))
        assert not np.array_equal(base, gaussian_values((50,), RngSpec(2, 0)))
        assert not np.array_equal(base, gaussian_values((50,), RngSpec(1, 1)))

    def test_pooled_moments(self):
        x = gaussian_values((1000, 1000), RngSpec(9))
        assert abs(x.mean()) < 0.01
        assert abs(x.var() - 1) < 0.02

    def test_stream_independence(self):
        a = gaussian_values((100_000,), RngSpec(5, 0))
        b = gaussian_values((100_000,), RngSpec(5, 1))
        assert abs(np.corrcoef(a, b)[0, 1]) <= 0.01

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 200), st.integers(0, 60))
    def test_any_slice_addressable(self, start, length):
        rng = RngSpec(77, 5)
        full = gaussian_block(rng, 0, 300)
        np.testing.assert_array_equal(gaussian_block(rng, start, start + length), full[start : start + length])

    def test_open_interval(self):
        u = uniform_block(RngSpec(0), 0, 100_000)
        assert u.min() > 0 and u.max() < 1

    @pytest.mark.parametrize("seed,stream", [(-1, 0), (0, 2**64)])
    def test_rng_range(self, seed, stream):
        with pytest.raises(ValueError, match="unsigned 64-bit"):
            RngSpec(seed, stream)

    def test_large_seed(self):
        assert gaussian_values((4,), RngSpec(2**64 - 1, 2**64 - 1)).shape == (4,)


class TestSignals:
    def test_null(self):
        assert not signal_values((4, 4), SignalSpec()).any()

    def test_rect(self):
        f = signal_values((5, 5), SignalSpec("rect", mu=2.0, rect=Rect((2, 1), (3, 3))))
        assert np.count_nonzero(f == 2.0) == 6
        assert np.count_nonzero(f) == 6

    def test_square_default_corner(self):
        sig = SignalSpec.square((6, 6), 2, 1.5)
        assert sig.rect == Rect((1, 1), (2, 2))
        with pytest.raises(ValueError):
            signal_values((6, 6), SignalSpec.square((6, 6), 7, 1.0))

    def test_bump_values(self):
        f = signal_values((100,), SignalSpec("bump", beta=1.0, L=1.0, t=(0.5,), h=(0.25,)))
        assert f[49] == pytest.approx(0.25, abs=1e-15)  # x = 0.5
        assert f[74] == 0.0  # x = 0.75
        # 0.625 is not on the 1/100 lattice; use m = 200 for that point
        f200 = signal_values((200,), SignalSpec("bump", beta=1.0, L=1.0, t=(0.5,), h=(0.25,)))
        assert f200[124] == pytest.approx(0.125, abs=1e-15)

    @pytest.mark.parametrize("beta", [0.3, 0.7, 1.0])
    def test_bump_holder(self, beta):
        sig = SignalSpec("bump", beta=beta, L=2.0, t=(0.4, 0.6), h=(0.2, 0.3))
        m = 30
        f = signal_values((m, m), sig)
        rng = np.random.default_rng(0)
        for _ in range(2000):
            i, j = rng.integers(0, m, size=(2, 2))
            dist = np.linalg.norm((i - j) / m)
            assert abs(f[tuple(i)] - f[tuple(j)]) <= sig.L * dist**beta + 1e-12

    def test_bump_support_check(self):
        with pytest.raises(ValueError, match="support"):
            SignalSpec("bump", beta=1.0, t=(0.1,), h=(0.2,))

    def test_observed_null_is_noise(self):
        rng = RngSpec(3, 4)
        assert observed_grid((5, 5), SignalSpec(), rng) == gaussian_grid((5, 5), rng)

    def test_observed_full_shift(self):
        rng = RngSpec(3, 4)
        sig = SignalSpec("rect", mu=0.7, rect=Rect((1, 1), (5, 5)))
        np.testing.assert_array_equal(observed_grid((5, 5), sig, rng).values, gaussian_values((5, 5), rng) + 0.7)

    def test_variance_inside_signal(self):
        sig = SignalSpec.square((6, 6), 3, 2.0)
        reps = replicate_values((6, 6), sig, 1, range(2000))
        inside = reps[:, :3, :3]
        assert abs(inside.mean() - 2.0) < 0.05
        assert abs(inside.var() - 1.0) < 0.1

    def test_replicates_match_single(self):
        sig = SignalSpec.square((4, 4), 2, 1.0)
        reps = replicate_values((4, 4), sig, 8, range(3, 6))
        for i, s in enumerate(range(3, 6)):
            np.testing.assert_array_equal(reps[i], observed_grid((4, 4), sig, RngSpec(8, s)).values)


class TestParse:
    @pytest.mark.parametrize(
        "sig",
        [
            SignalSpec(),
            SignalSpec("rect", mu=2.0, rect=Rect((1, 2), (3, 3))),
            SignalSpec("bump", beta=0.5, L=1.5, t=(0.5, 0.5), h=(0.25, 0.125)),
        ],
    )
    def test_round_trip(self, sig):
        assert parse_signal(str(sig)) == sig

    def test_examples(self):
        sig = parse_signal("rect:mu=2,lo=1;1,hi=3;3")
        assert sig.mu == 2.0 and sig.rect == Rect((1, 1), (3, 3))
        bump = parse_signal("bump:beta=1,L=1,t=0.5;0.5,h=0.25;0.25")
        assert bump.t == (0.5, 0.5) and bump.L == 1.0

    @pytest.mark.parametrize("text", ["rect:mu=2", "gauss:mu=1", "rect:mu2,lo=1,hi=1"])
    def test_errors(self, text):
        with pytest.raises(ValueError):
            parse_signal(text)
