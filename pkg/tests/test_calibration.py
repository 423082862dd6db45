import json
import math

import numpy as np
import pytest
from scipy import stats

import multiscan.calibration as cal
from multiscan.calibration import (
    CacheCorrupt,
    CacheMiss,
    CalibrationKey,
    CalibrationMismatch,
    FingerprintMismatch,
    PowerEntry,
    PowerReport,
    cache_find,
    cache_load,
    cache_store,
    calibrate,
    calibrate_many,
    calibrated,
    compare_tests,
    ecdf_points,
    null_ecdf,
    order_index,
    power,
)
from multiscan.penalties import PenaltySpec
from multiscan.simulation import SignalSpec
from multiscan.statistics import SideBounds, StatisticSpec

MS = StatisticSpec("multiscale")
SCAN = StatisticSpec("scan")
ALR = StatisticSpec("alr")


class TestQuantiles:
    def test_order_index(self):
        assert order_index(3000, 0.05) == 2849
        assert order_index(100, 0.05) == 94
        assert order_index(1000, 0.1) == 899

    def test_half_normal_one_by_one(self):
        rec = calibrate((1, 1), SCAN, (0.05,), reps=3000, seed=0)
        oracle = stats.halfnorm.ppf(0.95)
        assert oracle == pytest.approx(1.96, abs=1e-3)
        assert rec.kappa(0.05) == pytest.approx(oracle, abs=0.08)

    def test_kappa_is_order_statistic(self):
        rec = calibrate((6, 6), MS, (0.01, 0.05, 0.1), reps=500, seed=3)
        sample = rec.sample
        assert np.all(np.diff(sample) >= 0)
        for a in (0.01, 0.05, 0.1):
            assert rec.kappa(a) == sample[math.ceil((1 - a) * 500) - 1]
        assert rec.quantiles[0.01] >= rec.quantiles[0.05] >= rec.quantiles[0.1]

    def test_insufficient_reps(self):
        with pytest.raises(ValueError, match="insufficient"):
            calibrate((4, 4), MS, (0.01,), reps=200)
        with pytest.raises(ValueError, match="at least 100"):
            calibrate((4, 4), MS, (0.05,), reps=50)

    def test_deterministic(self):
        a = calibrate((5, 5), MS, reps=200, seed=9)
        b = calibrate((5, 5), MS, reps=200, seed=9)
        assert a == b
        assert calibrate((5, 5), MS, reps=200, seed=10) != a

    def test_many_equals_single(self):
        many = calibrate_many((5, 5), [MS, SCAN, ALR], reps=200, seed=4)
        for rec, spec in zip(many, [MS, SCAN, ALR]):
            assert rec == calibrate((5, 5), spec, reps=200, seed=4)


class TestEcdf:
    def test_shape(self):
        sample = null_ecdf((6, 6), MS, reps=300, seed=1)
        x, y = ecdf_points(sample)
        assert len(x) == 300
        assert np.all(np.diff(x) >= 0) and np.all(np.diff(y) > 0)
        assert 0 < y[0] and y[-1] == 1.0

    def test_two_seeds_ks(self):
        a = null_ecdf((8, 8), MS, reps=3000, seed=1)
        b = null_ecdf((8, 8), MS, reps=3000, seed=2)
        ks = stats.ks_2samp(a, b).statistic
        crit = 1.628 * math.sqrt(2 / 3000)  # 1% two-sample critical value
        assert ks < crit


class TestPower:
    def test_size_at_null(self):
        dims = (8, 8)
        recs = calibrate_many(dims, [MS, SCAN, ALR], reps=2000, seed=0)
        for spec, rec in zip([MS, SCAN, ALR], recs):
            entry = power(dims, spec, SignalSpec(), rec, reps=2000, seed=1)
            se = math.sqrt(0.05 * 0.95 / 2000)
            assert abs(entry.power - 0.05) <= 3 * se, spec.kind

    def test_key_mismatch(self):
        rec = calibrate((5, 5), MS, reps=100, seed=0)
        with pytest.raises(CalibrationMismatch, match="calibration key mismatch"):
            power((6, 6), MS, SignalSpec(), rec, reps=10)
        with pytest.raises(CalibrationMismatch, match="calibration key mismatch"):
            power((5, 5), SCAN, SignalSpec(), rec, reps=10)

    def test_missing_calibration(self):
        with pytest.raises(ValueError, match="missing calibration"):
            compare_tests((5, 5), [(2, 1.0)], [])

    def test_monotone_in_mu(self):
        dims = (10, 10)
        recs = calibrate_many(dims, [MS, SCAN], reps=500, seed=0)
        mus = [0.0, 0.5, 1.0, 1.5, 2.0]
        report = compare_tests(dims, [(3, mu) for mu in mus], recs, reps=300, seed=1)
        for spec in (MS, SCAN):
            rates = [report.rate(spec.label(), 3, mu) for mu in mus]
            for lo, hi in zip(rates, rates[1:]):
                se = math.sqrt((lo * (1 - lo) + hi * (1 - hi)) / 300)
                assert hi >= lo - 2 * se
            assert rates[-1] > rates[0]

    def test_half_width(self):
        assert PowerEntry("scan", "", 1, 1.0, 0.5, 100).half_width == pytest.approx(1.96 * 0.05)

    def test_report_csv_round_trip(self, tmp_path):
        report = PowerReport([PowerEntry("scan", "", 1, 5.5, 0.861, 1000), PowerEntry("alr", "", None, 0.05, 0.25, 1000)])
        report.to_csv(tmp_path / "p.csv")
        assert (tmp_path / "p.csv").read_text().splitlines()[0] == "k,mu,statistic,power,half_width,R"
        back = PowerReport.from_csv(tmp_path / "p.csv")
        assert [(r.statistic, r.k, r.mu, r.power, r.reps) for r in back.rows] == [
            (r.statistic, r.k, r.mu, r.power, r.reps) for r in report.rows
        ]


class TestKey:
    def test_canonical(self):
        key = CalibrationKey((50, 50), MS, 3000, 7)
        text = key.canonical()
        assert text.startswith("d=2;dims=50x50;stat=multiscale;kernel=indicator;V=1.0;R=3000;seed=7")
        assert len(key.fingerprint()) == 16

    @pytest.mark.parametrize(
        "spec",
        [MS, StatisticSpec("multiscale-star", "holder:0.5", PenaltySpec.from_v(4.0), SideBounds(2, 5)), StatisticSpec("alr", scales=SideBounds(3))],
    )
    def test_dict_round_trip(self, spec):
        key = CalibrationKey((4, 5), spec, 100, 2)
        assert CalibrationKey.from_dict(json.loads(json.dumps(key.to_dict()))) == key

    def test_fields_change_fingerprint(self):
        base = CalibrationKey((5, 5), MS, 100, 0)
        others = [
            CalibrationKey((5, 6), MS, 100, 0),
            CalibrationKey((5, 5), SCAN, 100, 0),
            CalibrationKey((5, 5), MS, 101, 0),
            CalibrationKey((5, 5), MS, 100, 1),
            CalibrationKey((5, 5), StatisticSpec("multiscale", penalty=PenaltySpec.from_v(2)), 100, 0),
            CalibrationKey((5, 5), StatisticSpec("multiscale", scales=SideBounds(2)), 100, 0),
        ]
        assert len({k.fingerprint() for k in others} | {base.fingerprint()}) == len(others) + 1


class TestCache:
    def test_round_trip(self, tmp_path):
        rec = calibrate((5, 5), MS, (0.05, 0.1), reps=200, seed=1)
        path = tmp_path / "c.json"
        cache_store(rec, path)
        back = cache_load(path, rec.key)
        assert back == rec
        assert np.array_equal(back.sample, rec.sample)
        assert back.kappa(0.05) == rec.kappa(0.05)

    def test_coexist(self, tmp_path):
        path = tmp_path / "c.json"
        a = calibrate((5, 5), MS, reps=100, seed=1)
        b = calibrate((5, 5), SCAN, reps=100, seed=1)
        cache_store(a, path)
        cache_store(b, path)
        assert cache_load(path, a.key) == a and cache_load(path, b.key) == b
        assert len(json.loads(path.read_text())) == 2
        assert cache_find(path, (5, 5), SCAN) == [b]

    def test_altered_dims(self, tmp_path):
        path = tmp_path / "c.json"
        rec = calibrate((5, 5), MS, reps=100, seed=1)
        fp = cache_store(rec, path)
        data = json.loads(path.read_text())
        data[fp]["key"]["dims"] = [5, 6]
        path.write_text(json.dumps(data))
        with pytest.raises(FingerprintMismatch, match="fingerprint mismatch"):
            cache_load(path, rec.key)

    def test_miss(self, tmp_path):
        path = tmp_path / "c.json"
        cache_store(calibrate((5, 5), MS, reps=100, seed=1), path)
        with pytest.raises(CacheMiss):
            cache_load(path, CalibrationKey((6, 6), MS, 100, 1))
        with pytest.raises(CacheMiss):
            cache_load(tmp_path / "absent.json", CalibrationKey((6, 6), MS, 100, 1))

    def test_corrupt(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        with pytest.raises(CacheCorrupt):
            cache_load(path, CalibrationKey((5, 5), MS, 100, 1))

    def test_get_or_compute(self, tmp_path, monkeypatch):
        path = tmp_path / "c.json"
        first = calibrated((5, 5), [MS, SCAN], reps=100, seed=2, cache=path)

        def boom(*args, **kwargs):
            raise AssertionError("should have been served from the cache")

        monkeypatch.setattr(cal, "calibrate_many", boom)
        assert calibrated((5, 5), [MS, SCAN], reps=100, seed=2, cache=path) == first
