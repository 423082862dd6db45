"""Monte Carlo critical values, null ECDFs, power tables and the calibration cache.

Replication ``s`` of a run with base seed ``seed`` always uses the noise
stream ``RngSpec(seed, s)``. Results are gathered in stream order, so every
output depends only on the seed and replication count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .penalties import PenaltySpec
from .simulation import SignalSpec, replicate_values
from .statistics import SideBounds, StatisticSpec, evaluate_batch, set_threads

DEFAULT_CALIBRATION_REPS = 3000
DEFAULT_POWER_REPS = 1000
# the rectangle family and scale convention calibrations are valid for
FAMILY = "all-ranges"
SCALE_CONVENTION = "point-fraction"
_BATCH_BYTES = 1 << 26


class CalibrationMismatch(ValueError):
    pass


class FingerprintMismatch(ValueError):
    pass


class CacheMiss(KeyError):
    pass


class CacheCorrupt(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationKey:
    dims: tuple[int, ...]
    spec: StatisticSpec
    reps: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(m) for m in self.dims))

    @property
    def d(self) -> int:
        return len(self.dims)

    def canonical(self) -> str:
        s = self.spec
        scales = str(s.scales) if s.scales is not None else "all"
        return (
            f"d={self.d};dims={'x'.join(map(str, self.dims))};stat={s.kind};kernel={s.kernel};"
            f"V={s.penalty.v!r};R={self.reps};seed={self.seed};scales={scales};"
            f"family={FAMILY};r={SCALE_CONVENTION}"
        )

    def fingerprint(self) -> str:
        return hashlib.blake2b(self.canonical().encode(), digest_size=8).hexdigest()

    def to_dict(self) -> dict:
        s = self.spec
        return {
            "d": self.d,
            "dims": list(self.dims),
            "stat": s.kind,
            "kernel": s.kernel,
            "V": s.penalty.v,
            "min_side": s.scales.min_side if s.scales else None,
            "max_side": s.scales.max_side if s.scales else None,
            "R": self.reps,
            "seed": self.seed,
            "family": FAMILY,
            "r": SCALE_CONVENTION,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationKey":
        if data.get("family", FAMILY) != FAMILY or data.get("r", SCALE_CONVENTION) != SCALE_CONVENTION:
            raise FingerprintMismatch("fingerprint mismatch: calibration uses another rectangle family")
        if data["d"] != len(data["dims"]):
            raise FingerprintMismatch("fingerprint mismatch: d disagrees with dims")
        scales = None
        if data.get("min_side") is not None:
            scales = SideBounds(data["min_side"], data.get("max_side"))
        spec = StatisticSpec(data["stat"], data["kernel"], PenaltySpec.from_v(data["V"]), scales)
        return cls(tuple(data["dims"]), spec, int(data["R"]), int(data["seed"]))


@dataclass
class CalibrationRecord:
    """Null quantiles ``kappa_alpha`` (ALR on the log scale) with the sorted null sample."""

    key: CalibrationKey
    quantiles: dict[float, float]
    sample: np.ndarray | None = field(default=None, repr=False)

    def kappa(self, alpha: float) -> float:
        if alpha in self.quantiles:
            return self.quantiles[alpha]
        if self.sample is None:
            raise KeyError(f"no quantile stored for alpha={alpha} and no sample kept")
        return order_quantile(self.sample, alpha)

    def __eq__(self, other):
        if not isinstance(other, CalibrationRecord):
            return NotImplemented
        same_sample = (self.sample is None and other.sample is None) or (
            self.sample is not None and other.sample is not None and np.array_equal(self.sample, other.sample)
        )
        return self.key == other.key and self.quantiles == other.quantiles and same_sample


def order_index(n: int, alpha: float) -> int:
    """0-based index of the ceil((1 - alpha) n)-th order statistic."""
    k = math.ceil(round((1.0 - alpha) * n, 9))
    return min(max(k, 1), n) - 1


def order_quantile(sorted_sample: np.ndarray, alpha: float) -> float:
    return float(sorted_sample[order_index(len(sorted_sample), alpha)])


def _batch_size(dims: Sequence[int]) -> int:
    return max(1, _BATCH_BYTES // (8 * math.prod(dims)))


def simulate_statistics(
    dims: Sequence[int],
    specs: Sequence[StatisticSpec],
    sig: SignalSpec,
    reps: int,
    seed: int,
    threads: int | None = None,
) -> np.ndarray:
    """Statistic values for replications ``0..reps-1``, shape ``(reps, len(specs))``."""
    set_threads(threads)
    dims = tuple(dims)
    out = np.empty((reps, len(specs)))
    step = _batch_size(dims)
    for start in range(0, reps, step):
        streams = range(start, min(reps, start + step))
        grids = replicate_values(dims, sig, seed, streams)
        out[streams.start : streams.stop] = evaluate_batch(grids, specs)
    return out


def _check_levels(alpha_levels: Iterable[float], reps: int) -> list[float]:
    levels = sorted(float(a) for a in alpha_levels)
    if reps < 100:
        raise ValueError(f"need at least 100 replications, got {reps}")
    for a in levels:
        if not 0 < a < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {a}")
        if a * reps < 5:
            raise ValueError(f"insufficient replications: alpha={a} needs alpha*R >= 5 (R={reps})")
    return levels


def calibrate_many(
    dims: Sequence[int],
    specs: Sequence[StatisticSpec],
    alpha_levels: Iterable[float] = (0.05,),
    reps: int = DEFAULT_CALIBRATION_REPS,
    seed: int = 0,
    threads: int | None = None,
    keep_sample: bool = True,
) -> list[CalibrationRecord]:
    """Calibrate several statistics on the same null replications."""
    levels = _check_levels(alpha_levels, reps)
    values = simulate_statistics(dims, specs, SignalSpec(), reps, seed, threads)
    records = []
    for j, spec in enumerate(specs):
        sample = np.sort(values[:, j])
        quantiles = {a: order_quantile(sample, a) for a in levels}
        key = CalibrationKey(tuple(dims), spec, reps, seed)
        records.append(CalibrationRecord(key, quantiles, sample if keep_sample else None))
    return records


def calibrate(
    dims: Sequence[int],
    spec: StatisticSpec,
    alpha_levels: Iterable[float] = (0.05,),
    reps: int = DEFAULT_CALIBRATION_REPS,
    seed: int = 0,
    threads: int | None = None,
    keep_sample: bool = True,
) -> CalibrationRecord:
    return calibrate_many(dims, [spec], alpha_levels, reps, seed, threads, keep_sample)[0]


def null_ecdf(dims: Sequence[int], spec: StatisticSpec, reps: int = DEFAULT_CALIBRATION_REPS, seed: int = 0, threads: int | None = None) -> np.ndarray:
    """Sorted null sample of the statistic."""
    if reps < 100:
        raise ValueError(f"need at least 100 replications, got {reps}")
    return np.sort(simulate_statistics(dims, [spec], SignalSpec(), reps, seed, threads)[:, 0])


def ecdf_points(sorted_sample: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = len(sorted_sample)
    return np.asarray(sorted_sample), np.arange(1, n + 1) / n


# --- power -----------------------------------------------------------------


@dataclass(frozen=True)
class PowerEntry:
    statistic: str
    signal: str
    k: int | None
    mu: float
    power: float
    reps: int

    @property
    def half_width(self) -> float:
        return 1.96 * math.sqrt(self.power * (1.0 - self.power) / self.reps)


@dataclass
class PowerReport:
    rows: list[PowerEntry] = field(default_factory=list)

    def rate(self, statistic: str, k: int | None, mu: float) -> float:
        for row in self.rows:
            if row.statistic == statistic and row.k == k and row.mu == mu:
                return row.power
        raise KeyError((statistic, k, mu))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "mu", "statistic", "power", "half_width", "R"])
            for row in self.rows:
                w.writerow(["" if row.k is None else row.k, repr(row.mu), row.statistic, repr(row.power), repr(row.half_width), row.reps])

    @classmethod
    def from_csv(cls, path: str | Path) -> "PowerReport":
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                k = int(rec["k"]) if rec["k"] else None
                rows.append(PowerEntry(rec["statistic"], "", k, float(rec["mu"]), float(rec["power"]), int(rec["R"])))
        return cls(rows)


def _check_calibration(dims, spec: StatisticSpec, record: CalibrationRecord) -> None:
    if record.key.dims != tuple(dims) or record.key.spec != spec:
        raise CalibrationMismatch(
            f"calibration key mismatch: record is for {record.key.canonical()}, requested dims={tuple(dims)} stat={spec.label()}"
        )


def power_many(
    dims: Sequence[int],
    specs: Sequence[StatisticSpec],
    sig: SignalSpec,
    calibrations: Sequence[CalibrationRecord],
    reps: int = DEFAULT_POWER_REPS,
    seed: int = 1,
    alpha: float = 0.05,
    threads: int | None = None,
    k: int | None = None,
) -> list[PowerEntry]:
    """Rejection rates of several tests on the same alternative replications."""
    for spec, rec in zip(specs, calibrations, strict=True):
        _check_calibration(dims, spec, rec)
    values = simulate_statistics(dims, specs, sig, reps, seed, threads)
    out = []
    for j, (spec, rec) in enumerate(zip(specs, calibrations)):
        rate = float(np.mean(values[:, j] > rec.kappa(alpha)))
        out.append(PowerEntry(spec.label(), str(sig), k, sig.mu, rate, reps))
    return out


def power(
    dims: Sequence[int],
    spec: StatisticSpec,
    sig: SignalSpec,
    calibration: CalibrationRecord,
    reps: int = DEFAULT_POWER_REPS,
    seed: int = 1,
    alpha: float = 0.05,
    threads: int | None = None,
) -> PowerEntry:
    """Fraction of replications under ``sig`` where the statistic exceeds ``kappa_alpha``."""
    return power_many(dims, [spec], sig, [calibration], reps, seed, alpha, threads)[0]


def compare_tests(
    dims: Sequence[int],
    cells: Iterable[tuple[int, float]],
    calibrations: Sequence[CalibrationRecord],
    reps: int = DEFAULT_POWER_REPS,
    seed: int = 1,
    alpha: float = 0.05,
    threads: int | None = None,
    lo: Sequence[int] | None = None,
) -> PowerReport:
    """Power table over ``(k, mu)`` cells for square signals of side ``k`` points."""
    if not calibrations:
        raise ValueError("missing calibration: pass one record per statistic")
    specs = [rec.key.spec for rec in calibrations]
    report = PowerReport()
    for k, mu in cells:
        sig = SignalSpec.square(dims, k, mu, lo)
        report.rows.extend(power_many(dims, specs, sig, calibrations, reps, seed, alpha, threads, k=k))
    return report


# --- cache -----------------------------------------------------------------


def _record_to_json(record: CalibrationRecord) -> dict:
    return {
        "key": record.key.to_dict(),
        "canonical": record.key.canonical(),
        "quantiles": {repr(a): v for a, v in sorted(record.quantiles.items())},
        "sample": None if record.sample is None else [float(x) for x in record.sample],
    }


def _read_cache(path: Path) -> dict:
    if not path.exists():
        return {}
    try:
        data = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CacheCorrupt(f"corrupt cache file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise CacheCorrupt(f"corrupt cache file {path}: top level is not an object")
    return data


def cache_store(record: CalibrationRecord, path: str | Path) -> str:
    """Add or replace the record in the JSON cache at ``path``; returns its fingerprint."""
    path = Path(path)
    data = _read_cache(path)
    fp = record.key.fingerprint()
    data[fp] = _record_to_json(record)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
    os.replace(tmp, path)
    return fp


def _entry_to_record(fp: str, entry: dict) -> CalibrationRecord:
    try:
        key = CalibrationKey.from_dict(entry["key"])
        quantiles = {float(a): float(v) for a, v in entry["quantiles"].items()}
        sample = entry.get("sample")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FingerprintMismatch):
            raise
        raise CacheCorrupt(f"corrupt cache entry {fp}: {exc}") from None
    if key.fingerprint() != fp:
        raise FingerprintMismatch(f"fingerprint mismatch: entry {fp} holds key {key.canonical()}")
    return CalibrationRecord(key, quantiles, None if sample is None else np.asarray(sample, dtype=np.float64))


def cache_load(path: str | Path, key: CalibrationKey) -> CalibrationRecord:
    """Load the record stored under ``key``; validates the stored key against its fingerprint."""
    data = _read_cache(Path(path))
    fp = key.fingerprint()
    if fp not in data:
        raise CacheMiss(f"cache miss: no calibration for {key.canonical()} in {path}")
    record = _entry_to_record(fp, data[fp])
    if record.key != key:
        raise FingerprintMismatch(f"fingerprint mismatch: requested {key.canonical()}, found {record.key.canonical()}")
    return record


def cache_find(path: str | Path, dims: Sequence[int], spec: StatisticSpec) -> list[CalibrationRecord]:
    """All cached records for ``(dims, spec)``, whatever their replication count and seed."""
    data = _read_cache(Path(path))
    out = []
    for fp, entry in sorted(data.items()):
        rec = _entry_to_record(fp, entry)
        if rec.key.dims == tuple(dims) and rec.key.spec == spec:
            out.append(rec)
    return out


def calibrated(
    dims: Sequence[int],
    specs: Sequence[StatisticSpec],
    alpha_levels: Iterable[float] = (0.05,),
    reps: int = DEFAULT_CALIBRATION_REPS,
    seed: int = 0,
    cache: str | Path | None = None,
    threads: int | None = None,
) -> list[CalibrationRecord]:
    """Load calibrations from ``cache`` where present, simulate and store the rest."""
    levels = list(alpha_levels)
    found: dict[int, CalibrationRecord] = {}
    if cache is not None:
        for j, spec in enumerate(specs):
            try:
                rec = cache_load(cache, CalibrationKey(tuple(dims), spec, reps, seed))
            except CacheMiss:
                continue
            if all(a in rec.quantiles or rec.sample is not None for a in levels):
                found[j] = rec
    missing = [j for j in range(len(specs)) if j not in found]
    if missing:
        fresh = calibrate_many(dims, [specs[j] for j in missing], levels, reps, seed, threads)
        for j, rec in zip(missing, fresh):
            found[j] = rec
            if cache is not None:
                cache_store(rec, cache)
    return [found[j] for j in range(len(specs))]
