"""Command-line interface.

Commands: ``calibrate``, ``detect``, ``power``, ``null-ecdf``,
``packing-check`` and ``vlt1``. Each run writes its result file and a sidecar
``<out>.manifest.json`` with the configuration and git-style blob hashes of
every input and output file.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import __version__
from .calibration import (
    DEFAULT_CALIBRATION_REPS,
    DEFAULT_POWER_REPS,
    CacheMiss,
    CalibrationKey,
    CalibrationRecord,
    PowerReport,
    _record_to_json,
    cache_find,
    cache_load,
    calibrate_many,
    calibrated,
    compare_tests,
    ecdf_points,
    null_ecdf,
    power_many,
)
from .grid import read_grid
from .penalties import PenaltySpec
from .simulation import parse_signal
from .statistics import KINDS, PenaltyNotApplicable, SideBounds, StatisticSpec, evaluate, set_threads
from .svg import emit_svg
from .theory import packing_bound_sweep, packing_is_valid, v_less_one_divergence

COMMANDS = ("calibrate", "detect", "power", "null-ecdf", "packing-check", "vlt1")
FORMATS = {
    "calibrate": ("json", "csv"),
    "detect": ("json", "csv"),
    "power": ("csv", "json"),
    "null-ecdf": ("csv",),
    "packing-check": ("csv", "json"),
    "vlt1": ("csv", "json"),
}
EXIT_SIGNAL = 2


@dataclass(frozen=True)
class RunConfig:
    command: str
    m: tuple[int, ...] = (25,)
    d: int = 2
    stat: tuple[str, ...] = ("multiscale",)
    kernel: str = "indicator"
    penalty_v: float | None = None
    alpha: tuple[float, ...] = (0.05,)
    reps: int | None = None
    seed: int | None = None
    threads: int | None = None
    out: str | None = None
    format: str | None = None
    min_side: int | None = None
    max_side: int | None = None
    grid: str | None = None
    kappa_cache: str | None = None
    exit_code_signal: bool = False
    signal: str | None = None
    cells: tuple[tuple[int, float], ...] = ()
    calib_reps: int = DEFAULT_CALIBRATION_REPS
    calib_seed: int = 0
    svg: str | None = None
    deltas: tuple[float, ...] = (1.0, 0.5, 0.25, 0.125)
    us: tuple[float, ...] = (1.0, 0.5, 0.25)
    res: int = 128
    v: float = 0.25
    seeds: int = 50

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.m[0],) * self.d

    @property
    def output_format(self) -> str:
        return self.format or FORMATS[self.command][0]

    @property
    def output_path(self) -> Path:
        return Path(self.out or f"multiscan-{self.command}.{self.output_format}")

    def specs(self) -> list[StatisticSpec]:
        scales = None
        if self.min_side is not None or self.max_side is not None:
            scales = SideBounds(self.min_side or 1, self.max_side)
        penalty = PenaltySpec.from_v(self.penalty_v)
        return [StatisticSpec(kind, self.kernel, penalty, scales) for kind in self.stat]

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        kw = dict(data)
        for name in ("m", "stat", "alpha", "deltas", "us"):
            kw[name] = tuple(kw[name])
        kw["cells"] = tuple((int(k), float(mu)) for k, mu in kw["cells"])
        return cls(**kw)

    def to_argv(self) -> list[str]:
        """Flags that parse back into this config."""
        argv = [self.command]
        for dest, flag in _command_flags(self.command):
            val = getattr(self, dest)
            if val is None or val is False:
                continue
            if val is True:
                argv.append(flag)
            elif dest == "cells":
                for k, mu in val:
                    argv += [flag, f"{k}:{mu!r}"]
            elif isinstance(val, tuple):
                argv += [flag, ",".join(repr(x) if isinstance(x, float) else str(x) for x in val)]
            else:
                argv += [flag, repr(val) if isinstance(val, float) else str(val)]
        return argv


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def _words(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _cell(text: str) -> tuple[int, float]:
    k, sep, mu = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"cell must look like K:MU, got {text!r}")
    return int(k), float(mu)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int)
    common.add_argument("--out")
    common.add_argument("--format")
    common.add_argument("--seed", type=int)
    common.add_argument("--svg")

    stat = argparse.ArgumentParser(add_help=False)
    stat.add_argument("--m", type=_ints, default=(25,), help="grid side, or comma list for null-ecdf")
    stat.add_argument("--d", type=int, default=2)
    stat.add_argument("--stat", type=_words, default=("multiscale",), help=f"comma list of {', '.join(KINDS)}")
    stat.add_argument("--kernel", default="indicator", help='"indicator" or "holder:<beta>"')
    stat.add_argument("--penalty-v", type=float)
    stat.add_argument("--alpha", type=_floats, default=(0.05,))
    stat.add_argument("--reps", type=int)
    stat.add_argument("--min-side", type=int)
    stat.add_argument("--max-side", type=int)
    stat.add_argument("--kappa-cache")

    parser = argparse.ArgumentParser(prog="multiscan", description="Multiscale, scan and ALR tests on Gaussian grids.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("calibrate", parents=[common, stat], help="Monte Carlo critical values")
    p = sub.add_parser("detect", parents=[common, stat], help="test one grid file")
    p.add_argument("--grid", required=True)
    p.add_argument("--exit-code-signal", action="store_true", help=f"exit {EXIT_SIGNAL} when the test rejects")
    p = sub.add_parser("power", parents=[common, stat], help="rejection rates under alternatives")
    p.add_argument("--signal", help='"null", "rect:mu=..,lo=..,hi=.." or "bump:beta=..,L=..,t=..,h=.."')
    p.add_argument("--cell", dest="cells", type=_cell, action="append", default=[], help="square signal K:MU, repeatable")
    p.add_argument("--calib-reps", type=int, default=DEFAULT_CALIBRATION_REPS)
    p.add_argument("--calib-seed", type=int, default=0)
    sub.add_parser("null-ecdf", parents=[common, stat], help="null distribution samples")
    p = sub.add_parser("packing-check", parents=[common], help="greedy packings of small boxes")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--deltas", type=_floats, default=(1.0, 0.5, 0.25, 0.125))
    p.add_argument("--us", type=_floats, default=(1.0, 0.5, 0.25))
    p.add_argument("--res", type=int, default=128)
    p = sub.add_parser("vlt1", parents=[common], help="finest-scale growth for penalty constant V < 1")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--v", type=float, default=0.25)
    p.add_argument("--m", type=_ints, default=(16, 64, 256))
    p.add_argument("--seeds", type=int, default=50)
    return parser


def _command_flags(command: str) -> list[tuple[str, str]]:
    sub = next(a for a in build_parser()._subparsers._group_actions if isinstance(a, argparse._SubParsersAction))
    return [(a.dest, a.option_strings[-1]) for a in sub.choices[command]._actions if a.option_strings and a.dest != "help"]


def parse_args(argv: Sequence[str] | None = None) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    kw = vars(ns)
    if "cells" in kw:
        kw["cells"] = tuple(kw["cells"])
    try:
        cfg = RunConfig(**kw)
        _validate(cfg)
    except PenaltyNotApplicable as exc:
        parser.error(str(exc))
    except ValueError as exc:
        parser.error(str(exc))
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.output_format not in FORMATS[cfg.command]:
        raise ValueError(f"format {cfg.format!r} not supported by {cfg.command}; choose from {FORMATS[cfg.command]}")
    if cfg.threads is not None and cfg.threads < 1:
        raise ValueError("--threads must be >= 1")
    if cfg.command in ("packing-check", "vlt1"):
        return
    if cfg.d < 1 or any(m < 1 for m in cfg.m):
        raise ValueError("--m and --d must be positive")
    if len(cfg.m) > 1 and cfg.command != "null-ecdf":
        raise ValueError(f"{cfg.command} takes a single --m")
    if cfg.command == "detect" and len(cfg.alpha) != 1:
        raise ValueError("detect takes a single --alpha")
    if cfg.command == "power" and not cfg.cells and cfg.signal is None:
        raise ValueError("power needs --signal or at least one --cell")
    if cfg.command == "power" and cfg.signal is not None:
        parse_signal(cfg.signal).check(cfg.dims)
    for a in cfg.alpha:
        if not 0 < a < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {a}")
    cfg.specs()


# --- outputs ---------------------------------------------------------------


def git_blob_sha1(data: bytes) -> str:
    """Hash git assigns to a file with these contents."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _file_hash(path: str | Path) -> str | None:
    p = Path(path)
    return git_blob_sha1(p.read_bytes()) if p.is_file() else None


def write_manifest(cfg: RunConfig, inputs: dict[str, str], outputs: Sequence[Path]) -> Path:
    config = cfg.to_dict()
    manifest = {
        "version": __version__,
        "argv": cfg.to_argv(),
        "config": config,
        "config_sha1": git_blob_sha1(json.dumps(config, sort_keys=True).encode()),
        "inputs": {name: {"path": str(p), "sha1": _file_hash(p)} for name, p in sorted(inputs.items())},
        "outputs": {str(p): _file_hash(p) for p in outputs},
    }
    path = cfg.output_path.with_name(cfg.output_path.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def _write_rows(path: Path, fmt: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    if fmt == "json":
        path.write_text(json.dumps([dict(zip(header, r)) for r in rows], indent=1) + "\n")
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])


# --- commands --------------------------------------------------------------


def _run_calibrate(cfg: RunConfig) -> tuple[int, dict]:
    reps = cfg.reps or DEFAULT_CALIBRATION_REPS
    seed = 0 if cfg.seed is None else cfg.seed
    specs = cfg.specs()
    if cfg.kappa_cache:
        records = calibrated(cfg.dims, specs, cfg.alpha, reps, seed, cfg.kappa_cache, cfg.threads)
    else:
        records = calibrate_many(cfg.dims, specs, cfg.alpha, reps, seed, cfg.threads)
    path = cfg.output_path
    if cfg.output_format == "json":
        path.write_text(json.dumps([_record_to_json(r) for r in records], indent=1, sort_keys=True) + "\n")
    else:
        rows = [(r.key.spec.label(), a, r.kappa(a), r.key.reps, r.key.seed) for r in records for a in cfg.alpha]
        _write_rows(path, "csv", ("statistic", "alpha", "kappa", "R", "seed"), rows)
    for r in records:
        print(" ".join(f"{r.key.spec.label()} kappa_{a!r}={r.kappa(a):.6g}" for a in cfg.alpha))
    inputs = {"kappa_cache": cfg.kappa_cache} if cfg.kappa_cache else {}
    return 0, inputs


def _lookup_calibration(cfg: RunConfig, dims, spec: StatisticSpec) -> CalibrationRecord:
    if cfg.reps is not None or cfg.seed is not None:
        key = CalibrationKey(tuple(dims), spec, cfg.reps or DEFAULT_CALIBRATION_REPS, cfg.seed or 0)
        return cache_load(cfg.kappa_cache, key)
    found = cache_find(cfg.kappa_cache, dims, spec)
    if not found:
        raise CacheMiss(f"cache miss: no calibration for dims={tuple(dims)} stat={spec.label()} in {cfg.kappa_cache}")
    return max(found, key=lambda r: (r.key.reps, -r.key.seed))


def _run_detect(cfg: RunConfig) -> tuple[int, dict]:
    grid = read_grid(cfg.grid)
    alpha = cfg.alpha[0]
    rows = []
    rejected = False
    for spec in cfg.specs():
        if cfg.kappa_cache:
            rec = _lookup_calibration(cfg, grid.dims, spec)
        else:
            reps = cfg.reps or DEFAULT_CALIBRATION_REPS
            rec = calibrate_many(grid.dims, [spec], (alpha,), reps, cfg.seed or 0, cfg.threads)[0]
        kappa = rec.kappa(alpha)
        res = evaluate(grid, spec)
        reject = res.value > kappa
        rejected |= reject
        scale = " (log A_n)" if spec.kind == "alr" else ""
        print(f"decision: {'reject H0, signal detected' if reject else 'do not reject H0'}")
        print(f"statistic: {spec.label()}{scale} = {res.value:.6g}")
        print(f"kappa_{alpha!r}: {kappa:.6g} (R={rec.key.reps}, seed={rec.key.seed})")
        print(f"argmax: {res.argmax_rect}")
        rows.append((spec.label(), res.value, kappa, alpha, reject, str(res.argmax_rect), res.rect_count, rec.key.fingerprint()))
    header = ("statistic", "value", "kappa", "alpha", "reject", "argmax", "rect_count", "calibration")
    _write_rows(cfg.output_path, cfg.output_format, header, rows)
    inputs = {"grid": cfg.grid}
    if cfg.kappa_cache:
        inputs["kappa_cache"] = cfg.kappa_cache
    status = EXIT_SIGNAL if (rejected and cfg.exit_code_signal) else 0
    return status, inputs


def _run_power(cfg: RunConfig) -> tuple[int, dict]:
    alpha = cfg.alpha[0]
    specs = cfg.specs()
    records = calibrated(cfg.dims, specs, (alpha,), cfg.calib_reps, cfg.calib_seed, cfg.kappa_cache, cfg.threads)
    reps = cfg.reps or DEFAULT_POWER_REPS
    seed = 1 if cfg.seed is None else cfg.seed
    report = compare_tests(cfg.dims, cfg.cells, records, reps, seed, alpha, cfg.threads) if cfg.cells else PowerReport()
    if cfg.signal is not None:
        sig = parse_signal(cfg.signal)
        report.rows.extend(power_many(cfg.dims, specs, sig, records, reps, seed, alpha, cfg.threads))
    if cfg.output_format == "csv":
        report.to_csv(cfg.output_path)
    else:
        rows = [(r.k, r.mu, r.statistic, r.signal, r.power, r.half_width, r.reps) for r in report.rows]
        _write_rows(cfg.output_path, "json", ("k", "mu", "statistic", "signal", "power", "half_width", "R"), rows)
    for r in report.rows:
        print(f"{r.signal if r.k is None else f'k={r.k} mu={r.mu!r}'} {r.statistic}: {r.power:.3f} +- {r.half_width:.3f}")
    return 0, ({"kappa_cache": cfg.kappa_cache} if cfg.kappa_cache else {})


def _run_null_ecdf(cfg: RunConfig) -> tuple[int, dict]:
    reps = cfg.reps or DEFAULT_CALIBRATION_REPS
    seed = 0 if cfg.seed is None else cfg.seed
    series = {}
    rows = []
    for spec in cfg.specs():
        for m in cfg.m:
            x, y = ecdf_points(null_ecdf((m,) * cfg.d, spec, reps, seed, cfg.threads))
            label = spec.label() if len(cfg.m) == 1 else f"{spec.label()} m={m}"
            series[label] = (x, y)
            rows.extend((label, float(a), float(b)) for a, b in zip(x, y))
    if len(series) == 1:
        _write_rows(cfg.output_path, "csv", ("value", "ecdf"), [r[1:] for r in rows])
    else:
        _write_rows(cfg.output_path, "csv", ("series", "value", "ecdf"), rows)
    if cfg.svg:
        emit_svg(series, cfg.svg, title="null ECDF", xlabel="statistic", ylabel="ECDF")
    return 0, {}


def _run_packing(cfg: RunConfig) -> tuple[int, dict]:
    results = packing_bound_sweep(cfg.d, cfg.deltas, cfg.us, cfg.res)
    rows = [(r.d, r.delta, r.u, r.count, r.bound_ratio, packing_is_valid(r)) for r in results]
    _write_rows(cfg.output_path, cfg.output_format, ("d", "delta", "u", "count", "bound_ratio", "valid"), rows)
    for row in rows:
        print("d={} delta={!r} u={!r} N={} ratio={:.4f} valid={}".format(*row))
    return 0, {}


def _run_vlt1(cfg: RunConfig) -> tuple[int, dict]:
    table = v_less_one_divergence(cfg.d, cfg.v, cfg.m, cfg.seeds, cfg.seed or 0)
    rows = [(r.m, r.mean, r.se, r.reference) for r in table]
    _write_rows(cfg.output_path, cfg.output_format, ("m", "mean", "se", "reference"), rows)
    if cfg.svg:
        ms = [r.m for r in table]
        emit_svg(
            {"mean statistic": (ms, [r.mean for r in table]), "reference growth": (ms, [r.reference for r in table])},
            cfg.svg,
            xlabel="m",
        )
    for row in rows:
        print("m={} mean={:.4f} se={:.4f} reference={:.4f}".format(*row))
    return 0, {}


_RUNNERS = {
    "calibrate": _run_calibrate,
    "detect": _run_detect,
    "power": _run_power,
    "null-ecdf": _run_null_ecdf,
    "packing-check": _run_packing,
    "vlt1": _run_vlt1,
}


def run(cfg: RunConfig) -> int:
    """Execute ``cfg``; returns the process exit status."""
    set_threads(cfg.threads)
    try:
        status, inputs = _RUNNERS[cfg.command](cfg)
    except (CacheMiss, OSError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, CacheMiss) and exc.args else exc
        print(f"multiscan {cfg.command}: error: {msg}", file=sys.stderr)
        return 1
    outputs = [cfg.output_path] + ([Path(cfg.svg)] if cfg.svg else [])
    write_manifest(cfg, inputs, outputs)
    return status


def main(argv: Sequence[str] | None = None) -> int:
    return run(parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
