"""Command-line entry point.

    quenchlab run <config.yaml> [--out DIR] [--threads N] [--seed-override S]
    quenchlab verify [config.yaml] [--out DIR]

``run`` writes manifest.json, <experiment>.csv, <experiment>.json and
summary.txt; the exit status is 1 when a gated check fails and 2 on a
configuration error.  ``verify`` prints one pass/fail line per
acceptance check.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .acceptance import CRITERIA, format_report, run_checks
from .config import ExperimentConfig, load_config
from .errors import ConfigError, QuenchLabError
from .experiments import ExperimentResult, run_experiment

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def git_blob_hash(data: bytes) -> str:
    """Content hash in git's blob format: sha1(b"blob <len>\\0" + data)."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _csv_text(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=result.columns, lineterminator="\n")
    w.writeheader()
    for row in result.rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def write_outputs(cfg: ExperimentConfig, result: ExperimentResult, out: Path) -> dict[str, str]:
    out.mkdir(parents=True, exist_ok=True)
    files = {
        f"{cfg.experiment}.csv": _csv_text(result),
        f"{cfg.experiment}.json": _dumps({"experiment": cfg.experiment, "passed": result.passed,
                                          "gated": result.gated, "result": result.payload}),
        "summary.txt": "\n".join([f"experiment: {cfg.experiment}", *result.summary,
                                  f"status: {'PASS' if result.passed else 'FAIL'}"
                                  + ("" if result.gated else " (non-gating)")]) + "\n",
    }
    hashes = {}
    for name, text in files.items():
        data = text.encode()
        (out / name).write_bytes(data)
        hashes[name] = git_blob_hash(data)
    resolved = cfg.resolved()
    if result.extra:
        resolved["derived"] = result.extra
    manifest = {
        "experiment": cfg.experiment,
        "config": resolved,
        "input_hash": git_blob_hash(cfg.source),
        "resolved_config_hash": git_blob_hash(_dumps(resolved).encode()),
        "outputs": hashes,
        "passed": result.passed,
        "versions": {"quenchlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    (out / "manifest.json").write_text(_dumps(manifest))
    return hashes


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, args.seed_override)
        out = Path(args.out or cfg.output or f"results/{cfg.experiment}")
        result = run_experiment(cfg, args.threads)
    except ConfigError as exc:
        key = f" [key: {exc.key}]" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QuenchLabError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_FAILED
    write_outputs(cfg, result, out)
    for line in result.summary:
        print(line)
    print(f"wrote {out}/")
    return EXIT_OK if result.passed else EXIT_FAILED


def cmd_verify(args) -> int:
    selected, overrides = None, {}
    if args.config:
        try:
            data = yaml.safe_load(Path(args.config).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        unknown = set(data) - {"criteria", "overrides"}
        if unknown:
            print(f"config error [key: {sorted(unknown)[0]}]: unknown key", file=sys.stderr)
            return EXIT_CONFIG
        selected = data.get("criteria")
        if selected is not None and any(int(k) not in CRITERIA for k in selected):
            print("config error [key: criteria]: criteria are numbered 1-9", file=sys.stderr)
            return EXIT_CONFIG
        overrides = {k: float(v) for k, v in (data.get("overrides") or {}).items()}
    results = run_checks(selected, overrides)
    report = format_report(results, timings=False)
    sys.stdout.write(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify_report.txt").write_text(report)
        (out / "verify_report.json").write_text(_dumps([{"number": r.number, "name": r.name, "passed": r.passed,
                                                          "measured": r.measured} for r in results]))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quenchlab", description="Quenched survival experiments for Levy processes")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads across environments")
    common.add_argument("--seed-override", type=lambda s: int(s, 0), default=None,
                        help="replace the config seed (unsigned 64-bit)")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run one configured experiment")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    v.add_argument("config", nargs="?")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("--threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
