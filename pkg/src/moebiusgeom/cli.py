"""Command-line front end: ``verify``, ``list-families`` and ``ode-check``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import multiprocessing
import os
import sys
from collections import Counter
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .config import RunConfig, build_spec, parse_config, sample_points
from .curves import ExpressionKappa, ode_residual_for
from .errors import ConfigError, GeometryError
from .exprparse import ParseError
from .families import list_families
from .verify import COMPONENTS, DEFAULT_TOL, aggregate, point_record

SCHEMA_VERSION = "1.0"
JOBS_ENV = "MOEBIUSGEOM_JOBS"

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

# state shared with forked workers; set just before the pool starts
_WORK: tuple | None = None


def _work(index: int) -> dict:
    spec, points, checks, seed, tol = _WORK
    try:
        return point_record(spec, points[index], checks, seed, index, tol)
    except GeometryError as exc:
        return {"index": index, "point": [float(v) for v in points[index]], "residuals": {},
                "skipped": None, "fatal": f"{type(exc).__name__}: {exc}"}


def run_records(spec, points, checks, seed: int, tol: float, jobs: int = 1) -> list:
    """Per-point records in index order, optionally computed by forked workers."""
    global _WORK
    _WORK = (spec, points, checks, seed, tol)
    try:
        if jobs <= 1 or len(points) < 2:
            return [_work(i) for i in range(len(points))]
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=jobs) as pool:
            recs = pool.map(_work, range(len(points)), chunksize=max(1, len(points) // (4 * jobs)))
        return sorted(recs, key=lambda r: r["index"])
    finally:
        _WORK = None


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def spectral_summary(records: list) -> dict | None:
    spectra = [r["spectral"] for r in records if r.get("spectral")]
    if not spectra:
        return None
    first = spectra[0]
    out = {
        "k": first["k"],
        "multiplicities": first["multiplicities"],
        "h": first["h"],
        "case": first["case"],
        "k_counts": {str(k): c for k, c in sorted(Counter(s["k"] for s in spectra).items())},
        "points": len(spectra),
    }
    classes = [r["classification"] for r in records if r.get("classification")]
    if classes:
        out["isoparametric"] = all(c.get("isoparametric") for c in classes)
    return out


def build_report(cfg: RunConfig, spec, records: list, error: str | None = None) -> dict:
    reports = aggregate(records, cfg.checks, cfg.tolerances, cfg.tolerance,
                        metadata={"family": spec.params.get("family", spec.name)})
    checks = {}
    for check, rep in reports.items():
        checks[check] = {
            "name": rep.check_name,
            "tolerance": rep.tolerance,
            "max_residual": rep.max_residual,
            "point_of_max": rep.point_of_max,
            "passed": rep.passed,
            "evaluated_points": len(rep.residuals),
            "components": {c: rep.components[c] for c in COMPONENTS[check] if c in rep.components},
        }
    skipped = [{"index": r["index"], "point": r["point"], "reason": r["skipped"]}
               for r in records if r.get("skipped")]
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "moebiusgeom", "version": __version__},
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.echo,
        "immersion": {"name": spec.name, "n": spec.n, "m": spec.m, "p": spec.m - spec.n},
        "samples": {"count": len(records), "skipped": skipped},
        "checks": checks,
        "spectral": spectral_summary(records),
        "passed": error is None and all(c["passed"] for c in checks.values()),
    }
    if error is not None:
        report["error"] = error
    return report


def write_json(report: dict, path: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True, default=_plain) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def write_csv(records: list, checks, path: str | None) -> None:
    names = [c for check in checks for c in COMPONENTS[check]]
    dim = max((len(r["point"]) for r in records), default=0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index"] + [f"x{i + 1}" for i in range(dim)] + names + ["skipped"])
    for r in records:
        res = r["residuals"]
        w.writerow([r["index"], *(repr(v) for v in r["point"]),
                    *(repr(res[c]) if c in res else "" for c in names),
                    r.get("skipped") or r.get("fatal") or ""])
    if path is None:
        sys.stdout.write(buf.getvalue())
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())


def _csv_path(json_path: str | None) -> str | None:
    if json_path is None:
        raise ConfigError("csv output needs --out or output.path")
    root, _ = os.path.splitext(json_path)
    return root + ".csv"


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None


def run(cfg: RunConfig, out: str | None = None, fmt: str | None = None, jobs: int | None = None,
        log=sys.stderr) -> int:
    """Execute a validated configuration; returns the process exit code."""
    out = out if out is not None else cfg.output_path
    fmt = fmt or cfg.output_format
    jobs = jobs if jobs is not None else default_jobs()
    spec = build_spec(cfg)
    points = sample_points(cfg, spec)
    records = run_records(spec, points, cfg.checks, cfg.seed, cfg.tolerance, jobs)
    fatal = [r for r in records if r.get("fatal")]
    error = None
    if fatal:
        error = f"point {fatal[0]['index']}: {fatal[0]['fatal']}"
        records = [r for r in records if not r.get("fatal")]
    report = build_report(cfg, spec, records, error)
    # the JSON report is always written; csv adds per-point residuals beside it
    write_json(report, out)
    if fmt == "csv":
        write_csv(records, cfg.checks, _csv_path(out))
    for check, c in report["checks"].items():
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['name']}: max_residual={c['max_residual']:.3e} tol={c['tolerance']:.1e}",
              file=log)
    if error is not None:
        print(f"error: {error}", file=log)
        return EXIT_ERROR
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def _cmd_verify(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        return run(cfg, args.out, args.format, args.jobs)
    except (OSError, ConfigError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _cmd_list(args) -> int:
    width = max(len(k) for k in list_families())
    for tag, desc in list_families().items():
        print(f"{tag:<{width}}  {desc}")
    return EXIT_PASS


def _cmd_ode(args) -> int:
    try:
        a, b = (float(t) for t in args.range.split(":"))
        if not a < b:
            raise ValueError
    except ValueError:
        print(f"error: --range expects a:b with a < b, got {args.range!r}", file=sys.stderr)
        return EXIT_ERROR
    try:
        kappa = ExpressionKappa(args.kappa)
        samples = np.linspace(a, b, args.samples)
        kappa.validate((a, b))
        res = [abs(ode_residual_for(kappa, args.c, s)) for s in samples]
    except (ParseError, GeometryError, ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    worst = int(np.argmax(res))
    passed = res[worst] < args.tol
    print(f"{'PASS' if passed else 'FAIL'} curvature_ode c={args.c}: "
          f"max_residual={res[worst]:.3e} at s={samples[worst]:.6g} tol={args.tol:.1e}")
    return EXIT_PASS if passed else EXIT_FAIL


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moebiusgeom",
                                     description="Moebius invariants of parametrized submanifolds")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the verification suite from a config file")
    v.add_argument("--config", required=True)
    v.add_argument("--out", help="report path (default: output.path or stdout)")
    v.add_argument("--format", choices=("json", "csv"))
    v.add_argument("--jobs", type=int, help=f"worker processes (default: ${JOBS_ENV} or 1)")
    v.set_defaults(func=_cmd_verify)

    lf = sub.add_parser("list-families", help="list built-in immersion families")
    lf.set_defaults(func=_cmd_list)

    o = sub.add_parser("ode-check", help="curvature ODE residual of an expression kappa(s)")
    o.add_argument("--c", type=int, choices=(0, 1, -1), required=True)
    o.add_argument("--kappa", required=True, help="expression in s, e.g. 'exp(s)'")
    o.add_argument("--range", required=True, help="a:b")
    o.add_argument("--samples", type=int, default=101)
    o.add_argument("--tol", type=float, default=1e-10)
    o.set_defaults(func=_cmd_ode)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
