"""Flat ``key = value`` run configuration.

Lines are ``key = value`` pairs; ``#`` starts a comment; a ``[section]``
header prefixes the following keys with ``section.``.  Values may be quoted.
"""

from __future__ import annotations

import difflib
import re
import shlex
from dataclasses import dataclass, field

import numpy as np

from .curves import CurveSpec, ExponentialKappa, ExpressionKappa, InverseSqrtKappa
from .errors import ConfigError, GeometryError
from .exprparse import ParseError, eval_any, parse
from .families import FAMILIES, FamilyInstance, build_family
from .jets import ImmersionSpec
from .verify import ALL_CHECKS, DEFAULT_ALL, DEFAULT_TOL, sample_grid, sample_random

DEFAULT_SEED = 42
DEFAULT_INSET = 0.1
DEFAULT_SPACE_FORM = {"cylinder": 0, "generalized_cone": 1, "rotational": -1}

KEYS = {
    "family": str, "n": int, "p": int, "k": int, "r": float, "lam": int, "radii": "floats",
    "curve.kappa": str, "curve.a": float, "curve.b": float, "curve.c": float,
    "curve.expr": str, "curve.range": "range", "curve.space_form": int, "curve.step": float,
    "chart": str, "domain": str, "m": int,
    "samples.grid": str, "samples.random": int, "samples.points": str, "samples.inset": float,
    "checks": str, "tolerance": float, "seed": int,
    "output.format": str, "output.path": str,
}
KEYS.update({f"tolerance.{c}": float for c in ALL_CHECKS})
CONSTANT_PREFIX = "constants."


@dataclass
class RunConfig:
    immersion: dict
    samples: dict
    checks: tuple
    tolerances: dict = field(default_factory=dict)
    tolerance: float = DEFAULT_TOL
    output_format: str = "json"
    output_path: str | None = None
    seed: int = DEFAULT_SEED
    echo: dict = field(default_factory=dict)


def _unquote(v: str) -> str:
    v = v.strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        return shlex.split(v)[0] if v[0] == '"' else v[1:-1]
    return v


def _strip_comment(line: str) -> str:
    out, quote = [], None
    for ch in line:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            break
        out.append(ch)
    return "".join(out)


def _convert(key, kind, raw):
    try:
        if kind is str:
            return raw
        if kind is int:
            if not re.fullmatch(r"[+-]?\d+", raw):
                raise ValueError
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == "floats":
            vals = [float(v) for v in raw.split(",") if v.strip()]
            if not vals:
                raise ValueError
            return vals
        if kind == "range":
            a, b = raw.split(":")
            return (float(a), float(b))
    except ValueError:
        pass
    label = {"floats": "a comma-separated list of numbers", "range": "a range a:b"}.get(
        kind, getattr(kind, "__name__", str(kind)))
    raise ConfigError(f"{key}: expected {label}, got {raw!r}")


def parse_config(text: str) -> RunConfig:
    section = ""
    values: dict = {}
    constants: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = _strip_comment(line).strip()
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_][\w.]*)\s*\]", line)
        if m:
            section = m.group(1) + "."
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        key = section + key.strip()
        raw = _unquote(raw)
        if key.startswith(CONSTANT_PREFIX):
            try:
                constants[key[len(CONSTANT_PREFIX):]] = float(raw)
            except ValueError:
                raise ConfigError(f"{key}: expected float, got {raw!r}") from None
            continue
        if key not in KEYS:
            near = difflib.get_close_matches(key, list(KEYS), n=1)
            hint = f"; did you mean {near[0]!r}?" if near else ""
            raise ConfigError(f"line {lineno}: unknown key {key!r}{hint}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, KEYS[key], raw)
    return _validate(values, constants)


def _checks(raw: str | None) -> tuple:
    if raw is None:
        return DEFAULT_ALL
    names = [c.strip() for c in raw.split(",") if c.strip()]
    if not names:
        raise ConfigError("checks: no checks selected")
    out = []
    for c in names:
        if c == "all":
            out.extend(DEFAULT_ALL)
        elif c in ALL_CHECKS:
            out.append(c)
        else:
            near = difflib.get_close_matches(c, list(ALL_CHECKS) + ["all"], n=1)
            hint = f"; did you mean {near[0]!r}?" if near else ""
            raise ConfigError(f"checks: unknown check {c!r}{hint}")
    return tuple(dict.fromkeys(out))


def _validate(v: dict, constants: dict) -> RunConfig:
    if ("family" in v) == ("chart" in v):
        raise ConfigError("exactly one of 'family' or 'chart' is required")
    if "family" in v and v["family"] not in FAMILIES:
        near = difflib.get_close_matches(v["family"], list(FAMILIES), n=1)
        hint = f"; did you mean {near[0]!r}?" if near else ""
        raise ConfigError(f"family: unknown family {v['family']!r}{hint}")
    inset = v.get("samples.inset", DEFAULT_INSET)
    if not 0 < inset < 0.5:
        raise ConfigError("samples.inset must lie in (0, 0.5)")
    given = [k for k in ("samples.grid", "samples.random", "samples.points") if k in v]
    if len(given) > 1:
        raise ConfigError("choose one of samples.grid, samples.random, samples.points")
    samples = {"inset": inset}
    if "samples.grid" in v:
        try:
            counts = [int(c) for c in v["samples.grid"].lower().split("x")]
        except ValueError:
            raise ConfigError(f"samples.grid: expected counts like 10x10x10, got {v['samples.grid']!r}") from None
        if any(c < 1 for c in counts):
            raise ConfigError("samples.grid: counts must be >= 1")
        samples["grid"] = counts
    elif "samples.points" in v:
        try:
            pts = [[float(c) for c in p.split(",")] for p in v["samples.points"].split(";") if p.strip()]
        except ValueError:
            raise ConfigError("samples.points: expected 'x1,x2,...; x1,x2,...'") from None
        if not pts:
            raise ConfigError("samples.points: sample count must be >= 1")
        samples["points"] = pts
    else:
        count = v.get("samples.random", 10)
        if count < 1:
            raise ConfigError("samples.random: sample count must be >= 1")
        samples["random"] = count
    fmt = v.get("output.format", "json")
    if fmt not in ("json", "csv"):
        raise ConfigError(f"output.format must be json or csv, got {fmt!r}")
    tol = v.get("tolerance", DEFAULT_TOL)
    tols = {k.split(".", 1)[1]: val for k, val in v.items() if k.startswith("tolerance.")}
    if any(not t > 0 for t in [tol, *tols.values()]):
        raise ConfigError("tolerances must be positive")
    immersion = {k: val for k, val in v.items()
                 if not k.startswith(("samples.", "output.", "tolerance")) and k not in ("checks", "seed")}
    immersion["constants"] = constants
    echo = {k: (list(val) if isinstance(val, tuple) else val) for k, val in sorted(v.items())}
    echo.update({f"constants.{k}": c for k, c in sorted(constants.items())})
    return RunConfig(immersion=immersion, samples=samples, checks=_checks(v.get("checks")),
                     tolerances=tols, tolerance=tol, output_format=fmt,
                     output_path=v.get("output.path"), seed=v.get("seed", DEFAULT_SEED), echo=echo)


def _curve_spec(im: dict, family: str) -> CurveSpec:
    kind = im.get("curve.kappa", "exp")
    p = im.get("p", 1)
    s_range = im.get("curve.range", (0.0, 1.0))
    sf = im.get("curve.space_form", DEFAULT_SPACE_FORM[family])
    if kind in ("exp", "exponential"):
        kappa = ExponentialKappa(b=im.get("curve.b", 1.0), a=im.get("curve.a", 1.0))
    elif kind == "inverse_sqrt":
        kappa = InverseSqrtKappa(c=im.get("curve.c", 1.0), b=im.get("curve.b", 1.0))
    elif kind == "expression":
        if "curve.expr" not in im:
            raise ConfigError("curve.kappa = expression needs curve.expr")
        kappa = ExpressionKappa(im["curve.expr"], constants=im.get("constants"))
    else:
        raise ConfigError(f"curve.kappa must be exp, inverse_sqrt or expression, got {kind!r}")
    return CurveSpec(space_form=sf, kappa=kappa, s_range=s_range, p=p)


def _custom_chart(im: dict) -> ImmersionSpec:
    if "n" not in im or "domain" not in im:
        raise ConfigError("a custom chart needs n and domain")
    n = im["n"]
    sources = [s.strip() for s in im["chart"].split(";") if s.strip()]
    exprs = [parse(s, constants=im.get("constants"), dim=n) for s in sources]
    try:
        box = [tuple(float(t) for t in part.split(":")) for part in im["domain"].split(",")]
    except ValueError:
        raise ConfigError("domain: expected 'a:b, a:b, ...'") from None
    if len(box) != n or any(len(b) != 2 for b in box):
        raise ConfigError(f"domain: expected {n} intervals a:b")
    m = im.get("m", len(exprs))
    if m != len(exprs):
        raise ConfigError(f"m = {m} but the chart has {len(exprs)} components")

    def chart(x):
        env = [x[i] for i in range(n)]
        return [eval_any(e, env) for e in exprs]

    return ImmersionSpec(n, m, chart, [b[0] for b in box], [b[1] for b in box], name="custom")


def build_spec(cfg: RunConfig) -> ImmersionSpec:
    im = cfg.immersion
    try:
        if "chart" in im:
            return _custom_chart(im)
        family = im["family"]
        params = {k: val for k, val in im.items()
                  if k in ("n", "k", "r", "lam", "radii")}
        if family in DEFAULT_SPACE_FORM:
            params["curve"] = _curve_spec(im, family)
            if "curve.step" in im:
                params["step"] = im["curve.step"]
        return build_family(FamilyInstance(family, params))
    except ParseError as exc:
        raise ConfigError(f"chart expression: {exc}") from exc
    except (GeometryError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def sample_points(cfg: RunConfig, spec: ImmersionSpec) -> np.ndarray:
    s = cfg.samples
    if "grid" in s:
        if len(s["grid"]) != spec.n:
            raise ConfigError(f"samples.grid has {len(s['grid'])} axes, the immersion has n = {spec.n}")
        return sample_grid(spec, s["grid"], s["inset"])
    if "points" in s:
        pts = np.array(s["points"], dtype=float)
        if pts.ndim != 2 or pts.shape[1] != spec.n:
            raise ConfigError(f"samples.points must have {spec.n} coordinates each")
        return pts
    return sample_random(spec, s["random"], cfg.seed, s["inset"])
