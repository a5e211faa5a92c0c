"""Built-in immersion families as chart maps on axis-aligned boxes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curves import CurveSpec, integrate_curve
from .errors import InvalidDimensionsError, PoleHitError
from .geometry import apply_conformal_map
from .jets import ImmersionSpec, cos, sin

# polar angles stay clear of the coordinate singularities at 0 and pi
POLAR_BOX = (0.5, math.pi - 0.5)
AZIMUTH_BOX = (-2.5, 2.5)
FLAT_BOX = (-1.0, 1.0)
HALFSPACE_BOX = (0.5, 2.0)
POLE_MIN_DISTANCE = 0.1

FAMILIES = {
    "cylinder": "curve x R^(n-1) in R^(n+p), curve in Euclidean R^(p+1)",
    "generalized_cone": "Theta(curve, z) with curve in S^(p+1) and z in H^(n-1)",
    "rotational": "Theta(z(s), y) with z in H^(p+1) (half-space) and y in S^(n-1)",
    "standard_cylinder": "S^k(r) x R^(n-k) in R^(n+1)",
    "standard_cone": "cone over S^k(r) in S^(k+1), times H^(n-k), in R^(n+1)",
    "standard_torus": "S^k(r) x S^(n-k)(sqrt(1-r^2)) in S^(n+1), stereographically in R^(n+1)",
    "circles_product": "S^1(r_1) x ... x S^1(r_q) x R^lam in R^(2q+lam)",
}


@dataclass
class FamilyInstance:
    tag: str
    params: dict = field(default_factory=dict)


def list_families() -> dict:
    return dict(FAMILIES)


def sphere_point(angles, radius=1.0):
    """Hyperspherical coordinates: ``len(angles)`` angles give a point of S^len in R^(len+1)."""
    angles = list(angles)
    out = []
    prod = radius
    for a in angles:
        out.append(prod * cos(a))
        prod = prod * sin(a)
    out.append(prod)
    return out


def sphere_box(dim: int):
    """Chart box for ``sphere_point`` with ``dim`` angles (last angle is azimuthal)."""
    if dim == 1:
        return [AZIMUTH_BOX]
    return [POLAR_BOX] * (dim - 1) + [AZIMUTH_BOX]


def _box(parts):
    lo = [b[0] for b in parts]
    hi = [b[1] for b in parts]
    return lo, hi


def _need(cond: bool, msg: str):
    if not cond:
        raise InvalidDimensionsError(msg)


def _curve(params, space_form, family):
    cs = params.get("curve")
    if not isinstance(cs, CurveSpec):
        raise InvalidDimensionsError(f"{family} needs a CurveSpec under 'curve'")
    if cs.space_form != space_form:
        raise InvalidDimensionsError(
            f"{family} needs a curve with space_form {space_form}, got {cs.space_form}")
    return cs, integrate_curve(cs, params.get("step", 1e-3))


def _cylinder(params):
    n = int(params.get("n", 3))
    _need(n >= 2, "cylinder needs n >= 2")
    cs, curve = _curve(params, 0, "cylinder")
    lo, hi = _box([cs.s_range] + [FLAT_BOX] * (n - 1))

    def chart(x):
        return list(curve(x[0])) + [x[i] for i in range(1, n)]

    return ImmersionSpec(n, n + cs.p, chart, lo, hi, name="cylinder")


def _generalized_cone(params):
    n = int(params.get("n", 3))
    _need(n >= 2, "generalized_cone needs n >= 2")
    cs, curve = _curve(params, 1, "generalized_cone")
    split = cs.p + 2
    lo, hi = _box([cs.s_range, HALFSPACE_BOX] + [FLAT_BOX] * (n - 2))

    def chart(x):
        return list(curve(x[0])) + [x[i] for i in range(1, n)]

    base = ImmersionSpec(n, split + n - 1, chart, lo, hi, name="curve_x_halfspace")
    out = apply_conformal_map(base, "theta_cone", {"split": split})
    out.name = "generalized_cone"
    return out


def _rotational(params):
    n = int(params.get("n", 3))
    _need(n >= 2, "rotational needs n >= 2")
    cs, curve = _curve(params, -1, "rotational")
    split = cs.p + 1
    lo, hi = _box([cs.s_range] + sphere_box(n - 1))

    def chart(x):
        return list(curve(x[0])) + sphere_point([x[i] for i in range(1, n)])

    base = ImmersionSpec(n, split + n, chart, lo, hi, name="curve_x_sphere")
    out = apply_conformal_map(base, "theta_rot", {"split": split})
    out.name = "rotational"
    return out


def _standard_cylinder(params):
    n = int(params.get("n", 3))
    k = int(params.get("k", 1))
    r = float(params.get("r", 1.0))
    _need(1 <= k < n, "standard_cylinder needs 1 <= k < n")
    _need(r > 0, "radius must be positive")
    lo, hi = _box(sphere_box(k) + [FLAT_BOX] * (n - k))

    def chart(x):
        return sphere_point([x[i] for i in range(k)], r) + [x[i] for i in range(k, n)]

    return ImmersionSpec(n, n + 1, chart, lo, hi, name="standard_cylinder")


def _standard_cone(params):
    n = int(params.get("n", 3))
    k = int(params.get("k", 1))
    r = float(params.get("r", 0.6))
    _need(1 <= k < n, "standard_cone needs 1 <= k < n")
    _need(0 < r < 1, "standard_cone needs 0 < r < 1")
    height = math.sqrt(1 - r * r)
    split = k + 2
    lo, hi = _box(sphere_box(k) + [HALFSPACE_BOX] + [FLAT_BOX] * (n - k - 1))

    def chart(x):
        y = sphere_point([x[i] for i in range(k)], r) + [height]
        return y + [x[i] for i in range(k, n)]

    base = ImmersionSpec(n, split + n - k, chart, lo, hi, name="sphere_x_halfspace")
    out = apply_conformal_map(base, "theta_cone", {"split": split})
    out.name = "standard_cone"
    return out


def householder_to(v: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Orthogonal reflection sending unit vector ``v`` to unit vector ``target``."""
    w = v - target
    nw = np.linalg.norm(w)
    if nw < 1e-14:
        return np.eye(len(v))
    w = w / nw
    return np.eye(len(v)) - 2.0 * np.outer(w, w)


def _standard_torus(params):
    n = int(params.get("n", 3))
    k = int(params.get("k", 1))
    r = float(params.get("r", 0.6))
    _need(1 <= k < n, "standard_torus needs 1 <= k < n")
    _need(0 < r < 1, "standard_torus needs 0 < r < 1")
    s = math.sqrt(1 - r * r)
    lo, hi = _box(sphere_box(k) + sphere_box(n - k))

    def chart(x):
        return sphere_point([x[i] for i in range(k)], r) + sphere_point([x[i] for i in range(k, n)], s)

    base = ImmersionSpec(n, n + 2, chart, lo, hi, name="torus_in_sphere")
    center = base.evaluate(base.center())
    a_part, b_part = center[: k + 1] / r, center[k + 1:] / s
    # orthogonal to the patch center and at distance sqrt(2) from the whole torus
    pole = np.concatenate([s * a_part, -r * b_part])
    dist = math.hypot(abs(np.linalg.norm(pole[: k + 1]) - r), abs(np.linalg.norm(pole[k + 1:]) - s))
    if dist <= POLE_MIN_DISTANCE:
        raise PoleHitError(f"stereographic pole too close to the torus ({dist:.3e})")
    e0 = np.zeros(n + 2)
    e0[0] = -1.0
    rot = householder_to(pole, e0)
    out = apply_conformal_map(base, "inverse_sigma", {"rotation": rot})
    out.name = "standard_torus"
    out.params["pole"] = pole
    return out


def _circles_product(params):
    radii = [float(v) for v in params.get("radii", (1.0, 2.0))]
    lam = int(params.get("lam", 1))
    q = len(radii)
    _need(q >= 1 and lam >= 0, "circles_product needs at least one circle and lam >= 0")
    _need(all(v > 0 for v in radii), "radii must be positive")
    n = q + lam
    _need(n >= 2, "circles_product needs n >= 2")
    lo, hi = _box([AZIMUTH_BOX] * q + [FLAT_BOX] * lam)

    def chart(x):
        out = []
        for i, rad in enumerate(radii):
            out += [rad * cos(x[i]), rad * sin(x[i])]
        return out + [x[i] for i in range(q, n)]

    return ImmersionSpec(n, 2 * q + lam, chart, lo, hi, name="circles_product")


_BUILDERS = {
    "cylinder": _cylinder,
    "generalized_cone": _generalized_cone,
    "rotational": _rotational,
    "standard_cylinder": _standard_cylinder,
    "standard_cone": _standard_cone,
    "standard_torus": _standard_torus,
    "circles_product": _circles_product,
}


def build_family(fi: FamilyInstance) -> ImmersionSpec:
    if fi.tag not in _BUILDERS:
        raise ValueError(f"unknown family {fi.tag!r}; choose from {sorted(_BUILDERS)}")
    spec = _BUILDERS[fi.tag](dict(fi.params))
    spec.params = {**spec.params, "family": fi.tag, **fi.params}
    return spec
