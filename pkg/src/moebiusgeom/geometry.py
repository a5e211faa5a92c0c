"""Extrinsic first-order data of a chart immersion and the space-form conformal maps.

The field functions here accept either plain numpy arrays (values at a point)
or :class:`~moebiusgeom.jets.Jet` arrays, in which case every output carries
its own Taylor expansion and can be differentiated further downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateMetricError,
    HyperbolicDomainError,
    InvalidDimensionsError,
    PoleHitError,
    RankDeficiencyError,
    UmbilicPointError,
)
from .jets import ImmersionSpec, Jet, Jet4, jeinsum, jinv, sqrt, stack

EPS_UMBILIC = 1e-10
EPS_METRIC = 1e-10
# normal completion below this residual is re-pivoted locally
PIVOT_RESIDUAL_MIN = 1e-2


def _value(x):
    return x.value if isinstance(x, Jet) else np.asarray(x, dtype=float)


def _dot(a, b):
    return (a * b).sum(-1)


@dataclass
class ExtrinsicData:
    g: np.ndarray
    tangent_frame: np.ndarray
    normal_frame: np.ndarray
    alpha: np.ndarray
    H: np.ndarray
    rho: float

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def p(self) -> int:
        return self.normal_frame.shape[0]


@dataclass
class ExtrinsicFields:
    """Jet-valued extrinsic fields around one chart point."""

    dF: Jet
    ddF: Jet
    g: Jet
    ginv: Jet
    tangent: Jet
    normal: Jet
    alpha: Jet
    H: Jet
    rho: Jet
    pivot: tuple

    def data(self) -> ExtrinsicData:
        return ExtrinsicData(
            g=self.g.value.copy(),
            tangent_frame=self.tangent.value.copy(),
            normal_frame=self.normal.value.copy(),
            alpha=self.alpha.value.copy(),
            H=self.H.value.copy(),
            rho=float(self.rho.value),
        )


# -- field-level building blocks --------------------------------------------

def metric_from_tangents(dF):
    g = jeinsum("ia,ja->ij", dF, dF)
    lam = np.linalg.eigvalsh(_value(g))
    if lam[0] < EPS_METRIC:
        raise DegenerateMetricError(f"induced metric is degenerate (min eigenvalue {lam[0]:.3e})")
    return g


def tangent_frame(dF):
    """Gram-Schmidt of the coordinate tangents in index order."""
    rows = []
    for i in range(dF.shape[0]):
        v = dF[i]
        for t in rows:
            v = v - _dot(v, t) * t
        rows.append(v / sqrt(_dot(v, v)))
    return stack(rows)


def choose_pivot(tangent_values: np.ndarray, p: int) -> tuple:
    """Ambient basis indices for the normal completion, largest residual first."""
    t = np.asarray(tangent_values, dtype=float)
    m = t.shape[1]
    basis = [row for row in t]
    chosen = []
    for _ in range(p):
        best, best_norm, best_vec = None, -1.0, None
        for e in range(m):
            if e in chosen:
                continue
            v = np.eye(m)[e]
            for b in basis:
                v = v - (v @ b) * b
            nv = np.linalg.norm(v)
            if nv > best_norm:
                best, best_norm, best_vec = e, nv, v
        if best_norm < 1e-8:
            raise RankDeficiencyError("ambient basis does not complete the tangent space")
        chosen.append(best)
        basis.append(best_vec / best_norm)
    return tuple(chosen)


def _normal_completion(tangent, pivot, m):
    rows = []
    worst = np.inf
    for e in pivot:
        v = np.eye(m)[e] - (tangent[:, e] * tangent.transpose(1, 0)).sum(-1) \
            if isinstance(tangent, Jet) else np.eye(m)[e] - tangent[:, e] @ tangent
        for nrow in rows:
            v = v - _dot(v, nrow) * nrow
        nv = sqrt(_dot(v, v))
        worst = min(worst, float(_value(nv)))
        rows.append(v / nv)
    return rows, worst


def normal_frame(tangent, pivot: tuple | None = None):
    """Orthonormal normal frame from projected ambient basis vectors.

    Returns ``(frame, pivot_used)``.  A frozen ``pivot`` that has become
    ill-conditioned at this point is replaced by a locally chosen one; every
    tensor identity evaluated downstream is frame independent, so only
    smoothness around the point matters.
    """
    n, m = tangent.shape
    p = m - n
    if p < 1:
        raise InvalidDimensionsError("immersion needs positive codimension")
    tv = _value(tangent)
    if pivot is None:
        pivot = choose_pivot(tv, p)
    rows, worst = _normal_completion(tangent, pivot, m)
    if worst < PIVOT_RESIDUAL_MIN:
        pivot = choose_pivot(tv, p)
        rows, worst = _normal_completion(tangent, pivot, m)
        if worst < 1e-8:
            raise RankDeficiencyError("normal completion is rank deficient")
    return stack(rows), tuple(pivot)


def sff_from_frame(ddF, normal):
    return jeinsum("ijx,ax->ija", ddF, normal)


def mean_curvature(ginv, alpha):
    n = alpha.shape[0]
    return jeinsum("ij,ija->a", ginv, alpha) * (1.0 / n)


def sff_norm2(ginv, alpha):
    mixed = jeinsum("ik,kja->ija", ginv, alpha)
    return jeinsum("ija,jia->", mixed, mixed)


def rho_squared(ginv, alpha, H):
    n = alpha.shape[0]
    return (sff_norm2(ginv, alpha) - n * _dot(H, H)) * (n / (n - 1.0))


def rho_from(ginv, alpha, H):
    r2 = rho_squared(ginv, alpha, H)
    if float(_value(r2)) < EPS_UMBILIC:
        raise UmbilicPointError(f"umbilic point: rho^2 = {float(_value(r2)):.3e}")
    return sqrt(r2)


def extrinsic_fields(F: Jet, pivot: tuple | None = None) -> ExtrinsicFields:
    """All extrinsic fields from the jet of a chart (shape ``(m,)``)."""
    n = F.nvars
    m = F.shape[0]
    if m <= n:
        raise InvalidDimensionsError(f"ambient dimension {m} must exceed {n}")
    dF = F.grad()
    ddF = dF.grad()
    g = metric_from_tangents(dF)
    ginv = jinv(g)
    t = tangent_frame(dF)
    nf, pivot = normal_frame(t, pivot)
    alpha = sff_from_frame(ddF, nf)
    H = mean_curvature(ginv, alpha)
    rho = rho_from(ginv, alpha, H)
    return ExtrinsicFields(dF, ddF, g, ginv, t, nf, alpha, H, rho, pivot)


def freeze_pivot(spec: ImmersionSpec) -> tuple:
    """Decide the normal-completion pivot once, at the domain center."""
    if spec.pivot is None:
        t = tangent_frame(spec.jet(spec.center(), 1).grad().value)
        spec.pivot = choose_pivot(t, spec.m - spec.n)
    return spec.pivot


# -- Jet4 based operations ---------------------------------------------------

def _first(jet: Jet4) -> np.ndarray:
    return np.array([jet[(i,)] for i in range(jet.dim_domain)])


def _second(jet: Jet4) -> np.ndarray:
    n = jet.dim_domain
    return np.array([[jet[(i, j)] for j in range(n)] for i in range(n)])


def induced_metric(jet: Jet4) -> np.ndarray:
    return metric_from_tangents(_first(jet))


def build_frames(jet: Jet4, g=None, pivot: tuple | None = None):
    """``(tangent_frame, normal_frame)`` as rows of ambient vectors."""
    dF = _first(jet)
    if g is None:
        metric_from_tangents(dF)
    t = tangent_frame(dF)
    nf, _ = normal_frame(t, pivot)
    return t, nf


def second_fundamental_form(jet: Jet4, g=None, frames=None, orthonormal: bool = False):
    """Components ``alpha[i, j, a]`` in the chart basis (or the g-orthonormal frame)."""
    if jet.order < 2:
        raise ValueError("second fundamental form needs a jet of order >= 2")
    if frames is None:
        frames = build_frames(jet, g)
    t, nf = frames
    alpha = sff_from_frame(_second(jet), nf)
    if orthonormal:
        w = np.linalg.inv(_first(jet) @ np.asarray(t).T)
        alpha = np.einsum("si,tj,ija->sta", w.T, w.T, alpha)
    return alpha


def conformal_factor(g, alpha, H) -> float:
    return float(rho_from(np.linalg.inv(g), np.asarray(alpha), np.asarray(H)))


def extrinsic_data(spec: ImmersionSpec, x, pivot: tuple | None = None) -> ExtrinsicData:
    return extrinsic_fields(spec.jet(x, 2), pivot).data()


# -- conformal maps ----------------------------------------------------------

def sigma(u):
    """Inverse stereographic projection R^m -> S^m minus (-1, 0)."""
    u = list(u)
    r2 = sum(ui * ui for ui in u)
    den = 1.0 + r2
    return [(1.0 - r2) / den] + [2.0 * ui / den for ui in u]


def inverse_sigma(y, rotation=None, tol: float = 1e-12):
    """Stereographic projection S^m -> R^m from the pole (-1, 0)."""
    y = list(y)
    if rotation is not None:
        q = np.asarray(rotation, dtype=float)
        y = [sum(q[i, j] * y[j] for j in range(len(y)) if q[i, j] != 0.0) for i in range(len(y))]
    den = 1.0 + y[0]
    if abs(float(_value(den))) < tol:
        raise PoleHitError("point coincides with the projection pole (-1, 0)")
    return [yi / den for yi in y[1:]]


def tau(y):
    """Hyperboloid model H^m (first coordinate y0 > 0) to the upper hemisphere."""
    y = list(y)
    if float(_value(y[0])) <= 0:
        raise HyperbolicDomainError("tau needs y0 > 0")
    return [1.0 / y[0]] + [yi / y[0] for yi in y[1:]]


def theta_cone(w, split: int):
    """(y, z) in R^split x R^(n-1) -> (z1 y, z2, ..., z_{n-1})."""
    w = list(w)
    y, z = w[:split], w[split:]
    if float(_value(z[0])) <= 0:
        raise HyperbolicDomainError("theta_cone needs z1 > 0")
    return [z[0] * yi for yi in y] + z[1:]


def theta_rot(w, split: int):
    """(z, y) in R^split x R^q -> (z1, ..., z_{split-1}, z_split y)."""
    w = list(w)
    z, y = w[:split], w[split:]
    if float(_value(z[-1])) <= 0:
        raise HyperbolicDomainError("theta_rot needs z_{p+1} > 0")
    return z[:-1] + [z[-1] * yi for yi in y]


def _map_dims(tag: str, m: int, params: dict) -> int:
    if tag == "sigma":
        return m + 1
    if tag in ("inverse_sigma", "tau"):
        if tag == "inverse_sigma":
            if m < 2:
                raise InvalidDimensionsError("inverse_sigma needs ambient dimension >= 2")
            return m - 1
        return m
    split = params.get("split")
    if split is None or not 1 <= split < m:
        raise InvalidDimensionsError(f"{tag} needs 1 <= split < {m}")
    if tag == "theta_cone":
        return m - 1
    if tag == "theta_rot":
        return m - 1
    raise ValueError(f"unknown conformal map {tag!r}")


def apply_conformal_map(spec: ImmersionSpec, map_tag: str, params: dict | None = None) -> ImmersionSpec:
    """Post-compose a chart with one of the conformal maps."""
    params = dict(params or {})
    m_out = _map_dims(map_tag, spec.m, params)
    inner = spec.chart
    if map_tag == "sigma":
        def chart(x):
            return sigma(inner(x))
    elif map_tag == "inverse_sigma":
        rot = params.get("rotation")
        if rot is not None and np.asarray(rot).shape != (spec.m, spec.m):
            raise InvalidDimensionsError("rotation must be an m x m matrix")

        def chart(x):
            return inverse_sigma(inner(x), rot)
    elif map_tag == "tau":
        def chart(x):
            return tau(inner(x))
    elif map_tag == "theta_cone":
        def chart(x):
            return theta_cone(inner(x), params["split"])
    else:
        def chart(x):
            return theta_rot(inner(x), params["split"])
    return ImmersionSpec(
        n=spec.n, m=m_out, chart=chart, lo=spec.lo.copy(), hi=spec.hi.copy(),
        name=f"{map_tag}({spec.name})", params={**spec.params, map_tag: params},
    )
