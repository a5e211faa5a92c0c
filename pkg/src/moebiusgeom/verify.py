"""Residual suite over sample points.

Every structure equation is evaluated as ``max |lhs - rhs| / max(1, |lhs|, |rhs|)``
with all tangent slots expressed in a g*-orthonormal frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, NonCommutingError, VerdictDisagreementError
from .moebius import SpectralData, to_frame
from .pipeline import PointAnalysis, analyze

DEFAULT_TOL = 1e-7

CHECK_NAMES = {
    "gauss": "conformal_gauss",
    "codazzi": "conformal_codazzi",
    "ricci": "conformal_ricci",
    "semiparallel": "semi_parallel",
    "parallel": "moebius_parallel",
    "identities": "moebius_identities",
    "classify": "spectral_classification",
    "ode": "curvature_ode",
}
ALL_CHECKS = tuple(CHECK_NAMES)
# "all" leaves out parallel: most families are legitimately not Moebius parallel
DEFAULT_ALL = ("gauss", "codazzi", "ricci", "semiparallel", "identities", "classify", "ode")

COMPONENTS = {
    "gauss": ("conformal_gauss",),
    "codazzi": ("conformal_codazzi_beta", "conformal_codazzi_psi"),
    "ricci": ("conformal_ricci_omega", "conformal_ricci_normal"),
    "semiparallel": ("semi_parallel", "semi_parallel_pairwise", "semi_parallel_dual"),
    "parallel": ("moebius_parallel",),
    "identities": ("trace_beta", "norm_beta", "trace_psi", "principal_norms"),
    "classify": ("vanishing_h_count", "normal_orthogonality", "principal_count_bound"),
    "ode": ("curvature_ode",),
}


@dataclass
class ResidualReport:
    check_name: str
    points: list
    residuals: list
    tolerance: float
    passed: bool
    metadata: dict = field(default_factory=dict)
    components: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0

    @property
    def point_of_max(self):
        if not self.residuals:
            return None
        return list(self.points[int(np.argmax(self.residuals))])


def _scaled(lhs, rhs) -> float:
    lhs, rhs = np.asarray(lhs), np.asarray(rhs)
    scale = max(1.0, float(np.max(np.abs(lhs), initial=0.0)), float(np.max(np.abs(rhs), initial=0.0)))
    return float(np.max(np.abs(lhs - rhs), initial=0.0)) / scale


def _report(name, points, residuals, tol, metadata=None, components=None, skipped=None):
    res = [float(r) for r in residuals]
    if not all(math.isfinite(r) for r in res):
        raise GeometryError(f"{name}: non-finite residual")
    return ResidualReport(
        check_name=name, points=[list(map(float, p)) for p in points], residuals=res,
        tolerance=tol, passed=all(r <= tol for r in res), metadata=dict(metadata or {}),
        components=dict(components or {}), skipped=list(skipped or []))


# -- per-point residuals ---------------------------------------------------------

def gauss_sides(pa: PointAnalysis):
    md = pa.moebius
    b, psi, gs = md.beta, md.psi, md.g_star
    rhs = (np.einsum("ila,jka->ijkl", b, b) - np.einsum("ika,jla->ijkl", b, b)
           + np.einsum("il,jk->ijkl", psi, gs) + np.einsum("jk,il->ijkl", psi, gs)
           - np.einsum("ik,jl->ijkl", psi, gs) - np.einsum("jl,ik->ijkl", psi, gs))
    return to_frame(pa.curvature.R_star, pa.basis, 4), to_frame(rhs, pa.basis, 4)


def gauss_residual(pa: PointAnalysis, psi_shift: np.ndarray | None = None) -> float:
    if psi_shift is not None:
        pa = _with_psi(pa, pa.moebius.psi + psi_shift)
    return _scaled(*gauss_sides(pa))


def _with_psi(pa, psi):
    from dataclasses import replace

    return replace(pa, moebius=replace(pa.moebius, psi=psi))


def codazzi_sides(pa: PointAnalysis, omega: np.ndarray | None = None):
    """((C1 lhs, C1 rhs), (C2 lhs, C2 rhs)) in the orthonormal frame."""
    md = pa.moebius
    om = md.omega if omega is None else omega
    gs, b = md.g_star, md.beta
    d = pa.curvature.nabla_beta
    c1l = d - d.transpose(1, 0, 2, 3)
    c1r = np.einsum("jk,ia->ijka", gs, om) - np.einsum("ik,ja->ijka", gs, om)
    npsi = pa.nabla_psi
    c2l = npsi - npsi.transpose(1, 0, 2)
    c2r = np.einsum("ja,ika->ijk", om, b) - np.einsum("ia,jka->ijk", om, b)
    e = pa.basis
    return ((to_frame(c1l, e, 3), to_frame(c1r, e, 3)),
            (to_frame(c2l, e, 3), to_frame(c2r, e, 3)))


def codazzi_residuals(pa: PointAnalysis, omega=None) -> tuple[float, float]:
    (a, b), (c, d) = codazzi_sides(pa, omega)
    return _scaled(a, b), _scaled(c, d)


def ricci_residuals(pa: PointAnalysis) -> tuple[float, float]:
    md = pa.moebius
    psi_hat = np.linalg.solve(md.g_star, md.psi)
    b = md.beta
    rhs = np.einsum("jma,mi->ija", b, psi_hat) - np.einsum("ima,mj->ija", b, psi_hat)
    e = pa.basis
    r1 = _scaled(to_frame(pa.d_omega, e, 2), to_frame(rhs, e, 2))
    cd = pa.curvature
    r2 = _scaled(to_frame(cd.R_perp, e, 2), to_frame(cd.R_perp_commutator, e, 2))
    return r1, r2


def semiparallel_residual(pa: PointAnalysis) -> float:
    return float(np.max(np.abs(to_frame(pa.curvature.semiparallel, pa.basis, 4))))


def semiparallel_dual_residual(pa: PointAnalysis) -> float:
    cd = pa.curvature
    e = pa.basis
    return _scaled(to_frame(cd.semiparallel, e, 4), to_frame(cd.nabla2_asym, e, 4))


def parallel_residual(pa: PointAnalysis) -> float:
    return float(np.max(np.abs(to_frame(pa.curvature.nabla_beta, pa.basis, 3))))


def pairwise_criterion(sd: SpectralData) -> np.ndarray:
    """``r[i, j] = <eta_i, eta_j> + theta_i + theta_j`` for distinct principal normals."""
    k = sd.k
    r = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i != j:
                r[i, j] = float(sd.eta_bar[i] @ sd.eta_bar[j]) + sd.theta[i] + sd.theta[j]
    return r


def principal_norm_closed_forms(n: int, k: int) -> tuple[float, float]:
    """Norms of the two principal normals when the first has multiplicity k."""
    return (math.sqrt((n - 1) * (n - k) / (k * n * n)),
            math.sqrt(k * (n - 1) / (n * n * (n - k))))


def identity_residuals(pa: PointAnalysis, sd: SpectralData | None = None) -> dict:
    md = pa.moebius
    n = pa.n
    bf = to_frame(md.beta, pa.basis, 2)
    trace = np.einsum("iia->a", bf)
    norm2 = float(np.sum(bf * bf))
    tr_psi = float(np.trace(np.linalg.solve(md.g_star, md.psi)))
    out = {
        "trace_beta": float(np.max(np.abs(trace))),
        "norm_beta": abs(norm2 - (n - 1) / n),
        "trace_psi": abs(tr_psi - (n * n * pa.curvature.s_star + 1) / (2 * n)),
    }
    if sd is not None and sd.k == 2:
        k = sd.mult[0]
        e1, e2 = principal_norm_closed_forms(n, k)
        out["principal_norms"] = max(abs(np.linalg.norm(sd.eta_bar[0]) - e1),
                                     abs(np.linalg.norm(sd.eta_bar[1]) - e2))
    return out


def principal_normal_derivatives(pa: PointAnalysis, sd: SpectralData) -> np.ndarray:
    """Normal covariant derivative of each principal normal, ``[cluster, l, a]``,
    with the direction index l in the g*-orthonormal basis."""
    gs = pa.moebius.g_star
    out = []
    for c in range(sd.k):
        rows = sd.eigenframe[sd.labels == c]
        proj = rows.T @ rows @ gs
        m = rows.shape[0]
        d_eta = np.einsum("ij,laji->la", proj, pa.dB) / m
        cov = d_eta + np.einsum("lab,b->la", pa.conn, sd.eta_bar[c])
        out.append(pa.basis.T @ cov)
    return np.array(out)


def eigenframe_curvatures(pa: PointAnalysis, sd: SpectralData) -> np.ndarray:
    from .curvature import sectional_curvatures

    return sectional_curvatures(pa.curvature.R_star, sd.eigenframe)


def classify_spectrum(sd: SpectralData, curvature=None, tol: float = DEFAULT_TOL,
                      omega_norm: float | None = None, eta_derivative_norm: float | None = None,
                      p: int | None = None, eigen_k: np.ndarray | None = None) -> dict:
    """Descriptive record of the principal-normal structure at one point."""
    h = np.array(sd.h)
    vanishing = [i for i, v in enumerate(h) if abs(v) < 1e-6]
    rec = {
        "k": sd.k,
        "multiplicities": list(sd.mult),
        "h": [float(v) for v in h],
        "theta": [float(v) for v in sd.theta],
        "eta_bar_norms": [float(np.linalg.norm(v)) for v in sd.eta_bar],
        "vanishing_h": vanishing,
        "vanishing_h_ok": len(vanishing) <= 1,
        "case": "a" if vanishing else "b",
        "normal_orthogonality": None,
        "principal_count_bound_ok": None,
    }
    if vanishing and sd.k >= 3:
        kk = vanishing[0]
        worst = 0.0
        others = [i for i in range(sd.k) if i != kk]
        for i in others:
            for j in others:
                if i != j:
                    worst = max(worst, abs(float((sd.eta_bar[i] - sd.eta_bar[kk])
                                                 @ (sd.eta_bar[j] - sd.eta_bar[kk]))))
        rec["normal_orthogonality"] = worst
        if p is not None:
            rec["principal_count_bound_ok"] = sd.k <= p + 1
    kmat = eigen_k
    if kmat is None and curvature is not None:
        from .curvature import sectional_curvatures

        kmat = sectional_curvatures(curvature.R_star, sd.eigenframe)
    if kmat is not None:
        mixed = [abs(kmat[i, j]) for i in range(len(sd.labels)) for j in range(len(sd.labels))
                 if sd.labels[i] != sd.labels[j]]
        rec["max_mixed_K"] = float(max(mixed)) if mixed else 0.0
        rec["max_abs_K"] = float(np.max(np.abs(kmat)))
    rec["all_multiplicities_ge_2"] = all(m >= 2 for m in sd.mult)
    if omega_norm is not None and eta_derivative_norm is not None:
        rec["omega_norm"] = omega_norm
        rec["eta_derivative_norm"] = eta_derivative_norm
        rec["isoparametric"] = bool(omega_norm <= tol and eta_derivative_norm <= tol)
    return rec


def check_semiparallel_criterion(sd: SpectralData, tol: float = DEFAULT_TOL,
                                 tensor_residual: float | None = None,
                                 tensor_tol: float = DEFAULT_TOL, point=None) -> ResidualReport:
    r = pairwise_criterion(sd)
    res = float(np.max(np.abs(r))) if sd.k > 1 else 0.0
    meta = {"pairs": r.tolist()}
    if tensor_residual is not None:
        meta["tensor_residual"] = tensor_residual
        if (res <= tol) != (tensor_residual <= tensor_tol):
            raise VerdictDisagreementError(
                f"pairwise criterion {res:.3e} and tensor residual {tensor_residual:.3e} disagree")
    pts = [point] if point is not None else [[]]
    return _report("semi_parallel_pairwise", pts, [res], tol, metadata=meta)


# -- point records and aggregation -------------------------------------------------

def point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def point_record(spec, x, checks, seed: int = 42, index: int = 0,
                 tol: float = DEFAULT_TOL) -> dict:
    """All requested residuals at one point; failures become a skip notice."""
    rec = {"index": index, "point": [float(v) for v in x], "residuals": {}, "skipped": None}
    try:
        pa = analyze(spec, x)
    except GeometryError as exc:
        rec["skipped"] = f"{type(exc).__name__}: {exc}"
        return rec
    res = rec["residuals"]
    checks = set(checks)
    sd = None
    spectral_error = None
    try:
        sd = pa.spectral(point_seed(seed, index))
    except GeometryError as exc:
        spectral_error = f"{type(exc).__name__}: {exc}"
    if "gauss" in checks:
        res["conformal_gauss"] = gauss_residual(pa)
    if "codazzi" in checks:
        res["conformal_codazzi_beta"], res["conformal_codazzi_psi"] = codazzi_residuals(pa)
    if "ricci" in checks:
        res["conformal_ricci_omega"], res["conformal_ricci_normal"] = ricci_residuals(pa)
    if "semiparallel" in checks:
        tensor = semiparallel_residual(pa)
        res["semi_parallel"] = tensor
        res["semi_parallel_dual"] = semiparallel_dual_residual(pa)
        if sd is not None:
            rep = check_semiparallel_criterion(sd, tol, tensor_residual=tensor, tensor_tol=tol)
            res["semi_parallel_pairwise"] = rep.max_residual
    if "parallel" in checks:
        res["moebius_parallel"] = parallel_residual(pa)
    if "identities" in checks:
        res.update(identity_residuals(pa, sd))
    if "classify" in checks and sd is not None:
        omega_norm = float(np.max(np.abs(pa.basis.T @ pa.moebius.omega)))
        eta_der = float(np.max(np.abs(principal_normal_derivatives(pa, sd))))
        cl = classify_spectrum(sd, pa.curvature, tol, omega_norm, eta_der, p=pa.p,
                               eigen_k=eigenframe_curvatures(pa, sd))
        rec["classification"] = cl
        res["vanishing_h_count"] = 0.0 if cl["vanishing_h_ok"] else 1.0
        if cl["normal_orthogonality"] is not None:
            res["normal_orthogonality"] = cl["normal_orthogonality"]
        if cl["principal_count_bound_ok"] is not None:
            res["principal_count_bound"] = 0.0 if cl["principal_count_bound_ok"] else 1.0
    if "ode" in checks:
        cs = spec.params.get("curve")
        if cs is not None:
            from .curves import ode_residual

            res["curvature_ode"] = abs(ode_residual(cs, float(x[0])))
    if sd is not None:
        rec["spectral"] = {"k": sd.k, "multiplicities": list(sd.mult),
                           "h": [float(v) for v in sd.h], "case": "a" if any(abs(v) < 1e-6 for v in sd.h) else "b"}
    elif spectral_error:
        rec["spectral_error"] = spectral_error
    rec["s_star"] = float(pa.curvature.s_star)
    return rec


def aggregate(records: list, checks, tolerances: dict | None = None,
              default_tol: float = DEFAULT_TOL, metadata: dict | None = None) -> dict:
    """Reduce point records (already in index order) to one report per check."""
    tolerances = tolerances or {}
    reports = {}
    skipped = [(r["point"], r["skipped"]) for r in records if r["skipped"]]
    for check in checks:
        tol = float(tolerances.get(check, default_tol))
        pts, vals = [], []
        comps = {}
        for r in records:
            if r["skipped"]:
                continue
            present = [r["residuals"][c] for c in COMPONENTS[check] if c in r["residuals"]]
            for c in COMPONENTS[check]:
                if c in r["residuals"]:
                    comps[c] = max(comps.get(c, 0.0), r["residuals"][c])
            if present:
                pts.append(r["point"])
                vals.append(max(present))
        reports[check] = _report(CHECK_NAMES[check], pts, vals, tol, metadata, comps, skipped)
    return reports


def run_points(spec, points, checks, seed: int = 42, tol: float = DEFAULT_TOL) -> list:
    return [point_record(spec, x, checks, seed, i, tol) for i, x in enumerate(points)]


def _suite(spec, points, check, tol, seed=42):
    recs = run_points(spec, points, [check], seed, tol)
    return aggregate(recs, [check], default_tol=tol,
                     metadata={"family": spec.params.get("family", spec.name)})[check]


def check_gauss(spec, points, tol: float = DEFAULT_TOL) -> ResidualReport:
    return _suite(spec, points, "gauss", tol)


def check_codazzi(spec, points, tol: float = DEFAULT_TOL) -> ResidualReport:
    return _suite(spec, points, "codazzi", tol)


def check_ricci(spec, points, tol: float = DEFAULT_TOL) -> ResidualReport:
    return _suite(spec, points, "ricci", tol)


def check_semiparallel(spec, points, tol: float = DEFAULT_TOL, seed: int = 42) -> ResidualReport:
    return _suite(spec, points, "semiparallel", tol, seed)


def check_parallel(spec, points, tol: float = DEFAULT_TOL) -> ResidualReport:
    return _suite(spec, points, "parallel", tol)


def check_identities(spec, points, tol: float = DEFAULT_TOL) -> ResidualReport:
    return _suite(spec, points, "identities", tol)


def check_ode(spec, points, tol: float = DEFAULT_TOL) -> ResidualReport:
    return _suite(spec, points, "ode", tol)


def check_classify(spec, points, tol: float = DEFAULT_TOL, seed: int = 42) -> ResidualReport:
    return _suite(spec, points, "classify", tol, seed)


def sample_grid(spec, counts, inset: float = 0.1) -> np.ndarray:
    """Tensor grid with ``counts[i]`` nodes per axis, inset from the box edges."""
    lo, hi = spec.domain
    width = hi - lo
    axes = []
    for i, c in enumerate(counts):
        a, b = lo[i] + inset * width[i], hi[i] - inset * width[i]
        axes.append(np.array([0.5 * (a + b)]) if c == 1 else np.linspace(a, b, c))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def sample_random(spec, count: int, seed: int = 0, inset: float = 0.1) -> np.ndarray:
    lo, hi = spec.domain
    width = hi - lo
    rng = np.random.default_rng(seed)
    return lo + inset * width + rng.random((count, spec.n)) * (1 - 2 * inset) * width


__all__ = [
    "ResidualReport", "check_gauss", "check_codazzi", "check_ricci", "check_semiparallel",
    "check_semiparallel_criterion", "check_parallel", "check_identities", "check_ode",
    "check_classify", "classify_spectrum", "point_record", "aggregate", "sample_grid",
    "sample_random", "NonCommutingError",
]
