"""Full per-point evaluation: every tensor is computed as a jet field and
differentiated exactly, then reduced to its value at the point."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import curvature as cv
from . import moebius as mb
from .geometry import ExtrinsicData, extrinsic_fields, freeze_pivot
from .jets import ImmersionSpec, jeinsum, jinv

# Blaschke's covariant derivative needs five derivatives of the chart
DEFAULT_ORDER = 5


@dataclass
class PointAnalysis:
    x: np.ndarray
    extrinsic: ExtrinsicData
    moebius: mb.MoebiusData
    curvature: cv.CurvatureData
    conn: np.ndarray
    gamma_f: np.ndarray
    grad_rho: np.ndarray
    basis: np.ndarray
    dB: np.ndarray
    nabla_psi: np.ndarray
    d_omega: np.ndarray
    pivot: tuple
    _spectral: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.extrinsic.n

    @property
    def p(self) -> int:
        return self.extrinsic.p

    def spectral(self, seed: int = 0, tol: float = mb.EPS_CLUSTER) -> mb.SpectralData:
        key = (seed, tol)
        if key not in self._spectral:
            self._spectral[key] = mb.principal_normals(self.moebius, tol=tol, seed=seed)
        return self._spectral[key]


def analyze(spec: ImmersionSpec, x, order: int = DEFAULT_ORDER) -> PointAnalysis:
    if order < DEFAULT_ORDER:
        raise ValueError(f"the full pipeline needs jets of order >= {DEFAULT_ORDER}")
    pivot = freeze_pivot(spec)
    x = spec.check_point(x)
    F = spec.jet(x, order)
    ex = extrinsic_fields(F, pivot)

    gs = mb.moebius_metric_field(ex.g, ex.rho)
    gsinv = jinv(gs)
    beta = mb.moebius_sff_field(ex.g, ex.alpha, ex.H, ex.rho)
    gamma = cv.christoffel(gs, gsinv)
    conn = cv.normal_connection(ex.normal.grad(), ex.normal)
    psi = mb.blaschke_field(beta, ex.H, ex.rho, gs, gsinv, gamma)
    omega = mb.moebius_form_field(beta, ex.H, ex.rho, gsinv, conn)

    r_up = cv.riemann_up(gamma)
    r_perp = cv.normal_curvature(conn)
    dbeta = cv.covariant_beta(beta, gamma, conn)
    nabla2 = cv.second_covariant_beta(dbeta, gamma, conn)
    semi = cv.vdwb_action(r_perp, r_up, beta)
    comm = cv.normal_curvature_commutator(beta, gsinv)
    nabla_psi = cv.covariant_symmetric(psi, gamma)
    d_omega = cv.exterior_normal(omega, conn)
    shape_ops = jeinsum("ik,kja->aij", gsinv, beta)

    gs_v = gs.value
    gsinv_v = gsinv.value
    r_low = cv.lower_last(gs_v, r_up.value)
    md = mb.MoebiusData(g_star=gs_v, beta=beta.value, psi=psi.value, omega=omega.value)
    basis = mb.orthonormal_basis(gs_v)
    raw, s_star = cv.scalar_curvature(r_low, gsinv_v)
    n2 = nabla2.value
    cd = cv.CurvatureData(
        gamma_star=gamma.value,
        R_star=r_low,
        K_star=cv.sectional_curvatures(r_low, basis.T),
        s_star=s_star,
        scalar_raw=raw,
        R_perp=r_perp.value,
        R_perp_commutator=comm.value,
        nabla_beta=dbeta.value,
        semiparallel=semi.value,
        nabla2_asym=n2 - n2.transpose(1, 0, 2, 3, 4),
    )
    ginv_v = ex.ginv.value
    gamma_f = cv.christoffel(ex.g, ex.ginv).value
    return PointAnalysis(
        x=x, extrinsic=ex.data(), moebius=md, curvature=cd, conn=conn.value,
        gamma_f=gamma_f, grad_rho=ginv_v @ ex.rho.grad().value, basis=basis,
        dB=shape_ops.grad().value, nabla_psi=nabla_psi.value, d_omega=d_omega.value,
        pivot=ex.pivot,
    )
