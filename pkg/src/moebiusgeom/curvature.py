"""Connection and curvature of the Moebius metric and of the normal bundle.

Index conventions (chart basis, normal-frame indices a, b, c):

* ``christoffel[k, i, j]`` is the Levi-Civita symbol of g*.
* ``riemann_up[i, j, k, l]`` is the l-component of R(d_i, d_j) d_k with
  R(X, Y) = [nabla_X, nabla_Y] - nabla_[X, Y].
* ``riemann_low[i, j, k, l] = <R(d_i, d_j) d_k, d_l>*``.
* ``conn[i, a, b] = <d_i N_b, N_a>`` and ``R_perp[i, j, a, b] = <R_perp(d_i, d_j) N_b, N_a>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CrossCheckError
from .jets import jeinsum


@dataclass
class CurvatureData:
    gamma_star: np.ndarray
    R_star: np.ndarray
    K_star: np.ndarray
    s_star: float
    scalar_raw: float
    R_perp: np.ndarray
    R_perp_commutator: np.ndarray
    nabla_beta: np.ndarray
    semiparallel: np.ndarray
    nabla2_asym: np.ndarray


# -- field formulas --------------------------------------------------------------

def christoffel(gs, gsinv):
    dg = gs.grad()  # dg[l, i, j] = d_l g*_ij
    lower = dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)
    # lower[i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    return jeinsum("kl,ijl->kij", gsinv, lower) * 0.5


def riemann_up(gamma):
    dgam = gamma.grad()  # dgam[i, l, j, k] = d_i Gamma^l_jk
    quad = jeinsum("lim,mjk->ijkl", gamma, gamma)  # Gamma^l_im Gamma^m_jk
    first = dgam.transpose(0, 2, 3, 1)  # [i, j, k, l] = d_i Gamma^l_jk
    return first - first.transpose(1, 0, 2, 3) + quad - quad.transpose(1, 0, 2, 3)


def lower_last(gs, r_up):
    return jeinsum("ijkm,ml->ijkl", r_up, gs)


def normal_connection(dnormal, normal):
    """``conn[i, a, b] = <d_i N_b, N_a>`` from ``dnormal[i, b, x] = d_i N_b``."""
    return jeinsum("ibx,ax->iab", dnormal, normal)


def normal_curvature(conn):
    dconn = conn.grad()  # dconn[i, j, a, b] = d_i conn[j, a, b]
    quad = jeinsum("iac,jcb->ijab", conn, conn)
    return dconn - dconn.transpose(1, 0, 2, 3) + quad - quad.transpose(1, 0, 2, 3)


def normal_curvature_commutator(beta, gsinv):
    """Ricci-equation form ``(beta_b G^-1 beta_a - beta_a G^-1 beta_b)[j, i]``."""
    left = jeinsum("jma,mn->jna", beta, gsinv)
    prod = jeinsum("jna,nib->ijab", left, beta)  # (beta_a G^-1 beta_b)[j, i]
    return prod.transpose(0, 1, 3, 2) - prod


def covariant_beta(beta, gamma, conn):
    """``D[i, j, k, a] = (nabla_i beta)(d_j, d_k)`` in the normal frame."""
    return (beta.grad()
            + jeinsum("iab,jkb->ijka", conn, beta)
            - jeinsum("mij,mka->ijka", gamma, beta)
            - jeinsum("mik,jma->ijka", gamma, beta))


def second_covariant_beta(dbeta, gamma, conn):
    """``(nabla^2 beta)[i, j, k, l, a] = (nabla_i nabla beta)(d_j, d_k, d_l)``."""
    return (dbeta.grad()
            + jeinsum("iab,jklb->ijkla", conn, dbeta)
            - jeinsum("mij,mkla->ijkla", gamma, dbeta)
            - jeinsum("mik,jmla->ijkla", gamma, dbeta)
            - jeinsum("mil,jkma->ijkla", gamma, dbeta))


def vdwb_action(r_perp, r_up, beta):
    """Van der Waerden-Bortolotti curvature acting on beta, ``[i, j, k, l, a]``."""
    return (jeinsum("ijab,klb->ijkla", r_perp, beta)
            - jeinsum("ijkm,mla->ijkla", r_up, beta)
            - jeinsum("ijlm,kma->ijkla", r_up, beta))


def covariant_symmetric(tensor, gamma):
    """``(nabla_i T)(d_j, d_k)`` for a symmetric scalar 2-tensor."""
    return (tensor.grad()
            - jeinsum("mij,mk->ijk", gamma, tensor)
            - jeinsum("mik,jm->ijk", gamma, tensor))


def exterior_normal(omega, conn):
    """``d omega[i, j, a] = (nabla_i omega)(d_j) - (nabla_j omega)(d_i)``."""
    dom = omega.grad()
    cov = dom + jeinsum("iab,jb->ija", conn, omega)
    return cov - cov.transpose(1, 0, 2)


# -- scalar summaries ----------------------------------------------------------

def sectional_curvatures(r_low: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """``K[i, j] = <R(X_i, X_j) X_j, X_i>*`` for rows X of a g*-orthonormal frame."""
    r = np.einsum("ai,bj,ck,dl,ijkl->abcd", frame, frame, frame, frame, r_low)
    n = frame.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                out[i, j] = r[i, j, j, i]
    return out


def scalar_curvature(r_low: np.ndarray, gsinv: np.ndarray) -> tuple[float, float]:
    """Raw scalar curvature of g* and the normalized s* = S / (n(n-1))."""
    raw = float(np.einsum("ik,jl,ijlk->", gsinv, gsinv, r_low))
    n = gsinv.shape[0]
    return raw, raw / (n * (n - 1))


# -- point-level wrappers -------------------------------------------------------

CROSS_CHECK_TOL = 1e-7


def _cross_check(what, a, b, tol: float = CROSS_CHECK_TOL):
    gap = float(np.max(np.abs(a - b), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    if gap > tol * scale:
        raise CrossCheckError(f"{what}: the two computation routes differ by {gap:.3e}")


def christoffel_star(spec, x) -> np.ndarray:
    from .pipeline import analyze

    return analyze(spec, x).curvature.gamma_star


def riemann_star(spec, x):
    from .pipeline import analyze

    cd = analyze(spec, x).curvature
    return cd.R_star, cd.K_star, cd.s_star


def normal_connection_at(spec, x):
    """``(conn, R_perp)`` at a chart point; the two R_perp routes are cross-checked."""
    from .pipeline import analyze

    pa = analyze(spec, x)
    cd = pa.curvature
    _cross_check("normal curvature", cd.R_perp, cd.R_perp_commutator)
    return pa.conn, cd.R_perp


def nabla_perp_beta(spec, x) -> np.ndarray:
    from .pipeline import analyze

    return analyze(spec, x).curvature.nabla_beta


def semiparallel_tensor(spec, x):
    from .pipeline import analyze

    cd = analyze(spec, x).curvature
    _cross_check("semi-parallel operator", cd.semiparallel, cd.nabla2_asym)
    return cd.semiparallel, cd.nabla2_asym
