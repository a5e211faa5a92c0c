"""Moebius invariants at a point: metric, second fundamental form, Blaschke
tensor, Moebius form, shape operators and the principal-normal spectrum."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ClusterAmbiguityError, NonCommutingError
from .geometry import ExtrinsicData
from .jets import jeinsum

EPS_FLAT = 1e-8
EPS_CLUSTER = 1e-6
DRAW_RETRIES = 8


@dataclass
class MoebiusData:
    g_star: np.ndarray
    beta: np.ndarray
    psi: np.ndarray
    omega: np.ndarray
    B: np.ndarray = field(default=None)
    psi_hat: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.B is None or self.psi_hat is None:
            self.B, self.psi_hat = shape_operators(self)


@dataclass
class SpectralData:
    k: int
    eta_bar: list
    theta: list
    mult: list
    h: list
    eigenframe: np.ndarray
    labels: np.ndarray = field(default=None)
    flatness: float = 0.0


# -- field formulas (arrays or jets) -------------------------------------------

def moebius_metric_field(g, rho):
    return g * (rho * rho)


def moebius_sff_field(g, alpha, H, rho):
    gH = jeinsum("ij,a->ija", g, H)
    return (alpha - gH) * rho


def blaschke_field(beta, H, rho, gs, gsinv, christoffel):
    """Blaschke tensor from the extrinsic fields and the Moebius connection."""
    drho = rho.grad()
    hess = drho.grad() - jeinsum("kij,k->ij", christoffel, drho)
    grad_norm2 = jeinsum("i,i->", drho, jeinsum("ij,j->i", gsinv, drho))
    h2 = (H * H).sum()
    inv = 1.0 / rho
    term_h = jeinsum("ija,a->ij", beta, H) * inv
    term_g = gs * ((grad_norm2 + h2) * (0.5 * inv * inv))
    return term_h + term_g - hess * inv


def moebius_form_field(beta, H, rho, gsinv, conn):
    """Moebius form ``omega[i, a]``; ``conn[i, a, b] = <d_i N_b, N_a>``."""
    drho = rho.grad()
    grad_star = jeinsum("ij,j->i", gsinv, drho)
    nabla_h = H.grad() + jeinsum("iab,b->ia", conn, H)
    return -(nabla_h + jeinsum("ija,j->ia", beta, grad_star)) * (1.0 / rho)


# -- value-level operations ----------------------------------------------------

def moebius_metric(ext: ExtrinsicData) -> np.ndarray:
    return moebius_metric_field(ext.g, ext.rho)


def moebius_sff(ext: ExtrinsicData) -> np.ndarray:
    return moebius_sff_field(ext.g, ext.alpha, ext.H, ext.rho)


def blaschke_tensor(spec, x) -> np.ndarray:
    from .pipeline import analyze

    return analyze(spec, x).moebius.psi


def moebius_form(spec, x) -> np.ndarray:
    from .pipeline import analyze

    return analyze(spec, x).moebius.omega


def shape_operators(md: MoebiusData):
    """``(B, psi_hat)`` with ``B[a] = g*^-1 beta_a`` and ``psi_hat = g*^-1 psi``."""
    gsinv = np.linalg.inv(md.g_star)
    B = np.einsum("ik,kja->aij", gsinv, md.beta)
    return B, gsinv @ md.psi


def orthonormal_basis(g_star: np.ndarray) -> np.ndarray:
    """Columns form a g*-orthonormal basis of the chart tangent space."""
    low = np.linalg.cholesky(g_star)
    return np.linalg.inv(low).T


def to_frame(tensor: np.ndarray, basis: np.ndarray, slots: int) -> np.ndarray:
    """Express the first ``slots`` tangent indices of a chart tensor in ``basis``."""
    out = tensor
    for s in range(slots):
        out = np.moveaxis(np.tensordot(basis.T, np.moveaxis(out, s, 0), axes=(1, 0)), 0, s)
    return out


def _offdiag(m: np.ndarray) -> float:
    return float(np.linalg.norm(m - np.diag(np.diag(m))))


def joint_diagonalize(mats: list, sweeps: int = 50, tol: float = 1e-15) -> np.ndarray:
    """Orthogonal V approximately diagonalizing every symmetric matrix in ``mats``
    (Jacobi rotations of Cardoso and Souloumiac)."""
    mats = [np.array(m, dtype=float) for m in mats]
    n = mats[0].shape[0]
    v = np.eye(n)
    for _ in range(sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                gvec = np.array([[m[p, p] - m[q, q], 2.0 * m[p, q]] for m in mats])
                gg = gvec.T @ gvec
                w, u = np.linalg.eigh(gg)
                x, y = u[:, -1]
                if x < 0:
                    x, y = -x, -y
                r = np.hypot(x, y)
                if r == 0:
                    continue
                c = np.sqrt((x + r) / (2 * r))
                s = y / np.sqrt(2 * r * (x + r))
                if abs(s) > tol:
                    rotated = True
                    rot = np.eye(n)
                    rot[p, p] = rot[q, q] = c
                    rot[p, q], rot[q, p] = -s, s
                    mats = [rot.T @ m @ rot for m in mats]
                    v = v @ rot
        if not rotated:
            break
    return v


def _cluster(vectors: np.ndarray, tol: float):
    labels = -np.ones(len(vectors), dtype=int)
    reps = []
    for j, vec in enumerate(vectors):
        for c, rep in enumerate(reps):
            if np.linalg.norm(vec - rep) <= tol * max(1.0, np.linalg.norm(rep)):
                labels[j] = c
                break
        else:
            labels[j] = len(reps)
            reps.append(vec)
    return labels


def flatness_defect(beta_frame: np.ndarray, psi_frame: np.ndarray) -> tuple[float, float]:
    """Normalized commutator norms ``(max over [B_a, B_b], max over [B_a, psi_hat])``."""
    p = beta_frame.shape[2]
    mats = [beta_frame[:, :, a] for a in range(p)]
    bnorm = max(max(np.linalg.norm(m) for m in mats), 1e-300)
    pnorm = max(np.linalg.norm(psi_frame), bnorm)
    bb = 0.0
    for a in range(p):
        for b in range(a + 1, p):
            comm = mats[a] @ mats[b] - mats[b] @ mats[a]
            bb = max(bb, np.linalg.norm(comm) / bnorm**2)
    bp = max(np.linalg.norm(m @ psi_frame - psi_frame @ m) for m in mats) / (bnorm * pnorm)
    return bb, bp


def principal_normals(md: MoebiusData, tol: float = EPS_CLUSTER, seed: int = 0,
                      eps_flat: float = EPS_FLAT) -> SpectralData:
    """Joint eigen-decomposition of the shape operators and the Blaschke operator."""
    basis = orthonormal_basis(md.g_star)
    bf = to_frame(md.beta, basis, 2)
    pf = to_frame(md.psi, basis, 2)
    bf = 0.5 * (bf + bf.transpose(1, 0, 2))
    pf = 0.5 * (pf + pf.T)
    n, _, p = bf.shape
    bb, bp = flatness_defect(bf, pf)
    if bb > eps_flat:
        raise NonCommutingError(f"shape operators do not commute (defect {bb:.3e})")
    if bp > eps_flat:
        raise NonCommutingError(f"Blaschke operator does not commute with B (defect {bp:.3e})")
    mats = [bf[:, :, a] for a in range(p)] + [pf]
    scale = max(1.0, max(np.linalg.norm(m) for m in mats))
    rng = np.random.default_rng(seed)
    vecs = None
    for _ in range(DRAW_RETRIES):
        coeffs = rng.standard_normal(len(mats))
        combo = sum(c * m for c, m in zip(coeffs, mats))
        _, v = np.linalg.eigh(combo)
        if all(_offdiag(v.T @ m @ v) <= 1e-10 * scale for m in mats):
            vecs = v
            break
    if vecs is None:
        vecs = joint_diagonalize(mats)
    # one refining sweep over the whole family
    vecs = vecs @ joint_diagonalize([vecs.T @ m @ vecs for m in mats], sweeps=1)
    eta = np.array([[vecs[:, j] @ bf[:, :, a] @ vecs[:, j] for a in range(p)] for j in range(n)])
    theta = np.array([vecs[:, j] @ pf @ vecs[:, j] for j in range(n)])
    labels = _cluster(eta, tol)
    k = int(labels.max()) + 1
    eta_bar = [eta[labels == c].mean(axis=0) for c in range(k)]
    for a in range(k):
        for b in range(a + 1, k):
            gap = np.linalg.norm(eta_bar[a] - eta_bar[b])
            if gap <= 2 * tol * max(1.0, np.linalg.norm(eta_bar[a])):
                raise ClusterAmbiguityError(
                    f"principal normals {a} and {b} are {gap:.3e} apart, inside 2*eps_cluster")
    th = [float(theta[labels == c].mean()) for c in range(k)]
    mult = [int(np.sum(labels == c)) for c in range(k)]
    h = [float(eta_bar[c] @ eta_bar[c] + 2 * th[c]) for c in range(k)]
    return SpectralData(k=k, eta_bar=eta_bar, theta=th, mult=mult, h=h,
                        eigenframe=(basis @ vecs).T, labels=labels, flatness=max(bb, bp))
