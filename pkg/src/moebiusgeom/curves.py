"""Unit-speed plane curves of prescribed curvature in the three space forms.

A curve lives in one of three ambient models:

* ``space_form = 0``: Euclidean R^(p+1);
* ``space_form = 1``: the unit sphere in R^(p+2);
* ``space_form = -1``: hyperbolic space, integrated on the hyperboloid
  ``-y0^2 + |y|^2 = -1`` in Minkowski space and reported in the upper
  half-space model (last coordinate positive).

The curvature ODE families are indexed by ``ode_branch = -space_form``: the
constant c for which the curve lies in the space form of curvature -c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintDriftError, InvalidStepError, KappaDomainError
from .exprparse import eval_any, parse
from .jets import Jet, exp, ipow, power, variables

DRIFT_TOL = 1e-9


# -- curvature functions -------------------------------------------------------

class Kappa:
    """Curvature as a function of arc length, evaluable on floats and jets."""

    tag = "kappa"

    def __call__(self, s):
        raise NotImplementedError

    def derivatives(self, s0: float, count: int = 2) -> np.ndarray:
        """``[kappa, kappa_s, ..., d^count kappa]`` at ``s0``."""
        j = self(variables([s0], count)[0])
        return np.array([j.partial([k]) for k in range(count + 1)], dtype=float)

    def validate(self, s_range) -> None:
        lo, hi = s_range
        grid = np.linspace(lo, hi, 401)
        for s in grid:
            try:
                v = float(self(float(s)))
            except Exception as exc:
                raise KappaDomainError(f"{self.describe()} undefined at s={s:.6g}: {exc}") from exc
            if not v > 0 or not math.isfinite(v):
                raise KappaDomainError(f"{self.describe()} is not positive at s={s:.6g}")

    def describe(self) -> str:
        return self.tag


@dataclass
class ExponentialKappa(Kappa):
    b: float = 1.0
    a: float = 1.0
    tag = "exponential"

    def __call__(self, s):
        return self.b * exp(self.a * s)

    def derivatives(self, s0: float, count: int = 2) -> np.ndarray:
        k = self.b * math.exp(self.a * s0)
        return np.array([k * self.a**j for j in range(count + 1)])

    def validate(self, s_range) -> None:
        if not self.b > 0:
            raise KappaDomainError(f"exponential kappa needs b > 0, got {self.b}")

    def describe(self) -> str:
        return f"{self.b}*exp({self.a}*s)"


@dataclass
class InverseSqrtKappa(Kappa):
    """``1 / sqrt(c s + b)``."""

    c: float = 1.0
    b: float = 1.0
    tag = "inverse_sqrt"

    def __call__(self, s):
        arg = self.c * s + self.b
        if float(arg.value if isinstance(arg, Jet) else arg) <= 0:
            raise KappaDomainError(f"c*s+b <= 0 at s={float(arg.value if isinstance(arg, Jet) else s)}")
        return power(arg, -0.5)

    def derivatives(self, s0: float, count: int = 2) -> np.ndarray:
        u = self.c * s0 + self.b
        if u <= 0:
            raise KappaDomainError(f"c*s+b <= 0 at s={s0}")
        out, coef = [], 1.0
        for j in range(count + 1):
            out.append(coef * self.c**j * u ** (-0.5 - j))
            coef *= -0.5 - j
        return np.array(out)

    def validate(self, s_range) -> None:
        lo, hi = s_range
        for s in (lo, hi):
            if self.c * s + self.b <= 0:
                root = -self.b / self.c if self.c != 0 else s
                raise KappaDomainError(
                    f"c*s+b must stay positive on [{lo}, {hi}]; it vanishes at s={root:.6g}")

    def describe(self) -> str:
        return f"1/sqrt({self.c}*s+{self.b})"


class ExpressionKappa(Kappa):
    """Curvature given as an expression in ``s`` (alias of ``x1``)."""

    tag = "expression"

    def __init__(self, source: str, constants: dict | None = None):
        self.source = source
        self.expr = parse(source, constants=constants, dim=1, aliases={"s": 0})

    def __call__(self, s):
        return eval_any(self.expr, [s])

    def describe(self) -> str:
        return self.source

    def __repr__(self):
        return f"ExpressionKappa({self.source!r})"


@dataclass
class CurveSpec:
    space_form: int
    kappa: Kappa
    s_range: tuple = (0.0, 1.0)
    p: int = 1

    def __post_init__(self):
        if self.space_form not in (0, 1, -1):
            raise ValueError("space_form must be 0, 1 or -1")
        if self.p < 1:
            raise ValueError("curve codimension p must be >= 1")
        lo, hi = self.s_range
        if not lo < hi:
            raise ValueError("empty arc-length range")
        self.s_range = (float(lo), float(hi))
        self.kappa.validate(self.s_range)

    @property
    def ode_branch(self) -> int:
        return -self.space_form

    @property
    def ambient_dim(self) -> int:
        """Dimension of the coordinate space holding the reported curve."""
        return self.p + 1 if self.space_form in (0, -1) else self.p + 2


def ode_residual_for(kappa: Kappa, ode_branch: int, s: float) -> float:
    """Curvature ODE residual of the semi-parallel families (indexed by ``ode_branch``)."""
    k, ks, kss = kappa.derivatives(float(s), 2)
    weight = 3.0 if ode_branch == 1 else 1.0
    return float(kss / k**3 - weight * ks**2 / k**4)


def ode_residual(cs: CurveSpec, s: float) -> float:
    return ode_residual_for(cs.kappa, cs.ode_branch, s)


def closed_form_kappa(c: int, params: dict, s_range=(0.0, 1.0), p: int = 1) -> CurveSpec:
    """Closed-form solution of the curvature ODE for the family ``c``.

    ``c`` in {0, -1} takes ``b1, b2`` (``b1 exp(b2 s)``); ``c = 1`` takes
    ``b3, b4`` (``1/sqrt(b3 s + b4)``).
    """
    if c in (0, -1):
        kappa = ExponentialKappa(b=float(params["b1"]), a=float(params["b2"]))
    elif c == 1:
        kappa = InverseSqrtKappa(c=float(params["b3"]), b=float(params["b4"]))
    else:
        raise ValueError("c must be 0, 1 or -1")
    return CurveSpec(space_form=-c, kappa=kappa, s_range=s_range, p=p)


# -- integration ---------------------------------------------------------------

def _lorentz(u, v):
    return -u[0] * v[0] + u[1:] @ v[1:]


def _generator(eps: float, k: float) -> np.ndarray:
    # rows: (gamma, T, N)' = M (gamma, T, N)
    return np.array([[0.0, 1.0, 0.0], [-eps, 0.0, k], [0.0, -k, 0.0]])


class Curve:
    """Integrated curve; call it with a float arc length or a jet of one."""

    def __init__(self, cs: CurveSpec, step: float):
        self.spec = cs
        self.step = step
        self.eps = float(cs.space_form)
        lo, hi = cs.s_range
        d = cs.p + 1 if cs.space_form == 0 else cs.p + 2
        self.model_dim = d
        frame = np.zeros((3, d))
        if cs.space_form == 0:
            frame[1, 0] = frame[2, 1] = 1.0
        else:
            frame[0, 0] = frame[1, 1] = frame[2, 2] = 1.0
        count = int(math.ceil((hi - lo) / step))
        self.nodes = lo + step * np.arange(count + 1)
        self.frames = np.empty((count + 1, 3, d))
        self.frames[0] = frame
        self.max_drift = 0.0
        for i in range(count):
            frame = self._rk4(self.nodes[i], frame, step)
            self.frames[i + 1] = frame

    # Frenet system with quadric re-projection after every step
    def _rk4(self, s, frame, h):
        kap = self.spec.kappa

        def rhs(t, y):
            return _generator(self.eps, float(kap(t))) @ y

        k1 = rhs(s, frame)
        k2 = rhs(s + h / 2, frame + h / 2 * k1)
        k3 = rhs(s + h / 2, frame + h / 2 * k2)
        k4 = rhs(s + h, frame + h * k3)
        return self._project(frame + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4))

    def _project(self, frame):
        g, t, nvec = frame
        if self.eps == 0:
            t = t / np.linalg.norm(t)
            nvec = nvec - (nvec @ t) * t
            nvec = nvec / np.linalg.norm(nvec)
            out = np.array([g, t, nvec])
        elif self.eps > 0:
            g = g / np.linalg.norm(g)
            t = t - (t @ g) * g
            t = t / np.linalg.norm(t)
            nvec = nvec - (nvec @ g) * g - (nvec @ t) * t
            nvec = nvec / np.linalg.norm(nvec)
            out = np.array([g, t, nvec])
        else:
            g = g / math.sqrt(-_lorentz(g, g))
            if g[0] < 0:
                g = -g
            t = t + _lorentz(t, g) * g
            t = t / math.sqrt(_lorentz(t, t))
            nvec = nvec + _lorentz(nvec, g) * g - _lorentz(nvec, t) * t
            nvec = nvec / math.sqrt(_lorentz(nvec, nvec))
            out = np.array([g, t, nvec])
        drift = self.constraint_drift(out)
        self.max_drift = max(getattr(self, "max_drift", 0.0), drift)
        if drift > DRIFT_TOL:
            raise ConstraintDriftError(f"frame constraint drift {drift:.3e} after re-projection")
        return out

    def constraint_drift(self, frame) -> float:
        if self.eps < 0:
            gram = np.array([[_lorentz(u, v) for v in frame] for u in frame])
            target = np.diag([-1.0, 1.0, 1.0])
        else:
            gram = frame @ frame.T
            target = np.eye(3)
            if self.eps == 0:
                gram, target = gram[1:, 1:], target[1:, 1:]
        return float(np.max(np.abs(gram - target)))

    def frame_at(self, s0: float) -> np.ndarray:
        """(gamma, T, N) in the integration model at arc length ``s0``."""
        lo, hi = self.spec.s_range
        if not lo - 1e-12 <= s0 <= hi + 1e-12:
            raise KappaDomainError(f"s={s0} outside the curve range [{lo}, {hi}]")
        i = int(np.clip(round((s0 - lo) / self.step), 0, len(self.nodes) - 1))
        delta = s0 - self.nodes[i]
        if delta == 0.0:
            return self.frames[i]
        return self._rk4(self.nodes[i], self.frames[i], delta)

    def derivative_vectors(self, s0: float, count: int) -> np.ndarray:
        """``d^k gamma / ds^k`` at ``s0`` for k = 0..count, from the Frenet cascade."""
        frame = self.frame_at(s0)
        kap = self.spec.kappa(variables([s0], count)[0])
        one = kap * 0.0 + 1.0
        a, b, c = one, one * 0.0, one * 0.0
        out = []
        for k in range(count + 1):
            out.append(a.value * frame[0] + b.value * frame[1] + c.value * frame[2])
            if k == count:
                break
            a, b, c = (a.deriv(0) - b.truncate(a.order - 1) * self.eps,
                       a.truncate(a.order - 1) + b.deriv(0) - kap.truncate(a.order - 1) * c.truncate(a.order - 1),
                       c.deriv(0) + kap.truncate(a.order - 1) * b.truncate(a.order - 1))
        return np.array(out, dtype=float)

    def model_point(self, s):
        """Curve in the integration model (hyperboloid for space_form -1)."""
        if isinstance(s, Jet):
            s0 = float(s.value)
            ders = self.derivative_vectors(s0, s.order)
            ds = s - s0
            comps = []
            powers = [ipow(ds, k) for k in range(s.order + 1)]
            for i in range(self.model_dim):
                total = ders[0][i]
                for k in range(1, s.order + 1):
                    total = powers[k] * (ders[k][i] / math.factorial(k)) + total
                comps.append(total)
            return comps
        return list(self.frame_at(float(s))[0])

    def __call__(self, s):
        y = self.model_point(s)
        if self.spec.space_form == -1:
            return hyperboloid_to_halfspace(y)
        return y


def hyperboloid_to_halfspace(y):
    """Isometry from the hyperboloid (time coordinate first) to the upper half-space."""
    y = list(y)
    den = y[0] - y[-1]
    return [yi / den for yi in y[1:-1]] + [1.0 / den]


def integrate_curve(cs: CurveSpec, step: float = 1e-3) -> Curve:
    if not step > 0:
        raise InvalidStepError(f"integration step must be positive, got {step}")
    return Curve(cs, step)


def recovered_curvature(curve: Curve, s0: float) -> float:
    """Frenet curvature of the reported curve, re-derived from its jets."""
    j = curve(variables([s0], 2)[0])
    pos = np.array([float(c.value) for c in j])
    vel = np.array([c.partial([1]) for c in j])
    acc = np.array([c.partial([2]) for c in j])
    if curve.spec.space_form == 0:
        return float(np.linalg.norm(acc))
    if curve.spec.space_form == 1:
        return float(np.linalg.norm(acc + (vel @ vel) * pos))
    # upper half-space metric |dz|^2 / z_last^2, conformal factor exp(2 phi), phi = -log z
    z = pos[-1]
    grad_phi = np.zeros_like(pos)
    grad_phi[-1] = -1.0 / z
    cov = acc + 2 * (vel @ grad_phi) * vel - (vel @ vel) * grad_phi
    return float(np.linalg.norm(cov) / z)
