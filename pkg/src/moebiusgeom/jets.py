"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` is an array of truncated Taylor polynomials in ``nvars``
variables, expanded around a fixed base point.  Coefficients are stored in
the last axis, indexed by monomials in graded order, so truncating to a lower
total order is a prefix slice.  The coefficient of ``t**alpha`` equals
``d^alpha f / alpha!``; products are polynomial products truncated at the
common order, and elementary functions are applied by univariate Taylor
composition, so every derivative up to the truncation order is exact up to
rounding.

Charts are written once against the polymorphic helpers (:func:`exp`,
:func:`sin`, ...) and then evaluated either on plain floats or on jets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import (
    GeometryError,
    InvalidStepError,
    NonFiniteError,
    PointOutsideDomainError,
)

MAX_ORDER = 5


class JetDomainError(GeometryError):
    """An elementary function was applied outside its domain."""


class _Tables:
    """Monomial bookkeeping for one number of variables, up to MAX_ORDER."""

    def __init__(self, nvars: int):
        self.nvars = nvars
        mons = []
        for d in range(MAX_ORDER + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), d):
                e = [0] * nvars
                for i in combo:
                    e[i] += 1
                mons.append(tuple(e))
        self.monomials = mons
        self.index = {m: i for i, m in enumerate(mons)}
        degs = np.array([sum(m) for m in mons])
        self.degree = degs
        self.size = [int(np.sum(degs <= k)) for k in range(MAX_ORDER + 1)]

        self.mul = []
        for k in range(MAX_ORDER + 1):
            size = self.size[k]
            triples = []
            for i in range(size):
                mi = mons[i]
                for j in range(size):
                    mj = mons[j]
                    if degs[i] + degs[j] > k:
                        continue
                    out = self.index[tuple(a + b for a, b in zip(mi, mj))]
                    triples.append((out, i, j))
            triples.sort()
            outs = np.array([t[0] for t in triples])
            left = np.array([t[1] for t in triples])
            right = np.array([t[2] for t in triples])
            starts = np.flatnonzero(np.r_[True, outs[1:] != outs[:-1]])
            self.mul.append((left, right, starts))

        # deriv[k][v]: map an order-k jet to the order-(k-1) jet of d/dx_v
        self.deriv = [None]
        for k in range(1, MAX_ORDER + 1):
            per_var = []
            for v in range(nvars):
                src, fac = [], []
                for m in mons[: self.size[k - 1]]:
                    up = list(m)
                    up[v] += 1
                    src.append(self.index[tuple(up)])
                    fac.append(m[v] + 1.0)
                per_var.append((np.array(src), np.array(fac)))
            self.deriv.append(per_var)


@lru_cache(maxsize=None)
def tables(nvars: int) -> _Tables:
    return _Tables(nvars)


def _as_array(v) -> np.ndarray:
    return np.asarray(v, dtype=float)


class Jet:
    """Array of truncated Taylor polynomials.

    ``c`` has shape ``shape + (n_monomials,)``.  Leading axes broadcast like
    numpy arrays in elementwise arithmetic.
    """

    __slots__ = ("c", "order", "nvars")
    __array_ufunc__ = None  # make ndarray (op) Jet defer to the Jet methods

    def __init__(self, c: np.ndarray, order: int, nvars: int):
        self.c = c
        self.order = order
        self.nvars = nvars

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, value, order: int, nvars: int) -> "Jet":
        v = _as_array(value)
        c = np.zeros(v.shape + (tables(nvars).size[order],))
        c[..., 0] = v
        return cls(c, order, nvars)

    @property
    def tables(self) -> _Tables:
        return tables(self.nvars)

    @property
    def shape(self) -> tuple:
        return self.c.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.c.ndim - 1

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def __repr__(self):
        return f"Jet(shape={self.shape}, order={self.order}, nvars={self.nvars})"

    def __len__(self):
        return self.shape[0]

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        return Jet(self.c[..., : self.tables.size[order]], order, self.nvars)

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx):
            idx = idx + (slice(None),)
        return Jet(self.c[idx], self.order, self.nvars)

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis,)
        axis = tuple(a % self.ndim for a in axis)
        return Jet(self.c.sum(axis=axis), self.order, self.nvars)

    def transpose(self, *axes) -> "Jet":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return Jet(self.c.transpose(tuple(axes) + (self.ndim,)), self.order, self.nvars)

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Jet(self.c.reshape(tuple(shape) + (self.c.shape[-1],)), self.order, self.nvars)

    # -- calculus ---------------------------------------------------------
    def deriv(self, var: int) -> "Jet":
        """Partial derivative in variable ``var``; lowers the order by one."""
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = self.tables.deriv[self.order][var]
        return Jet(self.c[..., src] * fac, self.order - 1, self.nvars)

    def grad(self) -> "Jet":
        """Stack of all first partials along a new leading axis."""
        parts = [self.deriv(v).c for v in range(self.nvars)]
        return Jet(np.stack(parts), self.order - 1, self.nvars)

    def partial(self, exponents: Sequence[int]) -> np.ndarray:
        """Value of the mixed partial with the given exponent vector."""
        e = tuple(int(x) for x in exponents)
        fact = math.prod(math.factorial(x) for x in e)
        return self.c[..., self.tables.index[e]] * fact

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            k = min(self.order, other.order)
            size = self.tables.size[k]
            return self.c[..., :size], other.c[..., :size], k
        return None

    def __neg__(self):
        return Jet(-self.c, self.order, self.nvars)

    def __pos__(self):
        return self

    def __add__(self, other):
        pair = self._coerce(other)
        if pair is not None:
            a, b, k = pair
            return Jet(a + b, k, self.nvars)
        v = _as_array(other)
        c = self.c + np.zeros(v.shape + (1,))
        c[..., 0] = c[..., 0] + v
        return Jet(c, self.order, self.nvars)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        pair = self._coerce(other)
        if pair is None:
            v = _as_array(other)
            return Jet(self.c * v[..., None], self.order, self.nvars)
        a, b, k = pair
        left, right, starts = self.tables.mul[k]
        prod = a[..., left] * b[..., right]
        return Jet(np.add.reduceat(prod, starts, axis=-1), k, self.nvars)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            v = _as_array(other)
            return Jet(self.c / v[..., None], self.order, self.nvars)
        out = self * other.reciprocal()
        # keep the value bit-identical to plain float division
        out.c[..., 0] = self.value / other.value
        return out

    def __rtruediv__(self, other):
        v = _as_array(other)
        out = self.reciprocal() * v
        out.c[..., 0] = v / self.value
        return out

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            return exp(exponent * log(self))
        if float(exponent).is_integer():
            return ipow(self, int(exponent))
        return self.power(float(exponent))

    def __rpow__(self, base):
        return exp(self * np.log(_as_array(base)))

    # -- elementary functions --------------------------------------------
    def compose(self, derivs: Sequence[np.ndarray]) -> "Jet":
        """Apply a univariate function given its derivatives at the value.

        ``derivs[k]`` holds the k-th derivative of the function evaluated at
        ``self.value``; at least ``order + 1`` entries are required.
        """
        k = self.order
        d = Jet(self.c.copy(), k, self.nvars)
        d.c[..., 0] = 0.0
        out = np.zeros(self.c.shape)
        out[..., 0] = derivs[0]
        power = d
        for j in range(1, k + 1):
            out = out + power.c * (_as_array(derivs[j]) / math.factorial(j))[..., None]
            if j < k:
                power = power * d
        if not np.all(np.isfinite(out)):
            raise NonFiniteError("non-finite value in elementary function")
        return Jet(out, k, self.nvars)

    def exp(self):
        e = np.exp(self.value)
        return self.compose([e] * (self.order + 1))

    def log(self):
        a = self.value
        if np.any(a <= 0):
            raise JetDomainError("log of a nonpositive value")
        ders = [np.log(a)] + [
            (-1.0) ** (j - 1) * math.factorial(j - 1) / a**j for j in range(1, self.order + 1)
        ]
        return self.compose(ders)

    def sin(self):
        a = self.value
        cyc = [np.sin(a), np.cos(a), -np.sin(a), -np.cos(a)]
        return self.compose([cyc[j % 4] for j in range(self.order + 1)])

    def cos(self):
        a = self.value
        cyc = [np.cos(a), -np.sin(a), -np.cos(a), np.sin(a)]
        return self.compose([cyc[j % 4] for j in range(self.order + 1)])

    def power(self, r: float):
        """Real power; the base must be positive."""
        a = self.value
        if np.any(a <= 0):
            raise JetDomainError("real power of a nonpositive base")
        ders = [np.power(a, r)]
        coef = 1.0
        for j in range(1, self.order + 1):
            coef *= r - j + 1
            ders.append(coef * np.power(a, r - j))
        return self.compose(ders)

    def sqrt(self):
        a = self.value
        if np.any(a < 0) or (self.order > 0 and np.any(a == 0)):
            raise JetDomainError("sqrt of a negative value")
        out = self.power(0.5) if self.order > 0 else Jet(np.sqrt(self.c), 0, self.nvars)
        out.c[..., 0] = np.sqrt(a)
        return out

    def reciprocal(self):
        a = self.value
        if np.any(a == 0):
            raise JetDomainError("division by zero")
        ders = [1.0 / a]
        for j in range(1, self.order + 1):
            ders.append((-1.0) ** j * math.factorial(j) / a ** (j + 1))
        return self.compose(ders)


# -- polymorphic helpers (floats, arrays, or jets) ---------------------------

def exp(x):
    return x.exp() if isinstance(x, Jet) else np.exp(x)


def log(x):
    if isinstance(x, Jet):
        return x.log()
    if np.any(_as_array(x) <= 0):
        raise JetDomainError("log of a nonpositive value")
    return np.log(x)


def sin(x):
    return x.sin() if isinstance(x, Jet) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Jet) else np.cos(x)


def sqrt(x):
    if isinstance(x, Jet):
        return x.sqrt()
    if np.any(_as_array(x) < 0):
        raise JetDomainError("sqrt of a negative value")
    return np.sqrt(x)


def power(x, r: float):
    if isinstance(x, Jet):
        return x.power(r)
    if np.any(_as_array(x) <= 0):
        raise JetDomainError("real power of a nonpositive base")
    return np.power(x, r)


def ipow(x, k: int):
    """Integer power by repeated multiplication (same rounding on floats and jets)."""
    if k == 0:
        return x * 0.0 + 1.0
    out = x
    for _ in range(abs(k) - 1):
        out = out * x
    if k < 0:
        if not isinstance(out, Jet) and np.any(_as_array(out) == 0):
            raise JetDomainError("division by zero")
        out = 1.0 / out
    return out


def stack(items: Sequence, axis: int = 0):
    """Stack jets (and constants) along a new axis; plain inputs give an ndarray."""
    jets = [x for x in items if isinstance(x, Jet)]
    if not jets:
        return np.stack([_as_array(x) for x in items], axis=axis)
    order = min(j.order for j in jets)
    nvars = jets[0].nvars
    parts = []
    for x in items:
        j = x.truncate(order) if isinstance(x, Jet) else Jet.constant(x, order, nvars)
        parts.append(j)
    shape = np.broadcast_shapes(*[p.shape for p in parts])
    cs = [np.broadcast_to(p.c, shape + (p.c.shape[-1],)) for p in parts]
    ax = axis if axis >= 0 else axis + len(shape) + 1
    return Jet(np.stack(cs, axis=ax), order, nvars)


def jeinsum(subscripts: str, a, b):
    """Two-operand einsum where either operand may be a jet."""
    ins, out = subscripts.replace(" ", "").split("->")
    s1, s2 = ins.split(",")
    if isinstance(a, Jet) and isinstance(b, Jet):
        k = min(a.order, b.order)
        tab = a.tables
        size = tab.size[k]
        left, right, starts = tab.mul[k]
        prod = np.einsum(f"{s1}z,{s2}z->{out}z", a.c[..., :size][..., left],
                         b.c[..., :size][..., right])
        return Jet(np.add.reduceat(prod, starts, axis=-1), k, a.nvars)
    if isinstance(a, Jet):
        return Jet(np.einsum(f"{s1}z,{s2}->{out}z", a.c, _as_array(b)), a.order, a.nvars)
    if isinstance(b, Jet):
        return Jet(np.einsum(f"{s1},{s2}z->{out}z", _as_array(a), b.c), b.order, b.nvars)
    return np.einsum(subscripts, a, b)


def jinv(a: Jet) -> Jet:
    """Inverse of a jet-valued square matrix (shape (n, n))."""
    x0 = np.linalg.inv(a.value)
    d = a - a.value
    step = jeinsum("ij,jk->ik", -x0, d)
    term = Jet.constant(x0, a.order, a.nvars)
    out = term
    for _ in range(a.order):
        term = jeinsum("ij,jk->ik", step, term)
        out = out + term
    return out


def variables(x0: Sequence[float], order: int) -> Jet:
    """Coordinate jets ``x0_i + t_i``."""
    x0 = _as_array(x0)
    n = x0.shape[0]
    tab = tables(n)
    c = np.zeros((n, tab.size[order]))
    c[:, 0] = x0
    if order >= 1:
        for i in range(n):
            e = [0] * n
            e[i] = 1
            c[i, tab.index[tuple(e)]] = 1.0
    return Jet(c, order, n)


# -- immersions and their jets ----------------------------------------------

@dataclass
class ImmersionSpec:
    """A chart map ``R^n -> R^m`` on an open axis-aligned box.

    ``chart`` receives the coordinate vector (float array or jet of shape
    ``(n,)``) and returns a sequence of ``m`` components written with the
    polymorphic helpers of this module.
    """

    n: int
    m: int
    chart: Callable
    lo: np.ndarray
    hi: np.ndarray
    name: str = "chart"
    params: dict = field(default_factory=dict)
    pivot: tuple | None = None

    def __post_init__(self):
        self.lo = _as_array(self.lo).reshape(-1)
        self.hi = _as_array(self.hi).reshape(-1)
        if self.n < 1 or self.m < 1:
            raise ValueError("dimensions must be positive")
        if self.lo.shape != (self.n,) or self.hi.shape != (self.n,):
            raise ValueError("domain box must have one interval per chart coordinate")
        if np.any(self.lo >= self.hi):
            raise ValueError("empty domain box")

    @property
    def domain(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lo, self.hi

    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, margin: float = 0.0) -> bool:
        x = _as_array(x)
        return bool(np.all(x > self.lo + margin) and np.all(x < self.hi - margin))

    def check_point(self, x, margin: float = 0.0) -> np.ndarray:
        x = _as_array(x).reshape(-1)
        if x.shape != (self.n,):
            raise PointOutsideDomainError(
                f"{self.name}: point has {x.shape[0]} coordinates, expected {self.n}")
        if not self.contains(x, margin):
            raise PointOutsideDomainError(f"{self.name}: point {x.tolist()} outside domain")
        return x

    def evaluate(self, x) -> np.ndarray:
        """Plain float evaluation at a point."""
        x = self.check_point(x)
        try:
            val = np.array([float(v) for v in self.chart(x)])
        except JetDomainError as exc:
            raise NonFiniteError(f"{self.name} at {x.tolist()}: {exc}") from exc
        if val.shape != (self.m,):
            raise ValueError(f"{self.name}: chart returned {val.shape[0]} components, expected {self.m}")
        if not np.all(np.isfinite(val)):
            raise NonFiniteError(f"{self.name} at {x.tolist()}: non-finite chart value")
        return val

    def jet(self, x, order: int) -> Jet:
        """Jet of the chart at ``x``, truncated at ``order``."""
        x = self.check_point(x)
        try:
            out = stack(list(self.chart(variables(x, order))))
            if not isinstance(out, Jet):
                out = Jet.constant(out, order, self.n)
        except (JetDomainError, NonFiniteError) as exc:
            raise NonFiniteError(f"{self.name} at {x.tolist()}: {exc}") from exc
        if out.shape != (self.m,):
            raise ValueError(f"{self.name}: chart returned {out.shape}, expected ({self.m},)")
        if not np.all(np.isfinite(out.c)):
            raise NonFiniteError(f"{self.name} at {x.tolist()}: non-finite derivative")
        return out


@dataclass
class Jet4:
    """All partials of the chart components up to ``order`` at one point.

    Keys are non-decreasing tuples of coordinate indices, e.g. ``(0, 0, 1)``
    is d^3/dx0 dx0 dx1; the empty tuple is the chart value.
    """

    dim_domain: int
    dim_ambient: int
    order: int
    partials: dict

    def __getitem__(self, idx) -> np.ndarray:
        return self.partials[tuple(sorted(idx))]


def multi_indices(n: int, order: int):
    """Every canonical (sorted) multi-index of total order <= ``order``."""
    for d in range(order + 1):
        yield from itertools.combinations_with_replacement(range(n), d)


def jet_eval(spec: ImmersionSpec, x, order: int) -> Jet4:
    if order not in (1, 2, 3, 4):
        raise ValueError("order must be one of 1, 2, 3, 4")
    j = spec.jet(x, order)
    partials = {}
    for idx in multi_indices(spec.n, order):
        e = [0] * spec.n
        for i in idx:
            e[i] += 1
        partials[idx] = j.partial(e)
    return Jet4(spec.n, spec.m, order, partials)


def fd_crosscheck(spec: ImmersionSpec, x, h: float) -> float:
    """Max relative deviation between jet and central-difference partials of order 1 and 2."""
    if not h > 0:
        raise InvalidStepError(f"finite-difference step must be positive, got {h}")
    x = spec.check_point(x, margin=4 * h)
    ad = jet_eval(spec, x, 2)
    f = spec.evaluate
    n = spec.n
    eye = np.eye(n) * h
    worst = 0.0
    f0 = f(x)
    for i in range(n):
        fp, fm = f(x + eye[i]), f(x - eye[i])
        fd1 = (fp - fm) / (2 * h)
        fd2 = (fp - 2 * f0 + fm) / h**2
        worst = max(worst, _rel(ad[(i,)], fd1), _rel(ad[(i, i)], fd2))
        for j in range(i + 1, n):
            fd = (f(x + eye[i] + eye[j]) - f(x + eye[i] - eye[j])
                  - f(x - eye[i] + eye[j]) + f(x - eye[i] - eye[j])) / (4 * h**2)
            worst = max(worst, _rel(ad[(i, j)], fd))
    return worst


def _rel(exact: np.ndarray, approx: np.ndarray) -> float:
    return float(np.max(np.abs(exact - approx) / (1.0 + np.abs(exact))))
