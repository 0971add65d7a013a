"""Finsler metric families and first-order jet evaluation.

A family evaluates, at a chart point x and tangent components y, the jet

    F(x, y),  dF/dy,  dF/dx,  g(x, y) = d^2(F^2/2) / dy dy

on paired row batches (X[k], Y[k]).  F is positively 1-homogeneous in y and
the fundamental tensor g must stay positive definite away from y = 0.

Coefficient entries (matrix fields a(x), frame fields E(x), 1-form fields
b(x)) can be constants, parsed expressions over x1..xn, or plain callables.
Expression- and constant-backed fields are symbolically differentiable,
which unlocks closed-form x-derivatives downstream; callable-backed fields
fall back to central differences of F.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, NonConvex, WrongFamily, ZeroVector
from .expressions import (
    BinOp,
    Call,
    Neg,
    Num,
    Var,
    differentiate,
    evaluate,
    parse_expression,
    to_source,
    variables,
)
from .tensors import TorsionTensor, FRAME_CHART, full_to_comps

# relative eigenvalue floor below which g counts as degenerate
CONVEXITY_FLOOR = 1e-10

# relative step for fallback central differences of F in x
_X_STEP = 1e-6


# ---------------------------------------------------------------------------
# points, vectors, jets


@dataclass(frozen=True, eq=False)
class ChartPoint:
    """A point of the chart, coordinates as a 1-d float array (n >= 2)."""

    coords: np.ndarray

    def __post_init__(self):
        coords = np.atleast_1d(np.asarray(self.coords, dtype=float))
        if coords.ndim != 1 or coords.size < 2:
            raise DimensionMismatch("chart points need at least 2 coordinates")
        if not np.all(np.isfinite(coords)):
            raise ValueError("chart point has non-finite coordinates")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return self.coords.size


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Tangent vector: base point plus components in chart coordinates."""

    base: ChartPoint
    comps: np.ndarray

    def __post_init__(self):
        base = self.base if isinstance(self.base, ChartPoint) else ChartPoint(self.base)
        comps = np.atleast_1d(np.asarray(self.comps, dtype=float))
        if comps.shape != base.coords.shape:
            raise DimensionMismatch("vector components do not match the base point dimension")
        if not np.all(np.isfinite(comps)):
            raise ValueError("tangent vector has non-finite components")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "comps", comps)

    @property
    def dim(self) -> int:
        return self.comps.size


def tangent(x, y) -> TangentVector:
    """Convenience constructor from raw arrays."""
    return TangentVector(ChartPoint(np.asarray(x, dtype=float)), np.asarray(y, dtype=float))


@dataclass(frozen=True, eq=False)
class MetricJet:
    """First-order data of F at a single tangent vector."""

    F: float
    dFdy: np.ndarray
    dFdx: np.ndarray
    g: np.ndarray


@dataclass(frozen=True, eq=False)
class JetBatch:
    """Jets over paired rows: F (m,), dFdy (m,n), dFdx (m,n), g (m,n,n)."""

    F: np.ndarray
    dFdy: np.ndarray
    dFdx: np.ndarray
    g: np.ndarray

    def __getitem__(self, k: int) -> MetricJet:
        return MetricJet(float(self.F[k]), self.dFdy[k], self.dFdx[k], self.g[k])


# ---------------------------------------------------------------------------
# coefficient fields


class ScalarField:
    """Scalar coefficient c(x), evaluated on (m, n) batches of points."""

    def __call__(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, axis: int) -> "ScalarField | None":
        """d/dx^(axis+1) as a field, or None when not available."""
        return None

    def source(self) -> str | None:
        """Parseable text form, or None when not serializable."""
        return None


class ConstantField(ScalarField):
    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, X):
        return np.full(X.shape[0], self.value)

    def derivative(self, axis):
        return ConstantField(0.0)

    def source(self):
        text = repr(self.value)
        return text[:-2] if text.endswith(".0") else text


class ExpressionField(ScalarField):
    def __init__(self, node: Expr, dim: int):
        bad = {v for v in variables(node) if not _is_chart_var(v, dim)}
        if bad:
            raise DimensionMismatch(
                f"expression uses {sorted(bad)}, expected variables x1..x{dim}"
            )
        self.node = node
        self.dim = dim

    def __call__(self, X):
        env = {f"x{i + 1}": X[:, i] for i in range(self.dim)}
        out = evaluate(self.node, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (X.shape[0],)).copy()

    def derivative(self, axis):
        return ExpressionField(differentiate(self.node, f"x{axis + 1}"), self.dim)

    def source(self):
        return to_source(self.node)


class CallableField(ScalarField):
    """Wraps fn(X) -> (m,); no symbolic derivative, no serialization."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray]):
        self.fn = fn

    def __call__(self, X):
        out = np.asarray(self.fn(X), dtype=float)
        return np.broadcast_to(out, (X.shape[0],)).copy()


def _is_chart_var(name: str, dim: int) -> bool:
    if not name.startswith("x"):
        return False
    try:
        k = int(name[1:])
    except ValueError:
        return False
    return 1 <= k <= dim


def as_scalar_field(entry, dim: int) -> ScalarField:
    if isinstance(entry, ScalarField):
        return entry
    if isinstance(entry, (int, float, np.integer, np.floating)):
        return ConstantField(float(entry))
    if isinstance(entry, str):
        return ExpressionField(parse_expression(entry), dim)
    if isinstance(entry, (Num, Var, Call, Neg, BinOp)):
        return ExpressionField(entry, dim)
    if callable(entry):
        return CallableField(entry)
    raise DimensionMismatch(f"cannot interpret coefficient entry {entry!r}")


class ArrayField:
    """Vector- or matrix-valued coefficient field over the chart."""

    def __init__(self, entries, dim: int):
        grid = np.asarray(entries, dtype=object)
        if grid.ndim not in (1, 2):
            raise DimensionMismatch("coefficient fields must be vectors or matrices")
        self.shape = grid.shape
        self.dim = dim
        self.fields = np.empty(grid.shape, dtype=object)
        for idx in np.ndindex(grid.shape):
            self.fields[idx] = as_scalar_field(grid[idx], dim)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        out = np.empty((X.shape[0], *self.shape))
        for idx in np.ndindex(self.shape):
            out[(slice(None), *idx)] = self.fields[idx](X)
        return out

    @property
    def differentiable(self) -> bool:
        return all(
            self.fields[idx].derivative(0) is not None for idx in np.ndindex(self.shape)
        )

    def derivative(self, axis: int) -> "ArrayField":
        entries = np.empty(self.shape, dtype=object)
        for idx in np.ndindex(self.shape):
            d = self.fields[idx].derivative(axis)
            if d is None:
                raise DimensionMismatch("coefficient field is not differentiable")
            entries[idx] = d
        return ArrayField(entries, self.dim)

    def sources(self):
        out = np.empty(self.shape, dtype=object)
        for idx in np.ndindex(self.shape):
            s = self.fields[idx].source()
            if s is None:
                return None
            out[idx] = s
        return out.tolist()


# ---------------------------------------------------------------------------
# families


class MetricFamily:
    """Base class; concrete families implement F_batch and jet_batch."""

    kind = "abstract"

    def __init__(self, dim: int, domain=None):
        if dim < 2:
            raise DimensionMismatch("metric families need dimension >= 2")
        self.dim = int(dim)
        self.domain = None if domain is None else np.asarray(domain, dtype=float).reshape(dim, 2)

    # -- required ---------------------------------------------------------
    def F_batch(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jet_batch(self, X: np.ndarray, Y: np.ndarray) -> JetBatch:
        raise NotImplementedError

    # -- optional ---------------------------------------------------------
    def dg_dx_batch(self, X: np.ndarray, Y: np.ndarray):
        """x-derivatives of g as (m, n, n, n) indexed [row, l, i, j], or None."""
        return None

    @property
    def has_coefficient_derivatives(self) -> bool:
        return False

    def validate_on(self, points: np.ndarray) -> None:
        """Check family-specific regularity on sample points; raise on failure."""

    # -- helpers ----------------------------------------------------------
    def _check_rows(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if X.ndim != 2 or Y.ndim != 2 or X.shape != Y.shape or X.shape[1] != self.dim:
            raise DimensionMismatch(
                f"expected paired rows of shape (m, {self.dim}), got {X.shape} and {Y.shape}"
            )
        if np.any(np.all(Y == 0.0, axis=1)):
            raise ZeroVector("jet requested at a zero tangent vector")
        return X, Y

    def _dFdx_fd(self, X, Y):
        out = np.empty_like(X)
        for l in range(self.dim):
            h = _X_STEP * (1.0 + np.abs(X[:, l]))
            Xp = X.copy()
            Xp[:, l] += h
            Xm = X.copy()
            Xm[:, l] -= h
            out[:, l] = (self.F_batch(Xp, Y) - self.F_batch(Xm, Y)) / (2.0 * h)
        return out

    def in_domain(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.domain is None:
            return np.ones(X.shape[0], dtype=bool)
        lo, hi = self.domain[:, 0], self.domain[:, 1]
        return np.all((X >= lo) & (X <= hi), axis=1)


class RiemannianFamily(MetricFamily):
    """F = sqrt(y^T a(x) y) for a symmetric positive definite a."""

    kind = "riemannian"

    def __init__(self, a, dim: int | None = None, domain=None):
        a_grid = np.asarray(a, dtype=object)
        if a_grid.ndim != 2 or a_grid.shape[0] != a_grid.shape[1]:
            raise DimensionMismatch("riemannian coefficient a must be a square matrix")
        dim = a_grid.shape[0] if dim is None else dim
        if a_grid.shape[0] != dim:
            raise DimensionMismatch("matrix a does not match the declared dimension")
        super().__init__(dim, domain)
        self.a = ArrayField(a_grid, dim)

    def _eval_a(self, X):
        A = self.a(X)
        return 0.5 * (A + np.swapaxes(A, 1, 2))

    def F_batch(self, X, Y):
        X, Y = self._check_rows(X, Y)
        A = self._eval_a(X)
        q = np.einsum("mij,mi,mj->m", A, Y, Y)
        if np.any(q <= 0.0) or not np.all(np.isfinite(q)):
            raise NonConvex("quadratic form is not positive at a nonzero vector")
        return np.sqrt(q)

    def jet_batch(self, X, Y):
        X, Y = self._check_rows(X, Y)
        A = self._eval_a(X)
        ay = np.einsum("mij,mj->mi", A, Y)
        q = np.einsum("mi,mi->m", Y, ay)
        if np.any(q <= 0.0) or not np.all(np.isfinite(q)):
            raise NonConvex("quadratic form is not positive at a nonzero vector")
        F = np.sqrt(q)
        dFdy = ay / F[:, None]
        if self.a.differentiable:
            dFdx = np.empty_like(X)
            for l in range(self.dim):
                dA = self.a.derivative(l)(X)
                dA = 0.5 * (dA + np.swapaxes(dA, 1, 2))
                dFdx[:, l] = np.einsum("mij,mi,mj->m", dA, Y, Y) / (2.0 * F)
        else:
            dFdx = self._dFdx_fd(X, Y)
        return JetBatch(F=F, dFdy=dFdy, dFdx=dFdx, g=A)

    def dg_dx_batch(self, X, Y):
        if not self.a.differentiable:
            return None
        X = np.asarray(X, dtype=float)
        out = np.empty((X.shape[0], self.dim, self.dim, self.dim))
        for l in range(self.dim):
            dA = self.a.derivative(l)(X)
            out[:, l] = 0.5 * (dA + np.swapaxes(dA, 1, 2))
        return out

    @property
    def has_coefficient_derivatives(self):
        return self.a.differentiable

    def validate_on(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        A = self._eval_a(points)
        eig = np.linalg.eigvalsh(A)
        if np.any(eig[:, 0] <= CONVEXITY_FLOOR * np.abs(eig[:, -1])):
            raise NonConvex("matrix a is not positive definite on the sample points")


def _unit_randers_tensor(xi, b):
    """Fundamental tensor of |xi| + <b, xi> w.r.t. xi (identity base form)."""
    r = np.linalg.norm(xi, axis=1)
    if np.any(r == 0.0):
        raise ZeroVector("jet requested at a zero tangent vector")
    dF0 = xi / r[:, None] + b
    F0 = r + xi @ b
    n = xi.shape[1]
    eye = np.eye(n)
    g0 = (F0 / r)[:, None, None] * (
        eye[None, :, :] - xi[:, None, :] * xi[:, :, None] / (r**2)[:, None, None]
    ) + dF0[:, None, :] * dF0[:, :, None]
    return F0, dF0, g0


class RandersFamily(MetricFamily):
    """F = sqrt(y^T a(x) y) + b(x) . y with the 1-form small in the a-norm."""

    kind = "randers"

    def __init__(self, a, b, dim: int | None = None, domain=None):
        a_grid = np.asarray(a, dtype=object)
        b_grid = np.asarray(b, dtype=object)
        if a_grid.ndim != 2 or a_grid.shape[0] != a_grid.shape[1]:
            raise DimensionMismatch("randers coefficient a must be a square matrix")
        if b_grid.ndim != 1 or b_grid.shape[0] != a_grid.shape[0]:
            raise DimensionMismatch("randers coefficient b must be a vector matching a")
        dim = a_grid.shape[0] if dim is None else dim
        if a_grid.shape[0] != dim:
            raise DimensionMismatch("coefficients do not match the declared dimension")
        super().__init__(dim, domain)
        self.a = ArrayField(a_grid, dim)
        self.b = ArrayField(b_grid, dim)

    def _eval_ab(self, X):
        A = self.a(X)
        return 0.5 * (A + np.swapaxes(A, 1, 2)), self.b(X)

    def F_batch(self, X, Y):
        X, Y = self._check_rows(X, Y)
        A, b = self._eval_ab(X)
        q = np.einsum("mij,mi,mj->m", A, Y, Y)
        if np.any(q <= 0.0) or not np.all(np.isfinite(q)):
            raise NonConvex("base quadratic form is not positive at a nonzero vector")
        F = np.sqrt(q) + np.einsum("mi,mi->m", b, Y)
        if np.any(F <= 0.0):
            raise NonConvex("randers norm is not positive; the 1-form is too large")
        return F

    def jet_batch(self, X, Y):
        X, Y = self._check_rows(X, Y)
        A, b = self._eval_ab(X)
        ay = np.einsum("mij,mj->mi", A, Y)
        q = np.einsum("mi,mi->m", Y, ay)
        if np.any(q <= 0.0) or not np.all(np.isfinite(q)):
            raise NonConvex("base quadratic form is not positive at a nonzero vector")
        alpha = np.sqrt(q)
        F = alpha + np.einsum("mi,mi->m", b, Y)
        if np.any(F <= 0.0):
            raise NonConvex("randers norm is not positive; the 1-form is too large")
        dFdy = ay / alpha[:, None] + b
        # g = (F/alpha) (a - ay x ay / alpha^2) + dFdy x dFdy
        g = (F / alpha)[:, None, None] * (
            A - ay[:, None, :] * ay[:, :, None] / (alpha**2)[:, None, None]
        ) + dFdy[:, None, :] * dFdy[:, :, None]
        if self.a.differentiable and self.b.differentiable:
            dFdx = np.empty_like(X)
            for l in range(self.dim):
                dA = self.a.derivative(l)(X)
                dA = 0.5 * (dA + np.swapaxes(dA, 1, 2))
                db = self.b.derivative(l)(X)
                dFdx[:, l] = np.einsum("mij,mi,mj->m", dA, Y, Y) / (2.0 * alpha) + np.einsum(
                    "mi,mi->m", db, Y
                )
        else:
            dFdx = self._dFdx_fd(X, Y)
        return JetBatch(F=F, dFdy=dFdy, dFdx=dFdx, g=g)

    def validate_on(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        A, b = self._eval_ab(points)
        eig = np.linalg.eigvalsh(A)
        if np.any(eig[:, 0] <= CONVEXITY_FLOOR * np.abs(eig[:, -1])):
            raise NonConvex("matrix a is not positive definite on the sample points")
        # strong convexity of a Randers norm: |b|_{a^{-1}} < 1
        bb = np.einsum("mi,mij,mj->m", b, np.linalg.inv(A), b)
        if np.any(bb >= 1.0):
            raise NonConvex("1-form b reaches a-norm >= 1 on the sample points")


class FrameMinkowskiFamily(MetricFamily):
    """F(x, y) = F0(E(x)^{-1} y): a fixed Minkowski norm carried along a
    smooth frame field.  F0 is Randers-type: |xi| + <mink_b, xi>.

    Parallel translation of the frame preserves frame coordinates, so this
    family admits a compatible linear connection by construction; its chart
    connection and torsion are available in closed form.
    """

    kind = "frame_minkowski"

    def __init__(self, frame, mink_b, dim: int | None = None, domain=None):
        frame_grid = np.asarray(frame, dtype=object)
        if frame_grid.ndim != 2 or frame_grid.shape[0] != frame_grid.shape[1]:
            raise DimensionMismatch("frame must be a square matrix of fields")
        dim = frame_grid.shape[0] if dim is None else dim
        if frame_grid.shape[0] != dim:
            raise DimensionMismatch("frame does not match the declared dimension")
        super().__init__(dim, domain)
        self.frame = ArrayField(frame_grid, dim)
        self.mink_b = np.asarray(mink_b, dtype=float).reshape(dim)
        if np.linalg.norm(self.mink_b) >= 1.0:
            raise NonConvex("minkowski 1-form must have norm < 1")

    def _frames(self, X):
        E = self.frame(X)
        det = np.linalg.det(E)
        if np.any(np.abs(det) < 1e-12) or not np.all(np.isfinite(det)):
            raise NonConvex("frame matrix is singular at a sample point")
        return E, np.linalg.inv(E)

    def F_batch(self, X, Y):
        X, Y = self._check_rows(X, Y)
        _, P = self._frames(X)
        xi = np.einsum("mak,mk->ma", P, Y)
        r = np.linalg.norm(xi, axis=1)
        return r + xi @ self.mink_b

    def jet_batch(self, X, Y):
        X, Y = self._check_rows(X, Y)
        _, P = self._frames(X)
        xi = np.einsum("mak,mk->ma", P, Y)
        F0, dF0, g0 = _unit_randers_tensor(xi, self.mink_b)
        dFdy = np.einsum("mak,ma->mk", P, dF0)
        g = np.einsum("mai,mbj,mab->mij", P, P, g0)
        if self.frame.differentiable:
            dFdx = np.empty_like(X)
            for l in range(self.dim):
                dE = self.frame.derivative(l)(X)
                # d xi / dx^l = -P (dE/dx^l) xi
                dxi = -np.einsum("mab,mbc,mc->ma", P, dE, xi)
                dFdx[:, l] = np.einsum("ma,ma->m", dF0, dxi)
        else:
            dFdx = self._dFdx_fd(X, Y)
        return JetBatch(F=F0, dFdy=dFdy, dFdx=dFdx, g=g)

    def validate_on(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        self._frames(points)

    def _frame_derivatives(self, X):
        """dE/dx^l as (m, n, n, n) indexed [row, l, :, :]."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty((X.shape[0], self.dim, self.dim, self.dim))
        if self.frame.differentiable:
            for l in range(self.dim):
                out[:, l] = self.frame.derivative(l)(X)
            return out
        for l in range(self.dim):
            h = _X_STEP * (1.0 + np.abs(X[:, l]))
            Xp = X.copy()
            Xp[:, l] += h
            Xm = X.copy()
            Xm[:, l] -= h
            out[:, l] = (self.frame(Xp) - self.frame(Xm)) / (2.0 * h)[:, None, None]
        return out

    def ground_truth_connection(self, p) -> np.ndarray:
        """Coefficients (indexed [k, i, j], differentiation index first) of
        the connection that parallelizes the frame: solving
        d(E_a)/dx^i + Gamma(., i, E_a) = 0 for each frame vector E_a gives
        Gamma[k, i, j] = -(dE/dx^i)[k, a] (E^{-1})[a, j]."""
        coords = p.coords if isinstance(p, ChartPoint) else p
        X = np.atleast_2d(np.asarray(coords, dtype=float))
        _, P = self._frames(X)
        dE = self._frame_derivatives(X)
        return -np.einsum("mika,maj->mkij", dE, P)[0]


class NumericFamily(MetricFamily):
    """Wraps a raw callable F(x, y) -> float; jets by central differences.

    ``grad_step`` drives first derivatives, ``hess_step`` the second
    y-derivatives of F^2/2 (a larger step keeps cancellation noise down).
    Both are relative to 1 + |coordinate|.
    """

    kind = "numeric"

    def __init__(self, fn, dim: int, grad_step: float = 1e-6, hess_step: float = 1e-4, domain=None):
        super().__init__(dim, domain)
        self.fn = fn
        self.grad_step = float(grad_step)
        self.hess_step = float(hess_step)

    def _value(self, x, y) -> float:
        return float(self.fn(x, y))

    def F_batch(self, X, Y):
        X, Y = self._check_rows(X, Y)
        return np.array([self._value(X[k], Y[k]) for k in range(X.shape[0])])

    def _energy(self, x, y) -> float:
        v = self._value(x, y)
        return 0.5 * v * v

    def _jet_single(self, x, y):
        n = self.dim
        F = self._value(x, y)
        hy = self.grad_step * (1.0 + np.abs(y))
        hx = self.grad_step * (1.0 + np.abs(x))
        dFdy = np.empty(n)
        dFdx = np.empty(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = hy[i]
            dFdy[i] = (self._value(x, y + e) - self._value(x, y - e)) / (2.0 * hy[i])
            e[i] = hx[i]
            dFdx[i] = (self._value(x + e, y) - self._value(x - e, y)) / (2.0 * hx[i])
        hh = self.hess_step * (1.0 + np.abs(y))
        g = np.empty((n, n))
        e0 = self._energy(x, y)
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = hh[i]
            g[i, i] = (self._energy(x, y + ei) - 2.0 * e0 + self._energy(x, y - ei)) / hh[i] ** 2
            for j in range(i + 1, n):
                ej = np.zeros(n)
                ej[j] = hh[j]
                val = (
                    self._energy(x, y + ei + ej)
                    - self._energy(x, y + ei - ej)
                    - self._energy(x, y - ei + ej)
                    + self._energy(x, y - ei - ej)
                ) / (4.0 * hh[i] * hh[j])
                g[i, j] = val
                g[j, i] = val
        return F, dFdy, dFdx, g

    def jet_batch(self, X, Y):
        X, Y = self._check_rows(X, Y)
        m, n = X.shape
        F = np.empty(m)
        dFdy = np.empty((m, n))
        dFdx = np.empty((m, n))
        g = np.empty((m, n, n))
        for k in range(m):
            F[k], dFdy[k], dFdx[k], g[k] = self._jet_single(X[k], Y[k])
        return JetBatch(F=F, dFdy=dFdy, dFdx=dFdx, g=g)


# ---------------------------------------------------------------------------
# single-vector operations


def jets_at(family: MetricFamily, x: np.ndarray, Y: np.ndarray) -> JetBatch:
    """Jets of many directions at one base point."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    X = np.broadcast_to(np.asarray(x, dtype=float), Y.shape).copy()
    return family.jet_batch(X, Y)


def eval_jet(family: MetricFamily, v: TangentVector, convexity_floor: float = CONVEXITY_FLOOR) -> MetricJet:
    """Evaluate the metric jet at a single tangent vector.

    Raises ZeroVector for |v| = 0 and NonConvex when the fundamental tensor
    fails the relative eigenvalue floor.
    """
    if np.all(v.comps == 0.0):
        raise ZeroVector("jet requested at a zero tangent vector")
    batch = jets_at(family, v.base.coords, v.comps[None, :])
    jet = batch[0]
    gs = 0.5 * (jet.g + jet.g.T)
    eig = np.linalg.eigvalsh(gs)
    if eig[0] <= convexity_floor * max(abs(eig[-1]), 1e-300) or not np.all(np.isfinite(eig)):
        raise NonConvex("fundamental tensor is not positive definite at v")
    return jet


def check_homogeneity(family: MetricFamily, v: TangentVector) -> float:
    """Relative Euler defect |y . dF/dy - F| / F; ~0 for 1-homogeneous F."""
    jet = eval_jet(family, v)
    return abs(float(v.comps @ jet.dFdy) - jet.F) / jet.F


def frame_ground_truth_torsion(family: FrameMinkowskiFamily, p) -> TorsionTensor:
    """Chart torsion of the frame-parallelizing connection.

    Equals minus the chart components of the frame Lie brackets on frame
    arguments; used as ground truth for frame-induced families.
    """
    if not isinstance(family, FrameMinkowskiFamily):
        kind = getattr(family, "kind", type(family).__name__)
        raise WrongFamily(f"ground-truth torsion needs a frame_minkowski family, got {kind}")
    gamma = family.ground_truth_connection(p)
    full = gamma - np.swapaxes(gamma, 1, 2)  # T[k, i, j] = G[k, i, j] - G[k, j, i]
    return TorsionTensor(dim=family.dim, comps=full_to_comps(full), frame=FRAME_CHART)
