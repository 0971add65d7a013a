"""Averaged Riemannian metric of a Finsler metric and derived objects.

The averaged metric at p integrates the fundamental tensor over the unit
level set of F (the indicatrix) against the volume form the ambient
Riemann-Finsler metric induces on it.  Parametrizing the indicatrix radially
over the Euclidean unit sphere, y(u) = u / F(u), the induced form pulls back
to

    sqrt(det g(y(u))) * F(u)^(-n) * dsigma(u),

with dsigma the Euclidean surface measure and the positive orientation fixed
so the Euclidean circle has measure +2*pi.  No normalization is applied: the
Euclidean averaged metric in dimension 2 is 2*pi times the identity.

Quadrature rules: equispaced trapezoid on the circle (spectrally accurate
for smooth integrands), Gauss-Legendre (polar) x trapezoid (azimuth) on the
2-sphere.  Higher dimensions have no default rule here; callers may inject a
custom SphereQuadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonConvex, NotSPD, StencilOutOfDomain
from .metrics import MetricFamily, TangentVector, jets_at, tangent

DEFAULT_FD_STEP = 1e-5

# keep point-times-node batches below roughly this many rows
_CHUNK_ROWS = 200_000


def sphere_surface(dim: int) -> float:
    """Surface measure of the Euclidean unit sphere S^(dim-1)."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


@dataclass(frozen=True, eq=False)
class SphereQuadrature:
    """Nodes on the Euclidean unit sphere with positive weights.

    Weights sum to the sphere surface measure (2*pi for n=2, 4*pi for n=3).
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 2 or weights.ndim != 1 or nodes.shape[0] != weights.shape[0]:
            raise DimensionMismatch("quadrature nodes and weights do not line up")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]


def circle_quadrature(count: int = 256) -> SphereQuadrature:
    """Equispaced trapezoid rule on the unit circle; exact for trigonometric
    polynomials of degree below ``count``."""
    if count < 4:
        raise DimensionMismatch("circle quadrature needs at least 4 nodes")
    theta = 2.0 * math.pi * np.arange(count) / count
    nodes = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    weights = np.full(count, 2.0 * math.pi / count)
    return SphereQuadrature(nodes=nodes, weights=weights)


def sphere2_quadrature(polar: int = 32, azimuth: int = 64) -> SphereQuadrature:
    """Product rule on S^2: Gauss-Legendre in cos(polar) x trapezoid in azimuth."""
    if polar < 2 or azimuth < 4:
        raise DimensionMismatch("sphere quadrature needs at least 2 x 4 nodes")
    z, wz = np.polynomial.legendre.leggauss(polar)
    phi = 2.0 * math.pi * np.arange(azimuth) / azimuth
    rho = np.sqrt(1.0 - z**2)
    nodes = np.empty((polar * azimuth, 3))
    weights = np.empty(polar * azimuth)
    for i in range(polar):
        s = slice(i * azimuth, (i + 1) * azimuth)
        nodes[s, 0] = rho[i] * np.cos(phi)
        nodes[s, 1] = rho[i] * np.sin(phi)
        nodes[s, 2] = z[i]
        weights[s] = wz[i] * 2.0 * math.pi / azimuth
    return SphereQuadrature(nodes=nodes, weights=weights)


def unit_sphere_quadrature(dim: int, nodes=None) -> SphereQuadrature:
    """Default rule for the supported dimensions (2 and 3).

    ``nodes`` is an int for dim 2; an int or (polar, azimuth) pair for dim 3.
    """
    if dim == 2:
        return circle_quadrature(256 if nodes is None else int(nodes))
    if dim == 3:
        if nodes is None:
            return sphere2_quadrature()
        if isinstance(nodes, (tuple, list)):
            polar, azimuth = nodes
            return sphere2_quadrature(int(polar), int(azimuth))
        return sphere2_quadrature(int(nodes), 2 * int(nodes))
    raise DimensionMismatch(f"no default sphere quadrature for dimension {dim}")


# ---------------------------------------------------------------------------
# indicatrix integrals and the averaged metric


def _pullback_weights(family: MetricFamily, X: np.ndarray, quad: SphereQuadrature):
    """Effective weights w * sqrt(det g) / F^n for paired (point, node) rows.

    Returns (weights, jets) with rows grouped point-major.
    """
    m = X.shape[0]
    k = quad.nodes.shape[0]
    n = family.dim
    Xr = np.repeat(X, k, axis=0)
    Yr = np.tile(quad.nodes, (m, 1))
    jets = family.jet_batch(Xr, Yr)
    detg = np.linalg.det(jets.g)
    if np.any(detg <= 0.0) or not np.all(np.isfinite(detg)):
        raise NonConvex("fundamental tensor degenerates on the indicatrix")
    w = np.tile(quad.weights, m) * np.sqrt(detg) / jets.F**n
    return w, jets


def indicatrix_integral(family: MetricFamily, p, integrand, quad: SphereQuadrature) -> float:
    """Integrate ``integrand`` (TangentVector -> float) over the indicatrix
    at p against the induced volume form."""
    x = np.asarray(p, dtype=float)
    if quad.dim != family.dim:
        raise DimensionMismatch("quadrature dimension does not match the family")
    w, jets = _pullback_weights(family, x[None, :], quad)
    total = 0.0
    for j in range(quad.nodes.shape[0]):
        y = quad.nodes[j] / jets.F[j]  # radial projection onto the indicatrix
        total += w[j] * float(integrand(tangent(x, y)))
    return total


def averaged_metric_batch(family: MetricFamily, P: np.ndarray, quad: SphereQuadrature) -> np.ndarray:
    """Averaged metric at each row of P, shape (m, n, n)."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if quad.dim != family.dim:
        raise DimensionMismatch("quadrature dimension does not match the family")
    m = P.shape[0]
    k = quad.nodes.shape[0]
    n = family.dim
    out = np.empty((m, n, n))
    per_chunk = max(1, _CHUNK_ROWS // k)
    for s in range(0, m, per_chunk):
        sub = P[s : s + per_chunk]
        w, jets = _pullback_weights(family, sub, quad)
        g = jets.g.reshape(len(sub), k, n, n)
        wk = w.reshape(len(sub), k)
        block = np.einsum("pk,pkij->pij", wk, g)
        out[s : s + per_chunk] = 0.5 * (block + np.swapaxes(block, 1, 2))
    return out


def averaged_metric(family: MetricFamily, p, quad: SphereQuadrature) -> np.ndarray:
    """Averaged metric (n, n) at a single point; componentwise equal to
    indicatrix integrals of the fundamental tensor (g is 0-homogeneous, so
    evaluating it on the unit sphere already samples the indicatrix)."""
    return averaged_metric_batch(family, np.asarray(p, dtype=float)[None, :], quad)[0]


def averaged_norm(avg: "AveragedMetricData", v: TangentVector) -> float:
    """Norm sqrt(gamma(v, v)) of a tangent vector in the averaged metric."""
    y = v.comps
    q = float(y @ avg.gamma @ y)
    if q < 0.0:
        raise NotSPD("averaged metric gives a negative square norm")
    return math.sqrt(q)


# ---------------------------------------------------------------------------
# orthonormal frame


def orthonormal_frame(gamma: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """Symmetric inverse square root B of gamma, so B^T gamma B = I.

    Columns of B form a gamma-orthonormal basis; B is the unique symmetric
    positive definite choice, hence deterministic.
    """
    gamma = 0.5 * (gamma + gamma.T)
    w, V = np.linalg.eigh(gamma)
    if w[0] <= floor * max(abs(w[-1]), 1e-300) or not np.all(np.isfinite(w)):
        raise NotSPD("averaged metric is not positive definite")
    return (V / np.sqrt(w)) @ V.T


# ---------------------------------------------------------------------------
# Levi-Civita coefficients of the averaged metric


def _dgamma_closed(family: MetricFamily, P: np.ndarray, quad: SphereQuadrature) -> np.ndarray:
    """x-derivatives of gamma from the exact derivative of the quadrature:
    d/dx^l of sum w sqrt(det g) g_ij F^(-n) needs dg/dx (family-provided)
    and dF/dx (part of the jet).  Shape (m, n, n, n), indexed [m, l, i, j]."""
    P = np.atleast_2d(P)
    m = P.shape[0]
    k = quad.nodes.shape[0]
    n = family.dim
    out = np.empty((m, n, n, n))
    per_chunk = max(1, _CHUNK_ROWS // k)
    for s in range(0, m, per_chunk):
        sub = P[s : s + per_chunk]
        Xr = np.repeat(sub, k, axis=0)
        Yr = np.tile(quad.nodes, (len(sub), 1))
        jets = family.jet_batch(Xr, Yr)
        dg = family.dg_dx_batch(Xr, Yr)
        if dg is None:
            raise NonConvex("family does not expose coefficient derivatives")
        detg = np.linalg.det(jets.g)
        if np.any(detg <= 0.0):
            raise NonConvex("fundamental tensor degenerates on the indicatrix")
        sqdet = np.sqrt(detg)
        ginv = np.linalg.inv(jets.g)
        wq = np.tile(quad.weights, len(sub)) * sqdet / jets.F**n
        # logarithmic x-derivative of the scalar density sqrt(det g) F^(-n)
        trace = np.einsum("rji,rlij->rl", ginv, dg)
        logd = 0.5 * trace - n * jets.dFdx / jets.F[:, None]
        integrand = dg + jets.g[:, None, :, :] * logd[:, :, None, None]
        block = np.einsum("r,rlij->rlij", wq, integrand)
        block = block.reshape(len(sub), k, n, n, n).sum(axis=1)
        out[s : s + per_chunk] = 0.5 * (block + np.swapaxes(block, 2, 3))
    return out


def _dgamma_fd(family: MetricFamily, P: np.ndarray, quad: SphereQuadrature, step: float) -> np.ndarray:
    """Central differences of the averaged metric, step h = step * (1 + |x_l|)."""
    P = np.atleast_2d(P)
    m, n = P.shape
    stencil = np.empty((m, n, 2, n))
    for l in range(n):
        h = step * (1.0 + np.abs(P[:, l]))
        Pp = P.copy()
        Pp[:, l] += h
        Pm = P.copy()
        Pm[:, l] -= h
        stencil[:, l, 0] = Pp
        stencil[:, l, 1] = Pm
    flat = stencil.reshape(m * n * 2, n)
    if not np.all(family.in_domain(flat)):
        raise StencilOutOfDomain("finite-difference stencil leaves the chart domain")
    gammas = averaged_metric_batch(family, flat, quad)
    if not np.all(np.isfinite(gammas)):
        raise StencilOutOfDomain("averaged metric is not finite on the stencil")
    gammas = gammas.reshape(m, n, 2, n, n)
    out = np.empty((m, n, n, n))
    for l in range(n):
        h = step * (1.0 + np.abs(P[:, l]))
        out[:, l] = (gammas[:, l, 0] - gammas[:, l, 1]) / (2.0 * h)[:, None, None]
    return out


def _christoffel_from_dgamma(gamma_inv: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    """Levi-Civita coefficients [k, i, j] from gamma-derivatives [l, i, j].

    Gamma^k_ij = 1/2 gamma^{kl} (d_i gamma_jl + d_j gamma_il - d_l gamma_ij);
    with dgamma[a, b, c] = d_a gamma_bc the three terms are reindexings.
    """
    inner = dgamma + dgamma.transpose(1, 0, 2) - np.moveaxis(dgamma, 0, 2)
    return 0.5 * np.einsum("kl,ijl->kij", gamma_inv, inner)


def christoffel_star(
    family: MetricFamily,
    p,
    quad: SphereQuadrature,
    step: float = DEFAULT_FD_STEP,
    method: str = "auto",
) -> np.ndarray:
    """Levi-Civita coefficients of the averaged metric at p, indexed
    [k, i, j] with the differentiation index second (symmetric in i, j).

    ``method``: "closed" uses the family's coefficient derivatives inside
    the quadrature, "fd" central differences of the averaged metric,
    "auto" picks closed when available.
    """
    return averaged_data(family, p, quad, step=step, method=method).christoffel


# ---------------------------------------------------------------------------
# bundled per-point data


@dataclass(eq=False)
class AveragedMetricData:
    """Averaged metric at a point with everything the torsion solver needs:
    inverse, gamma-orthonormal frame (columns of ``frame``), and the
    Levi-Civita coefficients ``christoffel`` indexed [k, i, j]."""

    point: np.ndarray
    gamma: np.ndarray
    gamma_inv: np.ndarray
    frame: np.ndarray
    frame_inv: np.ndarray
    christoffel: np.ndarray


def _resolve_method(family: MetricFamily, method: str) -> str:
    if method == "auto":
        return "closed" if family.has_coefficient_derivatives else "fd"
    if method not in ("closed", "fd"):
        raise ValueError(f"unknown christoffel method {method!r}")
    return method


def averaged_data_batch(
    family: MetricFamily,
    P: np.ndarray,
    quad: SphereQuadrature,
    step: float = DEFAULT_FD_STEP,
    method: str = "auto",
    scale: float = 1.0,
) -> list[AveragedMetricData]:
    """AveragedMetricData for each row of P (batched quadratures).

    ``scale`` multiplies the averaged metric (and its derivatives) before
    anything is derived from it; the connection is invariant under it, which
    the scale-invariance checks exercise.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    use = _resolve_method(family, method)
    gammas = scale * averaged_metric_batch(family, P, quad)
    if use == "closed":
        dgammas = scale * _dgamma_closed(family, P, quad)
    else:
        dgammas = scale * _dgamma_fd(family, P, quad, step)
    out = []
    for r in range(P.shape[0]):
        gamma = gammas[r]
        w, V = np.linalg.eigh(gamma)
        if w[0] <= 1e-12 * max(abs(w[-1]), 1e-300) or not np.all(np.isfinite(w)):
            raise NotSPD("averaged metric is not positive definite")
        gamma_inv = (V / w) @ V.T
        frame = (V / np.sqrt(w)) @ V.T
        frame_inv = (V * np.sqrt(w)) @ V.T
        christoffel = _christoffel_from_dgamma(gamma_inv, dgammas[r])
        out.append(
            AveragedMetricData(
                point=P[r].copy(),
                gamma=gamma,
                gamma_inv=gamma_inv,
                frame=frame,
                frame_inv=frame_inv,
                christoffel=christoffel,
            )
        )
    return out


def averaged_data(
    family: MetricFamily,
    p,
    quad: SphereQuadrature,
    step: float = DEFAULT_FD_STEP,
    method: str = "auto",
    scale: float = 1.0,
) -> AveragedMetricData:
    return averaged_data_batch(family, np.asarray(p, dtype=float)[None, :], quad, step, method, scale)[0]


# ---------------------------------------------------------------------------
# horizontal derivative


def horizontal_rhs_batch(jets, Y: np.ndarray, christoffel: np.ndarray) -> np.ndarray:
    """Horizontal derivative of F for direction rows Y at the point the
    christoffel data belongs to: dF/dx^i - y^j Gamma^k_ij dF/dy^k."""
    return jets.dFdx - np.einsum("mj,kij,mk->mi", Y, christoffel, jets.dFdy)


def horizontal_derivative(family: MetricFamily, avg: AveragedMetricData, v: TangentVector) -> np.ndarray:
    """Derivative of F along the horizontal lifts of the chart directions
    (with respect to the averaged metric's Levi-Civita connection).

    Vanishes at v exactly when parallel transport in that connection
    preserves F to first order along every direction through the base
    point; 1-homogeneous in v.
    """
    jets = jets_at(family, avg.point, v.comps[None, :])
    return horizontal_rhs_batch(jets, v.comps[None, :], avg.christoffel)[0]
