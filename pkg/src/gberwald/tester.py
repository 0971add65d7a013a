"""Pointwise and global generalized Berwald classification.

A Finsler metric is generalized Berwald when some linear connection's
parallel transports preserve it.  The test is pointwise: at each base point
the extremal compatible torsion is solved twice on structurally disjoint
direction pools, and the point passes when both runs converge to the same
torsion with residuals inside tolerance.  Failures are only accepted after
confirmation: the pooled constraints are refit by least squares, the pools
are refined, and the irreducible residual has to persist.

A necessary condition gets checked alongside: wherever the indicatrix
touches the averaged unit sphere (vertical contact), the horizontal
derivative of F must vanish.  A confirmed violation there settles the point
negatively without any solve.

Per-point verdicts aggregate over a grid: one confirmed failure makes the
metric not generalized Berwald, unresolved points make the result
inconclusive, and positive verdicts combine to the strongest class the
whole grid supports (riemannian, classical_berwald, generalized_berwald).
Positive results also get a connection built from the solved torsion, which
parallel transport along chart curves validates dynamically.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .averaging import (
    DEFAULT_FD_STEP,
    AveragedMetricData,
    SphereQuadrature,
    averaged_data_batch,
    unit_sphere_quadrature,
)
from .errors import CurveLeavesChart, ZeroVector
from .grid import BoxGrid
from .metrics import MetricFamily
from .tensors import (
    FRAME_ORTHONORMAL,
    TorsionTensor,
    comps_to_full,
    torsion_dim,
    torsion_to_chart,
)
from .torsion import (
    ROUTE_CHAIN,
    ROUTE_HORIZONTAL,
    ROUTE_VERTICAL,
    ConstraintPool,
    Tolerances,
    constraint_pool,
    extremal_torsion,
    make_pools,
    stacked_least_squares,
)

VERDICT_RIEMANNIAN = "riemannian"
VERDICT_CLASSICAL = "classical_berwald"
VERDICT_GB = "generalized_berwald"
VERDICT_NOT_GB = "not_generalized_berwald"
VERDICT_INCONCLUSIVE = "inconclusive"

# positive classes ordered weakest condition last
_POSITIVE = (VERDICT_RIEMANNIAN, VERDICT_CLASSICAL, VERDICT_GB)


@dataclass(frozen=True)
class PoolSizes:
    """Direction pool sizes per run; refinement doubles the first two."""

    n_equispaced: int = 720
    n_random: int = 64
    n_validation: int = 64

    def refined(self) -> "PoolSizes":
        return PoolSizes(2 * self.n_equispaced, 2 * self.n_random, self.n_validation)


def classify_tangent_space(
    family: MetricFamily,
    avg: AveragedMetricData,
    directions: np.ndarray,
    tols: Tolerances | None = None,
) -> str:
    """Route of one tangent space given sampled chart directions: vertical
    contact everywhere, horizontal contact everywhere, or a genuine solve."""
    tols = tols or Tolerances()
    pool = constraint_pool(family, avg, directions)
    if bool(np.all(pool.margins < tols.contact)):
        return ROUTE_VERTICAL
    if bool(np.all(pool.relative_rhs < tols.contact)):
        return ROUTE_HORIZONTAL
    return ROUTE_CHAIN


@dataclass(eq=False)
class PointVerdict:
    """Everything decided and measured at one grid point."""

    point: np.ndarray
    verdict: str
    route: str
    torsion_chart: TorsionTensor
    torsion_frame: TorsionTensor
    residual_max: float
    agreement: float
    contact_violation: float
    chain_length: int
    status: str
    orthogonality_defect: float
    ratio_spread: float | None = None
    stacked_initial: float | None = None
    stacked_refined: float | None = None
    reason: str = ""
    runs: tuple = field(default=(), repr=False)


@dataclass(eq=False)
class ClassificationReport:
    family_kind: str
    dim: int
    seed: int
    scale: float
    tolerances: Tolerances
    sizes: PoolSizes
    points: np.ndarray
    grid_shape: tuple | None
    verdicts: list
    global_verdict: str
    continuity: float | None
    verdict_counts: dict
    route_counts: dict


def _torsion_agreement(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


def _combined_selection(family, avg, seed, point_index, sizes: PoolSizes) -> ConstraintPool:
    dirs = np.vstack(
        [
            make_pools(
                avg.point.size, seed, point_index, run_index,
                n_equispaced=sizes.n_equispaced,
                n_random=sizes.n_random,
                n_validation=sizes.n_validation,
            ).selection
            for run_index in (0, 1)
        ]
    )
    return constraint_pool(family, avg, dirs @ avg.frame)


def _confirm_failure(family, avg, seed, point_index, sizes, tols):
    """Stacked least-squares residual before and after pool refinement."""
    pool0 = _combined_selection(family, avg, seed, point_index, sizes)
    _, worst0 = stacked_least_squares(pool0, tols.rcond)
    pool1 = _combined_selection(family, avg, seed, point_index, sizes.refined())
    _, worst1 = stacked_least_squares(pool1, tols.rcond)
    return worst0, worst1


def _point_verdict(
    family: MetricFamily,
    avg: AveragedMetricData,
    point_index: int,
    seed: int,
    sizes: PoolSizes,
    tols: Tolerances,
) -> PointVerdict:
    dim = avg.point.size
    runs = []
    for run_index in (0, 1):
        pools = make_pools(
            dim, seed, point_index, run_index,
            n_equispaced=sizes.n_equispaced,
            n_random=sizes.n_random,
            n_validation=sizes.n_validation,
        )
        runs.append(extremal_torsion(family, avg, pools, tols))
    (t_a, d_a), (t_b, d_b) = runs

    violation = max(d_a.contact_violation, d_b.contact_violation)
    agreement = _torsion_agreement(d_a.torsion_chart.comps, d_b.torsion_chart.comps)
    residual_max = max(
        d_a.residual_selection, d_a.residual_validation,
        d_b.residual_selection, d_b.residual_validation,
    )
    spreads = [s for s in (d_a.ratio_spread, d_b.ratio_spread) if s is not None]
    spread = max(spreads) if spreads else None

    verdict = None
    reason = ""
    stacked_initial = stacked_refined = None

    if violation > tols.trigger:
        # vertical contact directions with a nonvanishing horizontal
        # derivative: compatibility fails there for every torsion
        verdict = VERDICT_NOT_GB
        reason = "horizontal derivative does not vanish at vertical contact directions"
        stacked_initial, stacked_refined = _confirm_failure(
            family, avg, seed, point_index, sizes, tols
        )
    elif d_a.route != d_b.route:
        reason = f"runs disagree on the route ({d_a.route} vs {d_b.route})"
    elif d_a.route == ROUTE_VERTICAL:
        if spread is not None and spread < tols.contact:
            verdict = VERDICT_RIEMANNIAN
        else:
            reason = f"contact everywhere but the F/F* ratio varies (spread {spread:.3e})"
    elif d_a.route == ROUTE_HORIZONTAL:
        verdict = VERDICT_CLASSICAL
    else:
        if d_a.converged and d_b.converged and agreement < tols.agree:
            if min(t_a.norm, t_b.norm) < tols.zero_torsion:
                verdict = VERDICT_CLASSICAL
            else:
                verdict = VERDICT_GB
        elif not (d_a.converged and d_b.converged):
            reason = f"chain did not converge ({d_a.status}/{d_b.status})"
        else:
            reason = f"independent runs disagree (relative gap {agreement:.3e})"

    if verdict is None:
        stacked_initial, stacked_refined = _confirm_failure(
            family, avg, seed, point_index, sizes, tols
        )
        if min(stacked_initial, stacked_refined) > tols.trigger:
            verdict = VERDICT_NOT_GB
            reason += ("; " if reason else "") + (
                "pooled constraints are inconsistent and stay so under refinement"
            )
        else:
            verdict = VERDICT_INCONCLUSIVE

    return PointVerdict(
        point=avg.point,
        verdict=verdict,
        route=d_a.route,
        torsion_chart=d_a.torsion_chart,
        torsion_frame=t_a,
        residual_max=residual_max,
        agreement=agreement,
        contact_violation=violation,
        chain_length=d_a.chain_length,
        status=d_a.status,
        orthogonality_defect=max(d_a.orthogonality_defect, d_b.orthogonality_defect),
        ratio_spread=spread,
        stacked_initial=stacked_initial,
        stacked_refined=stacked_refined,
        reason=reason,
        runs=((t_a, d_a), (t_b, d_b)),
    )


def aggregate_verdicts(verdicts) -> str:
    tags = [v.verdict for v in verdicts]
    if not tags:
        return VERDICT_INCONCLUSIVE
    if VERDICT_NOT_GB in tags:
        return VERDICT_NOT_GB
    if VERDICT_INCONCLUSIVE in tags:
        return VERDICT_INCONCLUSIVE
    if all(t == VERDICT_RIEMANNIAN for t in tags):
        return VERDICT_RIEMANNIAN
    if all(t in (VERDICT_RIEMANNIAN, VERDICT_CLASSICAL) for t in tags):
        return VERDICT_CLASSICAL
    return VERDICT_GB


def continuity_probe(verdicts, grid: BoxGrid) -> float | None:
    """Largest torsion difference per unit distance over grid neighbors.

    A magnitude that keeps growing as the grid refines flags a torsion
    field that fails to extend continuously, undermining a global verdict
    built from pointwise ones.
    """
    pairs = grid.neighbor_pairs()
    if not pairs:
        return None
    points = grid.points()
    worst = 0.0
    for i, j in pairs:
        dt = verdicts[i].torsion_chart.comps - verdicts[j].torsion_chart.comps
        dist = float(np.linalg.norm(points[i] - points[j]))
        worst = max(worst, float(np.linalg.norm(dt)) / dist)
    return worst


def decide(
    family: MetricFamily,
    grid,
    *,
    quad: SphereQuadrature | None = None,
    tols: Tolerances | None = None,
    seed: int = 0,
    sizes: PoolSizes | None = None,
    method: str = "auto",
    scale: float = 1.0,
    step: float = DEFAULT_FD_STEP,
    n_jobs: int = 1,
) -> ClassificationReport:
    """Classify a metric over a grid of base points.

    ``grid`` is a BoxGrid or an (m, n) array of chart points.  Each point
    runs the two-pool extremal solve; see the module docstring for how the
    verdicts combine.  ``scale`` rescales the averaged metric before
    anything is derived from it (the classification must not react).
    Workers in ``n_jobs`` threads split the grid points; results are
    deterministic either way because every random draw is keyed by (seed,
    point index, run index).
    """
    tols = tols or Tolerances()
    sizes = sizes or PoolSizes()
    if isinstance(grid, BoxGrid):
        points = grid.points()
        grid_shape = grid.shape
    else:
        points = np.atleast_2d(np.asarray(grid, dtype=float))
        grid_shape = None
    quad = quad or unit_sphere_quadrature(family.dim)
    family.validate_on(points)
    avgs = averaged_data_batch(family, points, quad, step=step, method=method, scale=scale)

    def work(k: int) -> PointVerdict:
        return _point_verdict(family, avgs[k], k, seed, sizes, tols)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            verdicts = list(pool.map(work, range(len(avgs))))
    else:
        verdicts = [work(k) for k in range(len(avgs))]

    continuity = continuity_probe(verdicts, grid) if isinstance(grid, BoxGrid) else None
    verdict_counts: dict = {}
    route_counts: dict = {}
    for v in verdicts:
        verdict_counts[v.verdict] = verdict_counts.get(v.verdict, 0) + 1
        route_counts[v.route] = route_counts.get(v.route, 0) + 1
    return ClassificationReport(
        family_kind=family.kind,
        dim=family.dim,
        seed=seed,
        scale=scale,
        tolerances=tols,
        sizes=sizes,
        points=points,
        grid_shape=grid_shape,
        verdicts=verdicts,
        global_verdict=aggregate_verdicts(verdicts),
        continuity=continuity,
        verdict_counts=verdict_counts,
        route_counts=route_counts,
    )


# ---------------------------------------------------------------------------
# connection reconstruction and dynamic validation

def reconstruct_connection(avg: AveragedMetricData, torsion) -> np.ndarray:
    """Coefficients [k, i, j] of the unique connection that is metrical for
    the averaged metric and has the given torsion.

    The Christoffel process: starting from the Levi-Civita coefficients of
    gamma, the torsion enters through its contorsion,

        Gamma^r_ij = Gamma*^r_ij
                     - (T^l_js gamma^{sr} gamma_il
                        + T^l_is gamma^{sr} gamma_jl - T^r_ij) / 2.

    Antisymmetrizing the result in (i, j) returns exactly the requested
    torsion, and the connection is gamma-metrical by construction.
    ``torsion`` may be a TorsionTensor in either basis or raw chart
    components.
    """
    if isinstance(torsion, TorsionTensor):
        if torsion.frame == FRAME_ORTHONORMAL:
            torsion = torsion_to_chart(torsion, avg.frame)
        comps = torsion.comps
    else:
        comps = np.asarray(torsion, dtype=float)
    n = avg.gamma.shape[0]
    full = comps_to_full(comps, n)
    term = np.einsum("il,ljs,sr->rij", avg.gamma, full, avg.gamma_inv)
    return avg.christoffel - 0.5 * (term + term.transpose(0, 2, 1) - full)


@dataclass(eq=False)
class TransportResult:
    """Parallel transport along a polyline and the metric drift it caused."""

    drift: float
    F_start: float
    F_values: np.ndarray
    vector_end: np.ndarray
    positions: np.ndarray

    @property
    def F_end(self) -> float:
        return float(self.F_values[-1])


def validate_connection(
    family: MetricFamily,
    torsion_field,
    waypoints: np.ndarray,
    v0: np.ndarray,
    *,
    quad: SphereQuadrature | None = None,
    steps_per_unit: int = 1000,
    method: str = "auto",
    scale: float = 1.0,
    step: float = DEFAULT_FD_STEP,
) -> TransportResult:
    """Parallel-transport v0 along a polyline and track the metric value.

    ``torsion_field`` maps chart points (m, n) to chart torsion components
    (m, N); None transports with the Levi-Civita connection of the averaged
    metric.  Each segment integrates the linear transport ODE with
    fixed-step classical Runge-Kutta, stepping ceil(length * steps_per_unit)
    times; connection data is evaluated at the Runge-Kutta stage positions
    in one batched sweep per segment.  The drift max |F(X(t)) - F(v0)| is
    the dynamic compatibility statistic: a connection compatible with F
    keeps it near zero, and for a metric that is not generalized Berwald no
    torsion field can.
    """
    waypoints = np.atleast_2d(np.asarray(waypoints, dtype=float))
    if waypoints.shape[0] < 2:
        raise ValueError("transport needs at least two waypoints")
    v = np.asarray(v0, dtype=float).copy()
    if not np.any(v):
        raise ZeroVector("transport needs a nonzero start vector")
    quad = quad or unit_sphere_quadrature(family.dim)
    n = family.dim

    F0 = float(family.F_batch(waypoints[:1], v[None])[0])
    F_values = [F0]
    positions = [waypoints[0].copy()]

    for a, b in zip(waypoints[:-1], waypoints[1:]):
        seg = b - a
        length = float(np.linalg.norm(seg))
        if length == 0.0:
            continue
        m_steps = max(1, math.ceil(length * steps_per_unit))
        ts = np.linspace(0.0, 1.0, 2 * m_steps + 1)
        P = a[None, :] + ts[:, None] * seg[None, :]
        if not bool(np.all(family.in_domain(P))):
            raise CurveLeavesChart(
                f"segment from {a} to {b} leaves the declared chart domain"
            )
        avgs = averaged_data_batch(family, P, quad, step=step, method=method, scale=scale)
        T_rows = None if torsion_field is None else np.asarray(torsion_field(P), dtype=float)
        A = np.empty((len(P), n, n))
        for r, avg in enumerate(avgs):
            gamma_conn = avg.christoffel if T_rows is None else reconstruct_connection(avg, T_rows[r])
            A[r] = -np.einsum("i,kij->kj", seg, gamma_conn)
        h = 1.0 / m_steps
        ends = np.empty((m_steps, n))
        for m in range(m_steps):
            a1, a2, a4 = A[2 * m], A[2 * m + 1], A[2 * m + 2]
            k1 = h * (a1 @ v)
            k2 = h * (a2 @ (v + 0.5 * k1))
            k3 = h * (a2 @ (v + 0.5 * k2))
            k4 = h * (a4 @ (v + k3))
            v = v + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            ends[m] = v
        end_positions = P[2::2]
        F_values.extend(family.F_batch(end_positions, ends).tolist())
        positions.extend(end_positions)

    F_arr = np.asarray(F_values)
    return TransportResult(
        drift=float(np.max(np.abs(F_arr - F0))),
        F_start=F0,
        F_values=F_arr,
        vector_end=v,
        positions=np.asarray(positions),
    )


def pointwise_torsion_field(
    family: MetricFamily,
    *,
    quad: SphereQuadrature | None = None,
    tols: Tolerances | None = None,
    seed: int = 0,
    sizes: PoolSizes | None = None,
    method: str = "auto",
    scale: float = 1.0,
    step: float = DEFAULT_FD_STEP,
):
    """Torsion field backed by fresh extremal solves at the queried points.

    Returns a callable (m, n) -> (m, N) of chart components, suitable for
    :func:`validate_connection`.  Every query point gets its own run-0
    solve, so this is exact but costly; sized-down pools keep transport
    validation tractable.
    """
    tols = tols or Tolerances()
    sizes = sizes or PoolSizes(n_equispaced=72, n_random=16, n_validation=36)
    quad = quad or unit_sphere_quadrature(family.dim)

    def field(P: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        avgs = averaged_data_batch(family, P, quad, step=step, method=method, scale=scale)
        out = np.empty((P.shape[0], torsion_dim(family.dim)))
        for r, avg in enumerate(avgs):
            pools = make_pools(
                family.dim, seed, r, 0,
                n_equispaced=sizes.n_equispaced,
                n_random=sizes.n_random,
                n_validation=sizes.n_validation,
            )
            _, diag = extremal_torsion(family, avg, pools, tols)
            out[r] = diag.torsion_chart.comps
        return out

    return field
