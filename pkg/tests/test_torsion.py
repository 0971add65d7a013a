"""Compatibility constraints and the torsion-minimizing chain.

Oracles, in order of appearance: the dimension-2 closed form S = kappa I,
an index-by-index sigma evaluation, pseudoinverse solves for the single
direction and stacked systems, and synthetic constraint pools built around a
known torsion."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gberwald import (
    ChainState,
    ConstraintBlock,
    ConstraintPool,
    FrameMinkowskiFamily,
    TorsionTensor,
    Tolerances,
    averaged_data,
    chain_minimize,
    chain_step,
    chain_step_projected,
    constraint_pool,
    eval_jet,
    extremal_torsion,
    frame_ground_truth_torsion,
    is_horizontal_contact,
    is_vertical_contact,
    make_pools,
    oracle_min_norm,
    residual,
    sigma,
    solve_reference,
    stacked_residual,
    symmetry_invariance_check,
    tangent,
    vertical_margin,
)
from gberwald.errors import (
    DimensionMismatch,
    Inconsistent,
    InfeasibleStep,
    NotASymmetry,
    VerticalContact,
)
from gberwald.tensors import FRAME_CHART, FRAME_ORTHONORMAL, pair_indices
from gberwald.torsion import (
    ROUTE_CHAIN,
    ROUTE_HORIZONTAL,
    ROUTE_VERTICAL,
    STATUS_CONVERGED,
    orthogonality_defect,
    sigma_matrix,
    sigma_matrix_batch,
    sigma_matrix_general,
    stacked_least_squares,
    stacked_null_space,
    torsion_to_orthonormal_comps,
)

ORIGIN2 = np.zeros(2)


# ---------------------------------------------------------------------------
# oracle implementations

def sigma_oracle(y, d):
    """Index-by-index constraint matrix: with rho_uv = y_u d_v - d_u y_v the
    entry at row i, column (pair q = (a, b), value index c) is
    (delta_ic rho_ab + delta_ia rho_cb - delta_ib rho_ca) / 2."""
    y = np.asarray(y, dtype=float)
    d = np.asarray(d, dtype=float)
    n = y.size
    rho = np.outer(y, d) - np.outer(d, y)
    pairs = pair_indices(n)
    S = np.zeros((n, n * len(pairs)))
    for q, (a, b) in enumerate(pairs):
        for i in range(n):
            for c in range(n):
                S[i, q * n + c] = 0.5 * (
                    (i == c) * rho[a, b] + (i == a) * rho[c, b] - (i == b) * rho[c, a]
                )
    return S


def pinv_solution(S, rhs):
    """Reference minimum-norm solve, by explicit pseudoinverse."""
    return np.linalg.pinv(S) @ (-np.asarray(rhs, dtype=float))


def synthetic_block(S, rhs, direction=None):
    """Constraint block with raw matrices; to_chart is the identity, so the
    frame is the chart and F = 1."""
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    v = tangent(np.zeros(n), np.eye(n)[0] if direction is None else direction)
    return ConstraintBlock(
        v=v,
        F=1.0,
        S=S,
        rhs=np.asarray(rhs, dtype=float),
        rhs_chart=np.asarray(rhs, dtype=float),
        margin=1.0,
        to_chart=np.eye(n),
    )


def synthetic_pool(blocks_S, blocks_rhs, n):
    """Pool over synthetic blocks; directions are placeholders."""
    k = len(blocks_S)
    return ConstraintPool(
        directions=np.tile(np.eye(n)[0], (k, 1)),
        F=np.ones(k),
        S=np.stack([np.asarray(s, dtype=float) for s in blocks_S]),
        rhs=np.stack([np.asarray(r, dtype=float) for r in blocks_rhs]),
        rhs_chart=np.stack([np.asarray(r, dtype=float) for r in blocks_rhs]),
        margins=np.ones(k),
        to_chart=np.eye(n),
        point=np.zeros(n),
    )


def consistent_system(rng, n_blocks, t_true, underdetermined_val=False):
    """Selection and validation pools whose constraints all hold at t_true.

    Validation rows are combinations of selection rows, so every solution of
    the selection pool satisfies the validation pool as well (as happens for
    a compatible metric, where all constraints contain the compatible set).
    """
    N = t_true.size
    S_sel = [rng.normal(size=(3, N)) for _ in range(n_blocks)]
    rhs_sel = [-(s @ t_true) for s in S_sel]
    stacked_S = np.vstack(S_sel)
    stacked_rhs = np.concatenate(rhs_sel)
    S_val, rhs_val = [], []
    for _ in range(2):
        C = rng.normal(size=(3, stacked_S.shape[0]))
        S_val.append(C @ stacked_S)
        rhs_val.append(C @ stacked_rhs)
    sel = synthetic_pool(S_sel, rhs_sel, 3)
    val = synthetic_pool(S_val, rhs_val, 3)
    return sel, val


# ---------------------------------------------------------------------------
# constraint matrices

@settings(max_examples=200, deadline=None)
@given(
    y1=st.floats(-3, 3),
    y2=st.floats(-3, 3),
    d1=st.floats(-3, 3),
    d2=st.floats(-3, 3),
)
def test_sigma_closed_form_dimension_two(y1, y2, d1, d2):
    # in dimension 2 the constraint matrix is kappa times the identity,
    # kappa = y^1 d_2 - y^2 d_1
    S = sigma_matrix(np.array([y1, y2]), np.array([d1, d2]))
    kappa = y1 * d2 - y2 * d1
    np.testing.assert_allclose(S, kappa * np.eye(2), rtol=0, atol=1e-12)


def test_sigma_matches_oracle_dimensions_two_and_three():
    rng = np.random.default_rng(42)
    for n in (2, 3):
        Y = rng.normal(size=(12, n))
        D = rng.normal(size=(12, n))
        got = sigma_matrix_batch(Y, D)
        for k in range(12):
            np.testing.assert_allclose(
                got[k], sigma_oracle(Y[k], D[k]), rtol=0, atol=1e-13
            )


def test_frame_and_chart_constraint_paths_agree(frame_exp, quad2):
    # the chart-coordinate matrix and the orthonormal-frame matrix encode
    # the same equations: frame rows are to_chart^(-T) times chart rows
    avg = averaged_data(frame_exp, np.array([0.4, -0.2]), quad2)
    rng = np.random.default_rng(7)
    for _ in range(8):
        y = rng.normal(size=2)
        v = tangent(avg.point, y)
        jet = eval_jet(frame_exp, v)
        block = sigma(jet, v, avg)
        S_chart = sigma_matrix_general(jet, v, avg)
        t_chart = rng.normal(size=2)
        t_frame = torsion_to_orthonormal_comps(
            TorsionTensor(dim=2, comps=t_chart, frame=FRAME_CHART), avg
        )
        lhs_chart = S_chart @ t_chart + block.rhs_chart
        lhs_frame = block.S @ t_frame + block.rhs
        np.testing.assert_allclose(
            avg.frame.T @ lhs_chart, lhs_frame, rtol=0, atol=1e-12
        )


def test_constraint_block_is_zero_homogeneous_in_direction(randers_sine, quad2):
    # v and 2v carry the same constraint: matrices and right sides both
    # scale linearly, so solutions and relative residuals are unchanged
    avg = averaged_data(randers_sine, np.array([0.3, 0.1]), quad2)
    y = np.array([0.8, -0.6])
    b1 = sigma(eval_jet(randers_sine, tangent(avg.point, y)), tangent(avg.point, y), avg)
    b2 = sigma(
        eval_jet(randers_sine, tangent(avg.point, 2 * y)), tangent(avg.point, 2 * y), avg
    )
    np.testing.assert_allclose(b2.S, 2.0 * b1.S, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(b2.rhs, 2.0 * b1.rhs, rtol=1e-10, atol=1e-12)
    t1, _ = solve_reference(b1)
    t2, _ = solve_reference(b2)
    np.testing.assert_allclose(t2.comps, t1.comps, rtol=0, atol=1e-10)
    assert b2.margin == pytest.approx(b1.margin, rel=1e-9)


# ---------------------------------------------------------------------------
# contact predicates

def test_contact_dichotomy_across_families(
    euclidean, conformal, randers_flat, randers_sine, frame_exp, quad2
):
    # a direction's constraint matrix vanishes exactly when it is a
    # vertical contact direction, here scanned over 720 directions
    theta = 2 * math.pi * np.arange(720) / 720
    for family in (euclidean, conformal, randers_flat, randers_sine, frame_exp):
        avg = averaged_data(family, np.array([0.3, -0.4]), quad2)
        pool = constraint_pool(
            family, avg, np.column_stack([np.cos(theta), np.sin(theta)])
        )
        matrix_zero = np.max(np.abs(pool.S), axis=(1, 2)) < 1e-9 * pool.F
        margin_zero = pool.margins < 1e-9
        np.testing.assert_array_equal(matrix_zero, margin_zero)
        if family in (euclidean, conformal):
            assert np.all(margin_zero)
        else:
            # the one-form axis contributes isolated contact directions; the
            # scan is not allowed to be contact almost everywhere
            assert np.sum(margin_zero) <= 4
            assert np.sum(~margin_zero) > 700


def test_vertical_contact_scale_invariance(randers_flat, quad2):
    avg1 = averaged_data(randers_flat, ORIGIN2, quad2)
    avg2 = averaged_data(randers_flat, ORIGIN2, quad2, scale=1000.0)
    y = np.array([0.9, 0.5])
    v = tangent(ORIGIN2, y)
    v7 = tangent(ORIGIN2, 7.0 * y)
    m_base = vertical_margin(eval_jet(randers_flat, v), avg1, v)
    m_scaled_v = vertical_margin(eval_jet(randers_flat, v7), avg1, v7)
    m_scaled_g = vertical_margin(eval_jet(randers_flat, v), avg2, v)
    assert m_scaled_v == pytest.approx(m_base, rel=1e-9)
    assert m_scaled_g == pytest.approx(m_base, rel=1e-9)


def test_horizontal_contact_for_position_independent_norm(randers_flat, quad2):
    # x-independent norm: the averaged metric is constant, transport is
    # trivial, every horizontal derivative vanishes
    avg = averaged_data(randers_flat, ORIGIN2, quad2)
    for y in ([1.0, 0.0], [0.2, -1.4], [-0.7, 0.3]):
        v = tangent(ORIGIN2, y)
        block = sigma(eval_jet(randers_flat, v), v, avg)
        assert is_horizontal_contact(block)
    # generic directions are not vertical contact, the one-form axis is
    off_axis = tangent(ORIGIN2, [0.2, -1.4])
    assert not is_vertical_contact(eval_jet(randers_flat, off_axis), avg, off_axis)
    on_axis = tangent(ORIGIN2, [1.0, 0.0])
    assert is_vertical_contact(eval_jet(randers_flat, on_axis), avg, on_axis)


def test_vertical_contact_for_riemannian(conformal, quad2):
    avg = averaged_data(conformal, np.array([0.5, 0.2]), quad2)
    for y in ([1.0, 0.0], [0.3, 0.8], [-1.1, 0.4]):
        v = tangent(avg.point, y)
        assert is_vertical_contact(eval_jet(conformal, v), avg, v)


# ---------------------------------------------------------------------------
# single-direction solves

def test_reference_solve_matches_pseudoinverse(frame_exp, quad2):
    avg = averaged_data(frame_exp, np.array([0.2, 0.6]), quad2)
    rng = np.random.default_rng(13)
    for _ in range(10):
        y = rng.normal(size=2)
        v = tangent(avg.point, y)
        block = sigma(eval_jet(frame_exp, v), v, avg)
        t, lam = solve_reference(block)
        want = pinv_solution(block.S, block.rhs)
        np.testing.assert_allclose(t.comps, want, rtol=0, atol=1e-10)
        # the solution is S^T lam and satisfies the block
        np.testing.assert_allclose(t.comps, block.S.T @ lam, rtol=0, atol=1e-12)
        assert block.relative_residual(t.comps) < 1e-10
        assert np.max(np.abs(residual(block, t))) < 1e-10 * block.F


def test_gramian_closed_form_dimension_two(randers_sine, quad2):
    # dimension 2: S = kappa I makes the Gramian kappa^2 I; its smallest
    # eigenvalue is positive away from contact directions
    avg = averaged_data(randers_sine, np.array([0.3, 0.0]), quad2)
    rng = np.random.default_rng(3)
    smallest = []
    for _ in range(12):
        y = rng.normal(size=2)
        v = tangent(avg.point, y)
        block = sigma(eval_jet(randers_sine, v), v, avg)
        gram = block.S @ block.S.T
        kappa2 = block.S[0, 0] ** 2
        np.testing.assert_allclose(gram, kappa2 * np.eye(2), rtol=0, atol=1e-12)
        smallest.append(np.linalg.eigvalsh(gram)[0])
    assert min(smallest) > 0.0


def test_vertical_contact_rejected_by_reference_solve(euclidean, quad2):
    avg = averaged_data(euclidean, ORIGIN2, quad2)
    v = tangent(ORIGIN2, [1.0, 0.0])
    block = sigma(eval_jet(euclidean, v), v, avg)
    with pytest.raises(VerticalContact):
        solve_reference(block)


def test_unsolvable_block_raises_inconsistent():
    block = synthetic_block([[1.0, 0.0], [0.0, 0.0]], [0.0, 1.0])
    with pytest.raises(Inconsistent) as err:
        solve_reference(block)
    assert err.value.residual >= 1.0


def test_oracle_min_norm_requires_blocks():
    with pytest.raises(ValueError):
        oracle_min_norm([])


# ---------------------------------------------------------------------------
# chain steps

def test_chain_step_reaches_single_block_solution():
    rng = np.random.default_rng(17)
    S = rng.normal(size=(3, 9))
    t_true = rng.normal(size=9)
    block = synthetic_block(S, -(S @ t_true))
    state = chain_step(ChainState.start(3), block)
    assert state.length == 1
    want = pinv_solution(S, block.rhs)
    np.testing.assert_allclose(state.current.comps, want, rtol=0, atol=1e-10)
    # a satisfied block leaves the state untouched
    assert chain_step(state, block) is state


def test_chain_step_agrees_with_projected_formulation():
    rng = np.random.default_rng(23)
    t_true = rng.normal(size=9)
    blocks = []
    for _ in range(4):
        S = rng.normal(size=(3, 9))
        blocks.append(synthetic_block(S, -(S @ t_true)))
    a = ChainState.start(3)
    b = ChainState.start(3)
    for block in blocks:
        a = chain_step(a, block)
        b = chain_step_projected(b, block)
        np.testing.assert_allclose(a.current.comps, b.current.comps, rtol=0, atol=1e-10)
    assert a.length == b.length


def test_degenerate_step_collapses_to_block_solution():
    # history row inside the new block's row space and consistent with it:
    # the augmented system is rank-deficient, and the step must land on the
    # block's own minimum-norm solution
    rng = np.random.default_rng(31)
    S = rng.normal(size=(3, 9))
    c0 = rng.normal(size=3)
    t1 = S.T @ c0
    first = synthetic_block(S, -(S @ t1))
    state = chain_step(ChainState.start(3), first)
    np.testing.assert_allclose(state.current.comps, t1, rtol=0, atol=1e-10)

    # perturbation inside the row space, orthogonal to t1
    u = np.linalg.pinv(S) @ (S @ rng.normal(size=9))
    u -= (u @ t1) / (t1 @ t1) * t1
    second = synthetic_block(S, -(S @ (t1 + u)))
    stepped = chain_step(state, second)
    want = pinv_solution(S, second.rhs)
    np.testing.assert_allclose(stepped.current.comps, want, rtol=0, atol=1e-9)
    np.testing.assert_allclose(stepped.current.comps, t1 + u, rtol=0, atol=1e-9)


def test_conflicting_step_raises_infeasible():
    # same construction, but the new block contradicts the frozen inner
    # product against the first chain solution
    rng = np.random.default_rng(37)
    S = rng.normal(size=(3, 9))
    c0 = rng.normal(size=3)
    t1 = S.T @ c0
    first = synthetic_block(S, -(S @ t1))
    state = chain_step(ChainState.start(3), first)
    second = synthetic_block(S, -(S @ (1.5 * t1)))
    with pytest.raises(InfeasibleStep) as err:
        chain_step(state, second)
    assert err.value.residual > Tolerances().infeasible


def test_infeasible_rank_one_conflict_dimension_two():
    first = synthetic_block(np.eye(2), [-1.0, 0.0])
    state = chain_step(ChainState.start(2), first)
    np.testing.assert_allclose(state.current.comps, [1.0, 0.0], atol=1e-12)
    conflicting = synthetic_block([[2.0, 0.0], [0.0, 0.0]], [-4.0, 0.0])
    with pytest.raises(InfeasibleStep):
        chain_step(state, conflicting)


# ---------------------------------------------------------------------------
# full chains on synthetic pools

def test_chain_recovers_unique_solution():
    rng = np.random.default_rng(101)
    for _ in range(10):
        t_true = rng.normal(size=9)
        sel, val = consistent_system(rng, n_blocks=4, t_true=t_true)
        outcome = chain_minimize(sel, val)
        assert outcome.status == STATUS_CONVERGED
        np.testing.assert_allclose(
            outcome.state.current.comps, t_true, rtol=0, atol=1e-8
        )


def test_chain_finds_minimum_norm_of_underdetermined_system():
    # two blocks leave a 3-dimensional solution set; the chain has to land
    # on its minimum-norm element, which the stacked solve computes directly
    rng = np.random.default_rng(211)
    for _ in range(25):
        t_true = rng.normal(size=9)
        sel, val = consistent_system(rng, n_blocks=2, t_true=t_true)
        outcome = chain_minimize(sel, val)
        assert outcome.status == STATUS_CONVERGED
        want = oracle_min_norm(sel.blocks())
        np.testing.assert_allclose(
            outcome.state.current.comps, want.comps, rtol=0, atol=1e-8
        )
        assert outcome.state.current.norm <= np.linalg.norm(t_true) + 1e-8


def test_chain_increments_orthogonal_and_norms_monotone():
    rng = np.random.default_rng(307)
    for _ in range(10):
        t_true = rng.normal(size=9)
        n_blocks = int(rng.integers(2, 5))
        sel, val = consistent_system(rng, n_blocks=n_blocks, t_true=t_true)
        outcome = chain_minimize(sel, val)
        state = outcome.state
        assert state.length <= 9  # component dimension bounds the chain
        assert orthogonality_defect(state) <= 1e-8
        norms = [t.norm for t in state.chain]
        for prev, nxt in zip(norms, norms[1:]):
            assert nxt >= prev - 1e-12 * max(1.0, prev)


def test_chain_stalls_when_every_margin_is_excluded():
    sel = synthetic_pool([np.eye(2)], [[-1.0, 0.0]], 2)
    sel.margins = np.zeros(1)  # inside the near-contact exclusion band
    val = synthetic_pool([np.eye(2)], [[-1.0, 0.0]], 2)
    val.margins = np.zeros(1)
    outcome = chain_minimize(sel, val)
    assert outcome.status == "stalled"
    assert outcome.state.length == 0


# ---------------------------------------------------------------------------
# direction pools

def test_make_pools_reproducible_and_disjoint():
    a = make_pools(2, seed=5, point_index=3, run_index=0)
    b = make_pools(2, seed=5, point_index=3, run_index=0)
    np.testing.assert_array_equal(a.selection, b.selection)
    np.testing.assert_array_equal(a.validation, b.validation)
    other_run = make_pools(2, seed=5, point_index=3, run_index=1)
    # the equispaced lattices of the two runs interleave, so no direction
    # appears in both
    d = a.selection[:, None, :] - other_run.selection[None, :, :]
    assert np.min(np.linalg.norm(d, axis=2)) > 1e-6
    changed_seed = make_pools(2, seed=6, point_index=3, run_index=0)
    assert not np.array_equal(a.selection, changed_seed.selection)


def test_make_pools_sphere_shapes_and_validation():
    pools = make_pools(3, seed=0, point_index=0, run_index=1, n_equispaced=100, n_random=16, n_validation=25)
    assert pools.selection.shape == (116, 3)
    assert pools.validation.shape == (25, 3)
    np.testing.assert_allclose(np.linalg.norm(pools.selection, axis=1), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        make_pools(2, seed=0, point_index=0, run_index=2)
    with pytest.raises(DimensionMismatch):
        make_pools(4, seed=0, point_index=0, run_index=0)


# ---------------------------------------------------------------------------
# per-point solves on real families

def test_extremal_routes_per_family(conformal, randers_flat, frame_exp, quad2):
    x = np.array([0.3, -0.2])
    pools = make_pools(2, seed=0, point_index=0, run_index=0)
    cases = [
        (conformal, ROUTE_VERTICAL),
        (randers_flat, ROUTE_HORIZONTAL),
        (frame_exp, ROUTE_CHAIN),
    ]
    for family, route in cases:
        avg = averaged_data(family, x, quad2)
        t, diag = extremal_torsion(family, avg, pools)
        assert diag.route == route
        assert diag.converged
        if route == ROUTE_VERTICAL:
            assert diag.ratio_spread is not None and diag.ratio_spread < 1e-9
            assert t.norm == 0.0
        if route == ROUTE_HORIZONTAL:
            assert t.norm == 0.0
            assert diag.residual_selection < 1e-9


def test_extremal_recovers_frame_torsion(frame_exp, quad2):
    pools = make_pools(2, seed=0, point_index=0, run_index=0)
    for x in ([0.0, 0.0], [0.5, 0.25], [-0.4, 0.8]):
        avg = averaged_data(frame_exp, np.asarray(x), quad2)
        t, diag = extremal_torsion(frame_exp, avg, pools)
        assert diag.route == ROUTE_CHAIN
        assert diag.status == STATUS_CONVERGED
        # dimension 2: a single step settles the whole chain
        assert diag.chain_length == 1
        assert diag.residual_validation < 1e-7
        want = frame_ground_truth_torsion(frame_exp, np.asarray(x, dtype=float))
        np.testing.assert_allclose(
            diag.torsion_chart.comps, want.comps, rtol=0, atol=1e-8
        )
        assert diag.chain_norms == [t.norm]


def test_extremal_matches_stacked_oracle_on_frame_family(frame_exp, quad2):
    # whole-pool stacked solve against the chain result
    pools = make_pools(2, seed=0, point_index=0, run_index=0)
    avg = averaged_data(frame_exp, np.array([0.2, 0.4]), quad2)
    t, diag = extremal_torsion(frame_exp, avg, pools)
    sel = constraint_pool(frame_exp, avg, pools.selection @ avg.frame)
    want = oracle_min_norm(sel.blocks())
    np.testing.assert_allclose(t.comps, want.comps, rtol=0, atol=1e-8)


def test_incompatible_metric_leaves_large_residual(randers_sine, quad2):
    pools = make_pools(2, seed=0, point_index=0, run_index=0)
    avg = averaged_data(randers_sine, np.array([0.3, 0.0]), quad2)
    t, diag = extremal_torsion(randers_sine, avg, pools)
    assert diag.route == ROUTE_CHAIN
    assert not diag.converged
    sel = constraint_pool(randers_sine, avg, pools.selection @ avg.frame)
    _, worst = stacked_least_squares(sel)
    assert worst > 1e-3
    assert stacked_residual(sel, t.comps) >= worst - 1e-12


def test_extremal_results_invariant_under_metric_scaling(frame_exp, randers_sine, quad2):
    pools = make_pools(2, seed=0, point_index=0, run_index=0)
    x = np.array([0.4, 0.1])
    for family in (frame_exp, randers_sine):
        base_avg = averaged_data(family, x, quad2)
        scaled_avg = averaged_data(family, x, quad2, scale=1000.0)
        t_base, d_base = extremal_torsion(family, base_avg, pools)
        t_scaled, d_scaled = extremal_torsion(family, scaled_avg, pools)
        assert d_base.route == d_scaled.route
        assert d_base.status == d_scaled.status
        np.testing.assert_allclose(
            d_scaled.torsion_chart.comps, d_base.torsion_chart.comps, rtol=0, atol=1e-8
        )
        assert d_scaled.residual_selection == pytest.approx(
            d_base.residual_selection, abs=1e-9
        )
        assert d_scaled.residual_validation == pytest.approx(
            d_base.residual_validation, abs=1e-9
        )


# ---------------------------------------------------------------------------
# symmetry invariance

def test_symmetry_check_is_vacuous_in_dimension_two(randers_flat, quad2):
    # two constraint rows per direction already pin both components, so the
    # stacked null space is trivial
    avg = averaged_data(randers_flat, ORIGIN2, quad2)
    theta = 2 * math.pi * np.arange(32) / 32
    directions = np.column_stack([np.cos(theta), np.sin(theta)])
    report = symmetry_invariance_check(
        randers_flat, avg, directions, np.diag([1.0, -1.0])
    )
    assert report.null_dim == 0
    assert report.defect == 0.0
    assert stacked_null_space(constraint_pool(randers_flat, avg, directions)).shape[1] == 0


def test_symmetry_maps_null_space_into_itself_dimension_three(randers_axis3, quad3):
    # two directions give six rows on nine components: the null space is at
    # least three-dimensional and the axis reflection must preserve it
    avg = averaged_data(randers_axis3, np.zeros(3), quad3)
    directions = np.array([[0.6, 0.8, 0.0], [0.0, 0.6, 0.8]])
    phi = np.diag([1.0, 1.0, -1.0])
    report = symmetry_invariance_check(randers_axis3, avg, directions, phi)
    assert report.null_dim >= 3
    assert report.defect <= 1e-8
    assert report.gamma_defect <= 1e-10
    assert report.metric_defect <= 1e-12


def test_non_symmetries_are_rejected(randers_axis3, quad3):
    avg = averaged_data(randers_axis3, np.zeros(3), quad3)
    directions = np.array([[0.6, 0.8, 0.0], [0.0, 0.6, 0.8]])
    c, s = math.cos(0.7), math.sin(0.7)
    rotation_12 = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(NotASymmetry):
        symmetry_invariance_check(randers_axis3, avg, directions, rotation_12)
    with pytest.raises(NotASymmetry):
        symmetry_invariance_check(randers_axis3, avg, directions, np.diag([-1.0, 1.0, 1.0]))
    with pytest.raises(DimensionMismatch):
        symmetry_invariance_check(randers_axis3, avg, directions, np.eye(2))
