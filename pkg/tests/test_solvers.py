import json

import numpy as np
import pytest

import cosparse_grip as cg
from cosparse_grip.solvers import MAX_LP_VARIABLES
from _support import matched_instance


@pytest.fixture(scope="module")
def reference_instance():
    """Frozen redundant instance shared by the oracle tests."""
    phi = cg.make_sensing_matrix("gaussian", 6, 10, 42)
    d = cg.make_dictionary("tight-frame", 14, 10, 3)
    x = cg.sample_cosparse_signal(d, 5, 5)
    return phi, d, x, phi.entries @ x


# ---------------------------------------------------------------------------
# constraint construction


def test_constraint_spec_validation():
    y = np.ones(3)
    cg.ConstraintSpec("equality", y)
    cg.ConstraintSpec("l2-ball", y, epsilon=0.5)
    cg.ConstraintSpec("dantzig", y, lam=0.0)  # zero cap is legal
    with pytest.raises(ValueError):
        cg.ConstraintSpec("l2-ball", y, epsilon=0.0)
    with pytest.raises(ValueError):
        cg.ConstraintSpec("dantzig", y, lam=-0.1)
    with pytest.raises(ValueError):
        cg.ConstraintSpec("box", y)
    with pytest.raises(ValueError):
        cg.ConstraintSpec("equality", np.array([np.nan, 0.0]))
    spec = cg.ConstraintSpec("equality", y)
    with pytest.raises(ValueError):
        spec.y[0] = 2.0


# ---------------------------------------------------------------------------
# first-order route against frozen and live oracles


def test_equality_objective_matches_frozen_vertex(reference_instance):
    phi, d, x, y = reference_instance
    res = cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("equality", y))
    assert res.converged
    # vertex value from the exact simplex, cross-checked against an
    # interior-point solve at build time
    assert res.objective == pytest.approx(1.800759346685715, abs=5e-8)
    assert np.linalg.norm(phi.entries @ res.x_hat - y) <= 1e-7 * np.linalg.norm(y)


def test_equality_objective_matches_live_convex_solver(reference_instance):
    cp = pytest.importorskip("cvxpy")
    phi, d, x, y = reference_instance
    z = cp.Variable(10)
    prob = cp.Problem(cp.Minimize(cp.norm1(d.entries @ z)), [phi.entries @ z == y])
    prob.solve(solver=cp.CLARABEL)
    res = cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("equality", y))
    assert res.objective == pytest.approx(prob.value, abs=5e-8)


def test_ball_objective_matches_frozen_oracle(reference_instance):
    phi, d, x, y = reference_instance
    res = cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("l2-ball", y, epsilon=0.1))
    assert res.converged
    assert res.objective == pytest.approx(1.476490643, abs=5e-8)
    assert np.linalg.norm(phi.entries @ res.x_hat - y) <= 0.1 + 1e-7


def test_ball_objective_matches_live_convex_solver(reference_instance):
    cp = pytest.importorskip("cvxpy")
    phi, d, x, y = reference_instance
    z = cp.Variable(10)
    prob = cp.Problem(
        cp.Minimize(cp.norm1(d.entries @ z)),
        [cp.norm(phi.entries @ z - y) <= 0.1],
    )
    prob.solve(solver=cp.CLARABEL)
    res = cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("l2-ball", y, epsilon=0.1))
    assert res.objective == pytest.approx(prob.value, abs=5e-8)


def test_ball_wider_radius_never_increases_objective(reference_instance):
    phi, d, x, y = reference_instance
    narrow = cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("l2-ball", y, epsilon=0.05))
    wide = cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("l2-ball", y, epsilon=0.5))
    assert wide.objective <= narrow.objective + 1e-8


def test_first_order_rejects_dantzig(reference_instance):
    phi, d, x, y = reference_instance
    with pytest.raises(ValueError):
        cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("dantzig", y, lam=0.1))
    with pytest.raises(ValueError):
        cg.solve_synthesis_l1(phi, d, cg.ConstraintSpec("dantzig", y, lam=0.1))


def test_toy_identity_instance_recovers_data():
    phi_raw = np.eye(1)  # square sensing: raw-array escape hatch
    d = cg.Dictionary(np.eye(1), "identity")
    res = cg.solve_analysis_l1(phi_raw, d, cg.ConstraintSpec("equality", np.array([2.0])))
    assert res.x_hat[0] == pytest.approx(2.0, abs=1e-7)
    assert res.objective == pytest.approx(2.0, abs=1e-7)


def test_exact_recovery_on_matched_instance():
    d, phi = matched_instance(10, 9, 4)
    x = cg.sample_cosparse_signal(d, 2, 5)
    res = cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("equality", phi.entries @ x))
    assert res.converged
    assert np.linalg.norm(res.x_hat - x) <= 1e-6


def test_pdhg_deterministic(reference_instance):
    phi, d, x, y = reference_instance
    a = cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("equality", y))
    b = cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("equality", y))
    assert np.array_equal(a.x_hat, b.x_hat)
    assert a.iterations == b.iterations


def test_equality_scaling_equivariance(reference_instance):
    phi, d, x, y = reference_instance
    res1 = cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("equality", y))
    res2 = cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("equality", 3.0 * y))
    assert res2.objective == pytest.approx(3.0 * res1.objective, rel=1e-6)
    assert np.linalg.norm(res2.x_hat - 3.0 * res1.x_hat) <= 1e-5


def test_infeasible_equality_raises():
    phi_raw = np.array([[1.0, 0.0], [1.0, 0.0]])  # rank 1, square
    d = cg.Dictionary(np.eye(2), "identity")
    with pytest.raises(cg.InfeasibleConstraintError):
        cg.solve_analysis_l1(phi_raw, d, cg.ConstraintSpec("equality", np.array([0.0, 1.0])))
    with pytest.raises(cg.InfeasibleConstraintError):
        cg.solve_analysis_l1(
            phi_raw, d, cg.ConstraintSpec("l2-ball", np.array([0.0, 1.0]), epsilon=1e-3)
        )


def test_solver_options_respected(reference_instance):
    phi, d, x, y = reference_instance
    starved = cg.solve_analysis_l1(
        phi, d, cg.ConstraintSpec("equality", y), cg.SolverOptions(max_iters=5)
    )
    assert not starved.converged
    assert starved.iterations == 5
    loose = cg.solve_analysis_l1(
        phi, d, cg.ConstraintSpec("equality", y), cg.SolverOptions(tol=1e-4)
    )
    full = cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("equality", y))
    assert loose.iterations < full.iterations


# ---------------------------------------------------------------------------
# synthesis route


def test_synthesis_objective_matches_frozen_oracle(reference_instance):
    phi, d, x, y = reference_instance
    res = cg.solve_synthesis_l1(phi, d, cg.ConstraintSpec("equality", y))
    assert res.converged
    assert res.objective == pytest.approx(1.64966057, abs=1e-7)


def test_synthesis_equals_analysis_for_orthogonal_dictionary():
    d = cg.make_dictionary("orthogonal", 8, 8, 3)
    phi = cg.make_sensing_matrix("gaussian", 6, 8, 0)
    x = cg.sample_cosparse_signal(d, 5, 11)
    y = phi.entries @ x
    res_a = cg.solve_analysis_l1(phi, d, cg.ConstraintSpec("equality", y))
    res_s = cg.solve_synthesis_l1(phi, d, cg.ConstraintSpec("equality", y))
    assert np.linalg.norm(res_a.x_hat - res_s.x_hat) <= 1e-6
    assert res_a.objective == pytest.approx(res_s.objective, abs=1e-6)


def test_synthesis_accepts_raw_atoms(reference_instance):
    phi, d, x, y = reference_instance
    via_dict = cg.solve_synthesis_l1(phi, d, cg.ConstraintSpec("equality", y))
    via_atoms = cg.solve_synthesis_l1(phi, d.entries.T, cg.ConstraintSpec("equality", y))
    assert np.array_equal(via_dict.x_hat, via_atoms.x_hat)
    with pytest.raises(ValueError):
        cg.solve_synthesis_l1(phi, np.ones((3, 2, 1)), cg.ConstraintSpec("equality", y))
    with pytest.raises(ValueError):
        cg.solve_synthesis_l1(phi, np.ones((9, 4)), cg.ConstraintSpec("equality", y))


# ---------------------------------------------------------------------------
# LP route


def test_lp_equality_certificate(reference_instance):
    phi, d, x, y = reference_instance
    res = cg.solve_lp_certified(phi, d, cg.ConstraintSpec("equality", y))
    assert res.certified
    assert res.certification_gap == 0.0
    assert res.converged
    assert res.objective == pytest.approx(1.800759346685715, abs=1e-9)
    assert np.linalg.norm(phi.entries @ res.x_hat - y) <= 1e-8


def test_lp_dantzig_matches_frozen_oracle(reference_instance):
    phi, d, x, y = reference_instance
    res = cg.solve_lp_certified(phi, d, cg.ConstraintSpec("dantzig", y, lam=0.05))
    assert res.objective == pytest.approx(1.3799218652170024, abs=1e-9)
    g = phi.entries.T @ (phi.entries @ res.x_hat - y)
    assert np.abs(g).max() <= 0.05 + 1e-8


def test_lp_dantzig_matches_live_scipy(reference_instance):
    scipy_opt = pytest.importorskip("scipy.optimize")
    phi, d, x, y = reference_instance
    n, p, lam = 10, 14, 0.05
    g = phi.entries.T @ phi.entries
    b = phi.entries.T @ y
    c = np.concatenate([np.zeros(2 * n), np.ones(p)])
    a_ub = np.block(
        [
            [d.entries, -d.entries, -np.eye(p)],
            [-d.entries, d.entries, -np.eye(p)],
            [g, -g, np.zeros((n, p))],
            [-g, g, np.zeros((n, p))],
        ]
    )
    b_ub = np.concatenate([np.zeros(2 * p), b + lam, lam - b])
    ref = scipy_opt.linprog(
        c, A_ub=a_ub, b_ub=b_ub, bounds=[(0, None)] * (2 * n + p), method="highs"
    )
    res = cg.solve_lp_certified(phi, d, cg.ConstraintSpec("dantzig", y, lam=lam))
    assert res.objective == pytest.approx(ref.fun, abs=1e-8)


def test_dantzig_large_cap_returns_zero(reference_instance):
    phi, d, x, y = reference_instance
    lam = float(np.abs(phi.entries.T @ y).max()) + 1.0
    res = cg.solve_lp_certified(phi, d, cg.ConstraintSpec("dantzig", y, lam=lam))
    assert res.objective == pytest.approx(0.0, abs=1e-10)
    assert np.abs(res.x_hat).max() <= 1e-9


def test_pdhg_certification_against_lp(reference_instance):
    phi, d, x, y = reference_instance
    res = cg.solve_analysis_l1(
        phi, d, cg.ConstraintSpec("equality", y), cg.SolverOptions(certify=True)
    )
    assert res.certified
    assert res.certification_gap is not None and res.certification_gap <= 1e-6
    with pytest.raises(ValueError):
        cg.solve_analysis_l1(
            phi,
            d,
            cg.ConstraintSpec("l2-ball", y, epsilon=0.1),
            cg.SolverOptions(certify=True),
        )


def test_lp_variable_budget_enforced():
    d = cg.make_dictionary("tight-frame", 110, 40, 0)
    phi = cg.make_sensing_matrix("gaussian", 20, 40, 0)
    y = np.zeros(20)
    assert 2 * 40 + 3 * 110 > MAX_LP_VARIABLES
    with pytest.raises(ValueError):
        cg.solve_lp_certified(phi, d, cg.ConstraintSpec("equality", y))


def test_recovery_result_serializes(reference_instance):
    phi, d, x, y = reference_instance
    res = cg.solve_lp_certified(phi, d, cg.ConstraintSpec("equality", y))
    doc = json.loads(res.to_json())
    for key in ("objective", "iterations", "primal_residual", "dual_residual", "certified", "x_hat", "converged"):
        assert key in doc
    assert doc["certified"] is True
    assert len(doc["x_hat"]) == 10
