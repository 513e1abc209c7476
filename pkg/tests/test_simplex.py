import numpy as np
import pytest

from cosparse_grip.simplex import (
    LpInfeasibleError,
    LpUnboundedError,
    solve_standard_lp,
)


def test_hand_worked_lp():
    # max x1 + 2 x2 with x1 + x2 <= 4, x1 <= 2, slacks appended
    c = np.array([-1.0, -2.0, 0.0, 0.0])
    a = np.array([[1.0, 1.0, 1.0, 0.0], [1.0, 0.0, 0.0, 1.0]])
    b = np.array([4.0, 2.0])
    sol = solve_standard_lp(c, a, b)
    assert sol.objective == pytest.approx(-8.0, abs=1e-12)
    assert np.allclose(sol.x[:2], [0.0, 4.0], atol=1e-12)
    assert sol.pivots >= 1


def test_solution_invariants():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 7))
    x0 = np.abs(rng.standard_normal(7))
    b = a @ x0  # feasible by construction
    c = np.abs(rng.standard_normal(7)) + 0.1  # positive costs: bounded
    sol = solve_standard_lp(c, a, b)
    assert np.linalg.norm(a @ sol.x - b) <= 1e-9 * max(1.0, np.linalg.norm(b))
    assert sol.x.min() >= -1e-12
    assert sol.objective == pytest.approx(float(c @ sol.x), abs=1e-12)
    assert sol.objective <= float(c @ x0) + 1e-9


def test_matches_scipy_on_random_instances():
    scipy_opt = pytest.importorskip("scipy.optimize")
    for seed in range(8):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((4, 9))
        b = a @ np.abs(rng.standard_normal(9))
        c = np.abs(rng.standard_normal(9)) + 0.05
        ours = solve_standard_lp(c, a, b)
        ref = scipy_opt.linprog(c, A_eq=a, b_eq=b, bounds=[(0, None)] * 9, method="highs")
        assert ref.status == 0
        assert ours.objective == pytest.approx(ref.fun, abs=1e-8)


def test_infeasible_detected():
    with pytest.raises(LpInfeasibleError):
        solve_standard_lp(np.array([1.0]), np.array([[1.0]]), np.array([-1.0]))
    # inconsistent pair of rows
    with pytest.raises(LpInfeasibleError):
        solve_standard_lp(
            np.array([1.0, 1.0]),
            np.array([[1.0, 1.0], [1.0, 1.0]]),
            np.array([1.0, 2.0]),
        )


def test_unbounded_detected():
    # x1 free to grow: only x2 is pinned
    with pytest.raises(LpUnboundedError):
        solve_standard_lp(
            np.array([-1.0, 0.0]),
            np.array([[0.0, 1.0]]),
            np.array([1.0]),
        )


def test_redundant_rows_are_dropped():
    a = np.array([[1.0, 1.0], [2.0, 2.0]])  # second row dependent
    b = np.array([2.0, 4.0])
    sol = solve_standard_lp(np.array([1.0, 2.0]), a, b)
    assert sol.objective == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(sol.x, [2.0, 0.0], atol=1e-12)


def test_beale_cycling_example_terminates():
    # the classic degenerate instance that cycles under naive pivoting;
    # Bland's rule must terminate at objective -1/20
    c = np.array([-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0])
    a = np.array(
        [
            [0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0],
            [0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ]
    )
    b = np.array([0.0, 0.0, 1.0])
    sol = solve_standard_lp(c, a, b)
    assert sol.objective == pytest.approx(-0.05, abs=1e-12)


def test_zero_rhs_solves_trivially():
    sol = solve_standard_lp(
        np.array([1.0, 1.0]), np.array([[1.0, -1.0]]), np.array([0.0])
    )
    assert sol.objective == pytest.approx(0.0, abs=1e-12)


def test_input_validation():
    with pytest.raises(ValueError):
        solve_standard_lp(np.array([1.0]), np.array([[1.0, 2.0]]), np.array([1.0]))
    with pytest.raises(ValueError):
        solve_standard_lp(np.array([1.0, 2.0]), np.array([[1.0, 2.0]]), np.array([1.0, 2.0]))
