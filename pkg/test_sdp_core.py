#!/usr/bin/env python3
"""
Test script for the barrier SDP engine.

This script checks:
- Variable bases and affine operators
- Scalar problems with known optima (trace minimization, Lyapunov inequalities)
- Infeasibility detection and iteration limits
- Iterate traces

Run with: pytest test_sdp_core.py  (or python test_sdp_core.py)
"""

import csv
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from sdp_core import (
    AffineMatrixOperator,
    SdpProblem,
    SdpStatus,
    SolverOptions,
    eig_sym,
    max_eigenvalue,
    solve,
    write_trace_csv,
)


def _lyapunov_problem(a: float, objective: bool = True) -> SdpProblem:
    """minimize q subject to a^2 q - q + 1 < 0 and q > 0."""
    problem = SdpProblem()
    q = problem.add_variable("q", 1)
    if objective:
        problem.add_trace_objective(q)
    problem.add_constraint(AffineMatrixOperator.from_terms(
        np.eye(1), q.term(lambda e: a * e * a - e), label="lyapunov"))
    problem.add_constraint(AffineMatrixOperator.from_terms(
        np.zeros((1, 1)), q.term(lambda e: -e), label="positive"))
    return problem


def test_symmetric_variable_basis():
    problem = SdpProblem()
    problem.add_variable("first", 1)
    v = problem.add_variable("V", 3)
    assert v.offset == 1
    assert v.n_coordinates == 6
    assert problem.n == 7
    assert v.diagonal_indices() == [1, 4, 6]
    x = np.arange(7, dtype=float)
    m = v.matrix(x)
    np.testing.assert_array_equal(m, m.T)
    assert m[0, 2] == 3.0
    for e in v.basis():
        np.testing.assert_array_equal(e, e.T)


def test_operator_checks():
    with pytest.raises(ValueError, match="not symmetric"):
        AffineMatrixOperator(np.array([[0.0, 1.0], [0.0, 0.0]]), [])
    with pytest.raises(ValueError, match="coefficient shape"):
        AffineMatrixOperator(np.zeros((2, 2)), [(0, np.eye(3))])
    op = AffineMatrixOperator(np.zeros((2, 2)), [(0, np.eye(2)), (0, np.eye(2))])
    assert len(op.coeffs) == 1
    np.testing.assert_array_equal(op.evaluate(np.array([1.5])), 3.0 * np.eye(2))

    problem = SdpProblem()
    problem.add_variable("q", 1)
    with pytest.raises(ValueError, match="undeclared"):
        problem.add_constraint(AffineMatrixOperator(np.zeros((1, 1)), [(3, np.eye(1))]))
    with pytest.raises(ValueError):
        problem.add_variable("q", 2)


def test_eig_sym():
    m = np.array([[2.0, 1.0], [1.0, 2.0]])
    values, vectors = eig_sym(m)
    np.testing.assert_allclose(values, [1.0, 3.0])
    np.testing.assert_allclose(vectors @ np.diag(values) @ vectors.T, m, atol=1e-12)
    assert max_eigenvalue(m) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        eig_sym(np.array([[0.0, 1.0], [2.0, 0.0]]))


def test_positive_scalar_minimum_approaches_zero():
    problem = SdpProblem()
    q = problem.add_variable("q", 1)
    problem.add_trace_objective(q)
    problem.add_constraint(AffineMatrixOperator.from_terms(np.zeros((1, 1)), q.term(lambda e: -e)))
    solution = solve(problem)
    assert solution.status == SdpStatus.OPTIMAL
    assert 0 < solution.objective_value < 1e-6
    assert solution.margin < 0


def test_lyapunov_scalar_oracle():
    rng = np.random.default_rng(7)
    values = rng.uniform(-2.0, 2.0, size=100)
    values = values[np.abs(np.abs(values) - 1.0) >= 1e-2]
    for a in values:
        solution = solve(_lyapunov_problem(float(a)))
        if abs(a) < 1:
            assert solution.status == SdpStatus.OPTIMAL, a
            assert solution.objective_value == pytest.approx(1.0 / (1.0 - a * a), rel=1e-6)
        else:
            assert solution.status == SdpStatus.INFEASIBLE, a


def test_lyapunov_near_the_unit_circle():
    for a in (0.999, 0.9995, -0.999):
        solution = solve(_lyapunov_problem(a))
        assert solution.status == SdpStatus.OPTIMAL, a
        assert solution.objective_value == pytest.approx(1.0 / (1.0 - a * a), rel=1e-4)
    for a in (1.001, 1.0005, -1.001):
        assert solve(_lyapunov_problem(a)).status == SdpStatus.INFEASIBLE, a


def test_dropping_constraints_never_raises_the_optimum():
    from decomposable_model import SwitchedMas, consensus_example
    from lmi_analysis import build_agent_level_problem

    rng = np.random.default_rng(11)
    for kappa, p in zip(rng.uniform(0.02, 0.1, 10), rng.uniform(0.3, 1.0, 10)):
        mas = SwitchedMas.from_bounds(20, 2.68, 18.24, float(p), consensus_example(float(kappa)))
        full = solve(build_agent_level_problem(mas, deflated=True))
        relaxed_problem = build_agent_level_problem(mas, deflated=True)
        relaxed_problem.constraints = [
            op for op in relaxed_problem.constraints if not op.label.endswith(f"@{mas.lambda_lo:g}")
        ]
        assert len(relaxed_problem.constraints) == 3
        relaxed = solve(relaxed_problem)
        assert full.optimal and relaxed.optimal, (kappa, p)
        assert relaxed.objective_value <= full.objective_value * (1 + 1e-6), (kappa, p)


def test_zero_objective_returns_feasible_point():
    solution = solve(_lyapunov_problem(0.5, objective=False))
    assert solution.optimal
    assert solution.margin < 0


def test_iteration_limit():
    solution = solve(_lyapunov_problem(0.5), SolverOptions(max_iterations=1))
    assert solution.status == SdpStatus.MAX_ITERATIONS
    assert not solution.optimal


def test_matrix_lyapunov_matches_scipy():
    """minimize trace(P) with A^T P A - P + I < 0 gives the discrete Lyapunov solution."""
    import scipy.linalg

    a = np.array([[0.5, 0.2], [-0.1, 0.7]])
    problem = SdpProblem()
    p = problem.add_variable("P", 2)
    problem.add_trace_objective(p)
    problem.add_constraint(AffineMatrixOperator.from_terms(np.eye(2), p.term(lambda e: a.T @ e @ a - e)))
    problem.add_constraint(AffineMatrixOperator.from_terms(np.zeros((2, 2)), p.term(lambda e: -e)))
    solution = solve(problem)
    assert solution.optimal
    expected = scipy.linalg.solve_discrete_lyapunov(a.T, np.eye(2))
    np.testing.assert_allclose(problem.value(p, solution.x), expected, rtol=1e-5, atol=1e-6)


def test_trace_csv(tmp_path):
    solution = solve(_lyapunov_problem(0.5), SolverOptions(record_trace=True))
    assert solution.trace
    assert {r.phase for r in solution.trace} == {1, 2}
    path = tmp_path / "trace.csv"
    write_trace_csv(solution, str(path))
    with open(path) as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["iteration", "phase", "mu", "objective", "max_eigenvalue"]
    assert len(rows) == 1 + len(solution.trace)


def test_solver_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(mu_factor=1.5)
    with pytest.raises(ValueError):
        SolverOptions(max_iterations=0)


def main():
    """Run the tests that need no fixtures as a script."""
    print("📐 Testing the SDP engine")
    print("=" * 50)

    tests = [(name, func) for name, func in globals().items()
             if name.startswith("test_") and func is not test_trace_csv]
    passed = 0
    for name, func in tests:
        try:
            func()
            print(f"✅ {name}")
            passed += 1
        except Exception as e:
            print(f"❌ {name}: {e}")

    print("\n" + "=" * 50)
    print(f"🏁 Test Results: {passed}/{len(tests)} tests passed")


if __name__ == "__main__":
    main()
