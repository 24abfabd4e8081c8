#!/usr/bin/env python3
"""
Test script for the H2 certificates.

This script checks:
- The SDP optimum against the scalar closed forms of the consensus example
- Monotonicity of the bound in the spectral interval
- Post-hoc residuals and the strictness of a shrunken certificate
- Lifting of agent-level certificates to every topology and loss mode
- The mode-enumerated conditions never exceed the lifted certificate

Run with: pytest test_lmi_analysis.py  (or python test_lmi_analysis.py)
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from decomposable_model import DecomposableMatrices, SwitchedMas, consensus_example
from graphs import Graph, GraphFamily, circulant_graph, spectral_bounds
from lmi_analysis import (
    NoCertificate,
    SpectralRadiusError,
    build_agent_level_problem,
    certificate_residuals,
    consensus_closed_form,
    format_certificate,
    lift_certificate,
    reduced_matrices,
    solve_h2_bound,
    solve_mode_enumerated,
    swapped_closed_form,
    verify_certificate_lifting,
)

BOUNDS = (2.68, 18.24)


def _complete(n: int) -> Graph:
    return Graph.from_edges(n, ((i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)))


def _four_agent_family() -> GraphFamily:
    graphs = (circulant_graph(4, 1), _complete(4))
    return GraphFamily(graphs, *spectral_bounds(graphs))


def _stable_blocks() -> DecomposableMatrices:
    return DecomposableMatrices(1, 1, 1, {
        "A_d": 0.5, "A_c": -0.1, "B_d": 1.0, "B_c": 0.2, "C_p": 1.0, "D_d": 0.1,
    })


def test_consensus_bound_matches_closed_form():
    mas = SwitchedMas.from_bounds(20, *BOUNDS, 0.5, consensus_example(0.1))
    cert = solve_h2_bound(mas, deflated=True)
    expected = consensus_closed_form(20, 0.1, 0.5, *BOUNDS)
    assert expected.h2_bound == pytest.approx(83.76, abs=0.01)
    assert cert.h2_bound == pytest.approx(expected.h2_bound, rel=1e-6)
    assert cert.gamma ** 2 == pytest.approx(expected.gamma_sq, rel=1e-6)
    assert cert.beta == 0.0
    assert cert.Z2 is None
    assert cert.margin < 0


def test_swapped_bound_matches_closed_form():
    for lo in (2.68, 5.0):
        mas = SwitchedMas.from_bounds(20, lo, 18.24, 0.5, consensus_example(0.1, swapped=True))
        cert = solve_h2_bound(mas, deflated=True)
        expected = swapped_closed_form(20, 0.1, 0.5, lo, 18.24)
        assert cert.h2_bound == pytest.approx(expected.h2_bound, rel=1e-6)
    # the swapped bound is set by the slowest mode, so raising lambda_lo tightens it
    assert (swapped_closed_form(20, 0.1, 0.5, 5.0, 18.24).h2_bound
            < swapped_closed_form(20, 0.1, 0.5, 2.68, 18.24).h2_bound)


def test_widening_the_interval_never_lowers_the_bound():
    grid = np.linspace(0.5, 19.5, 12)
    for oracle in (consensus_closed_form, swapped_closed_form):
        for p in (0.3, 0.7, 1.0):
            for i, lo in enumerate(grid):
                for hi in grid[i:]:
                    inner = oracle(20, 0.1, p, lo, hi)
                    for wider_lo in grid[:i + 1]:
                        outer = oracle(20, 0.1, p, wider_lo, hi)
                        if outer is None:
                            continue
                        assert inner is not None
                        assert outer.h2_bound >= inner.h2_bound * (1 - 1e-12)


def test_no_certificate_beyond_the_stability_limit():
    # with p = 1 the consensus factor 1 - kappa * lambda leaves the unit disc past lambda = 20
    assert consensus_closed_form(20, 0.1, 1.0, 2.68, 25.0) is None
    mas = SwitchedMas.from_bounds(20, 2.68, 25.0, 1.0, consensus_example(0.1))
    with pytest.raises(NoCertificate, match="sufficient only"):
        solve_h2_bound(mas, deflated=True)


def test_full_analysis_needs_stable_agents():
    mas = SwitchedMas.from_bounds(20, *BOUNDS, 0.5, consensus_example(0.1))
    with pytest.raises(SpectralRadiusError, match="disagreement"):
        solve_h2_bound(mas, deflated=False)


def test_problem_layout():
    mas = SwitchedMas.from_bounds(5, 1.0, 3.0, 0.5, _stable_blocks())
    full = build_agent_level_problem(mas)
    assert list(full.variables) == ["Q", "Z1", "Z2"]
    assert [op.label for op in full.constraints] == [
        "gramian@1", "trace@1", "gramian@3", "trace@3", "gramian@0", "trace@0", "Q positive",
    ]
    deflated = build_agent_level_problem(mas, deflated=True)
    assert list(deflated.variables) == ["Q", "Z1"]
    assert len(deflated.constraints) == 5


def test_reduced_matrices_at_zero_are_decoupled():
    blocks = _stable_blocks()
    red = reduced_matrices(blocks, 0.0, 0.5)
    np.testing.assert_array_equal(red.a, blocks.block("A", "d"))
    assert red.p_bar == 0.0
    red = reduced_matrices(blocks, 2.0, 0.5)
    assert red.a[0, 0] == pytest.approx(0.5 - 2.0 * 0.5 * 0.1)
    assert red.p_bar == pytest.approx(1.0)


def test_full_certificate_with_feedthrough():
    mas = SwitchedMas.from_bounds(5, 1.0, 3.0, 0.5, _stable_blocks())
    cert = solve_h2_bound(mas)
    assert cert.Z2 is not None
    assert cert.beta > 0
    assert cert.h2_bound ** 2 == pytest.approx(cert.beta ** 2 + 4 * cert.gamma ** 2)
    assert all(value < 0 for value in cert.residuals.values())


def test_shrunken_certificate_fails_the_trace_condition():
    mas = SwitchedMas.from_bounds(20, *BOUNDS, 0.5, consensus_example(0.1))
    cert = solve_h2_bound(mas, deflated=True)
    residuals = certificate_residuals(mas, cert.Q, cert.Z1 / 4, None, deflated=True)
    assert residuals["trace@18.24"] > 0
    assert residuals["gramian@18.24"] < 0


def test_lifted_certificate_holds_for_every_topology():
    family = _four_agent_family()
    for p in (0.3, 0.8):
        for blocks, deflated in ((consensus_example(0.1), True), (_stable_blocks(), False)):
            mas = SwitchedMas.from_family(family, p, blocks)
            cert = solve_h2_bound(mas, deflated=deflated)
            report = verify_certificate_lifting(mas, cert)
            assert report.passed, report.failures()
            assert len(report.residuals) == len(family)


def test_lift_shapes():
    mas = SwitchedMas.from_bounds(4, 2.0, 4.0, 0.5, _stable_blocks())
    cert = solve_h2_bound(mas)
    q_lift, z_lift = lift_certificate(cert, 4)
    assert q_lift.shape == (4, 4)
    # trace of the lifted Z is beta-part plus (N - 1) gamma-parts
    assert np.trace(z_lift) == pytest.approx(np.trace(cert.Z2) + 3 * np.trace(cert.Z1))


def test_mode_enumerated_bound_is_at_most_the_lifted_one():
    mas = SwitchedMas.from_family(_four_agent_family(), 0.5, consensus_example(0.1))
    cert = solve_h2_bound(mas, deflated=True)
    report = verify_certificate_lifting(mas, cert)
    exact = solve_mode_enumerated(mas, project=True)
    assert exact.trace_z <= report.trace_lifted * (1 + 1e-6)
    assert exact.h2_bound <= cert.h2_bound * (1 + 1e-6)


def test_format_certificate():
    mas = SwitchedMas.from_bounds(20, *BOUNDS, 0.5, consensus_example(0.1))
    text = format_certificate(solve_h2_bound(mas, deflated=True))
    assert "mode: deflated" in text
    assert "h2_bound: 83.7" in text
    assert "Z2" not in text
    assert "gramian@2.68" in text


def main():
    """Run all tests as a script."""
    print("📏 Testing H2 certificates")
    print("=" * 50)

    tests = [(name, func) for name, func in globals().items() if name.startswith("test_")]
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
