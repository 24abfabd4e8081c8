#!/usr/bin/env python3
"""
Test script for the decomposable multi-agent model.

Run with: pytest test_decomposable_model.py  (or python test_decomposable_model.py)
"""

import logging
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from decomposable_model import (
    DecomposableMatrices,
    EnumerationCapError,
    SwitchedMas,
    assemble_mode,
    consensus_example,
    disagreement_projection,
    mode_distribution,
    project_modes,
)
from graphs import Graph, GraphError, GraphFamily, circulant_graph, laplacian, spectrum


def _complete(n: int) -> Graph:
    return Graph.from_edges(n, ((i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)))


def _ring_family() -> GraphFamily:
    return GraphFamily((circulant_graph(4, 1), _complete(4)), 2.0, 4.0)


def test_missing_blocks_are_zero():
    blocks = DecomposableMatrices(2, 1, 1, {"A_d": np.eye(2)})
    assert blocks.block("A", "c").shape == (2, 2)
    assert not np.any(blocks.block("B", "p"))
    assert blocks.block("D", "d").shape == (1, 1)


def test_block_shapes_and_names_are_checked():
    with pytest.raises(ValueError):
        DecomposableMatrices(2, 1, 1, {"B_d": np.eye(2)})
    with pytest.raises(ValueError):
        DecomposableMatrices(1, 1, 1, {"E_d": 1.0})
    with pytest.raises(ValueError):
        DecomposableMatrices(0, 1, 1, {})


def test_consensus_example_blocks():
    plain = consensus_example(0.1)
    assert plain.block("A", "c")[0, 0] == -0.1
    assert plain.block("B", "d")[0, 0] == 1.0
    assert plain.block("C", "p")[0, 0] == 1.0
    swapped = consensus_example(0.1, swapped=True)
    assert swapped.block("B", "p")[0, 0] == 1.0
    assert swapped.block("C", "d")[0, 0] == 1.0
    assert not np.any(swapped.block("B", "d"))
    with pytest.raises(ValueError):
        consensus_example(0.0)


def test_assemble_mode_for_consensus():
    g = circulant_graph(5, 1)
    lap = laplacian(g)
    half = 0.5 * lap
    a, b, c, d = assemble_mode(consensus_example(0.2), half, lap)
    np.testing.assert_allclose(a, np.eye(5) - 0.2 * half)
    np.testing.assert_allclose(b, np.eye(5))
    np.testing.assert_allclose(c, lap)
    np.testing.assert_allclose(d, np.zeros((5, 5)))
    with pytest.raises(ValueError):
        assemble_mode(consensus_example(0.2), np.eye(3), lap)


def test_mode_distribution_sums_to_one():
    mas = SwitchedMas.from_family(_ring_family(), 0.3, consensus_example(0.1))
    for j, graph in enumerate(mas.family.graphs):
        dist = mode_distribution(mas, j)
        assert len(dist.modes) == 2 ** len(graph.edges)
        assert dist.total_probability() == pytest.approx(1.0)
        assert len({m.index for m in dist.modes}) == len(dist.modes)


def test_mode_distribution_at_full_delivery():
    mas = SwitchedMas.from_family(_ring_family(), 1.0, consensus_example(0.1))
    dist = mode_distribution(mas, 1)
    assert len(dist.modes) == 1
    # K4 covers the whole union edge set, so every bit of sigma is set
    assert dist.modes[0].index == 2 ** 6
    np.testing.assert_array_equal(dist.modes[0].lossy_laplacian, laplacian(_complete(4)))


def test_enumeration_cap():
    family = GraphFamily((_complete(6),), 6.0, 6.0)
    mas = SwitchedMas.from_family(family, 0.5, consensus_example(0.1))
    with pytest.raises(EnumerationCapError, match="solve_h2_bound"):
        mode_distribution(mas, 0, cap=10)


def test_strict_family_rejects_loose_bounds(caplog):
    family = GraphFamily((circulant_graph(4, 1), _complete(4)), 2.5, 4.0)
    with pytest.raises(GraphError, match="tightest valid bounds"):
        SwitchedMas.from_family(family, 0.5, consensus_example(0.1))
    with caplog.at_level(logging.WARNING):
        mas = SwitchedMas.from_family(family, 0.5, consensus_example(0.1), strict=False)
    assert mas.lambda_lo == 2.5
    assert "tightest valid bounds" in caplog.text
    report = mas.assumption_report()
    assert not report.passed


def test_instance_validation():
    with pytest.raises(ValueError):
        SwitchedMas.from_bounds(4, 1.0, 2.0, 1.2, consensus_example(0.1))
    with pytest.raises(ValueError):
        SwitchedMas.from_bounds(4, 3.0, 2.0, 0.5, consensus_example(0.1))
    mas = SwitchedMas.from_bounds(4, 1.0, 2.0, 0.5, consensus_example(0.1))
    assert mas.assumption_report() is None
    with pytest.raises(ValueError):
        mas.require_family()


def test_disagreement_projection_is_orthonormal():
    u = disagreement_projection(6)
    assert u.shape == (6, 5)
    np.testing.assert_allclose(u.T @ u, np.eye(5), atol=1e-12)
    np.testing.assert_allclose(u.T @ np.ones(6), np.zeros(5), atol=1e-12)
    with pytest.raises(ValueError):
        disagreement_projection(1)


def test_projected_consensus_drops_the_unit_mode():
    """Without loss the projected A has eigenvalues 1 - kappa * lambda_i over nonzero lambda_i."""
    kappa = 0.1
    g = circulant_graph(6, 2)
    lap = laplacian(g)
    blocks = consensus_example(kappa)
    a, b, c, d = project_modes(assemble_mode(blocks, lap, lap), 6, blocks)
    assert a.shape == (5, 5)
    expected = 1 - kappa * spectrum(lap)[1:]
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(a)), np.sort(expected), atol=1e-12)
    np.testing.assert_allclose(b, np.eye(5), atol=1e-12)


def test_mode_distribution_of_a_lossy_cycle():
    cycle = circulant_graph(4, 1)
    mas = SwitchedMas.from_family(GraphFamily((cycle,), 2.0, 4.0), 0.5, consensus_example(0.1))
    dist = mode_distribution(mas, 0)
    assert len(dist.modes) == 16
    assert all(m.probability == pytest.approx(1 / 16) for m in dist.modes)
    assert sorted(m.index for m in dist.modes) == list(range(1, 17))
    mean = sum(m.probability * m.lossy_laplacian for m in dist.modes)
    np.testing.assert_allclose(mean, 0.5 * laplacian(cycle), atol=1e-12)


def test_disagreement_projection_keeps_the_nonzero_spectrum():
    for n in range(2, 101):
        u = disagreement_projection(n)
        np.testing.assert_allclose(np.ones(n) @ u, np.zeros(n - 1), atol=1e-10)
    for n in (3, 7, 20, 50, 100):
        u = disagreement_projection(n)
        lap = laplacian(circulant_graph(n, 1))
        np.testing.assert_allclose(spectrum(u.T @ lap @ u), spectrum(lap)[1:], atol=1e-9)


def main():
    """Run all tests as a script."""
    print("🧩 Testing the decomposable model")
    print("=" * 50)

    tests = [(name, func) for name, func in globals().items()
             if name.startswith("test_") and func is not test_strict_family_rejects_loose_bounds]
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
