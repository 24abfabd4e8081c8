#!/usr/bin/env python3
"""
Test script for the oracle suite behind `cli.py verify`.

Run with: pytest test_checks.py  (or python test_checks.py)
"""

import os
import sys

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from checks import CheckResult, all_checks, run_checks
from checks.expectations import random_graphs


def test_registry_names():
    assert list(all_checks) == ["expected-laplacians", "closed-form", "lifting"]


def test_check_result_records_failures():
    result = CheckResult("demo")
    result.record(1e-14, 1e-12, "small")
    assert result.passed
    result.record(1e-3, 1e-12, "large")
    assert not result.passed
    assert result.cases == 2
    assert result.worst == 1e-3
    assert result.failures[0].startswith("large:")


def test_random_graphs_are_seeded():
    first = random_graphs(10, seed=3)
    assert first == random_graphs(10, seed=3)
    assert all(2 <= g.n_vertices <= 6 for g in first)
    assert all(1 <= len(g.edges) <= 8 for g in first)


def test_all_checks_pass():
    results = run_checks()
    assert [r.name for r in results] == list(all_checks)
    for r in results:
        assert r.passed, r.failures
        assert r.cases > 0


def test_corrupted_second_moment_is_caught():
    results = run_checks(only=["expected-laplacians"], corrupt_second_moment=True)
    assert len(results) == 1
    assert not results[0].passed
    # every sampled graph has an edge, so every case sees the wrong coefficient
    assert len(results[0].failures) == results[0].cases


def main():
    """Run all tests as a script."""
    print("🔬 Testing the verification suite")
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
