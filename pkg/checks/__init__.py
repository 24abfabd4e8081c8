# Oracle suite behind the verify command
from graphs import expected_laplacians

from .report import CheckResult
from .expectations import corrupted_expected_laplacians, expected_laplacian_check
from .closed_form import closed_form_check
from .lifting import lifting_check

# Export every check by name
all_checks = {
    "expected-laplacians": expected_laplacian_check,
    "closed-form": closed_form_check,
    "lifting": lifting_check,
}


def run_checks(seed: int = 0, only=None, corrupt_second_moment: bool = False) -> list[CheckResult]:
    """Run the selected checks in registry order; only the enumeration check is seeded."""
    expected = corrupted_expected_laplacians if corrupt_second_moment else expected_laplacians
    results = []
    for name, check in all_checks.items():
        if only and name not in only:
            continue
        if name == "expected-laplacians":
            results.append(check(seed=seed, expected=expected))
        else:
            results.append(check())
    return results


__all__ = ["CheckResult", "all_checks", "run_checks"]
