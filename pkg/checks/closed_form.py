"""SDP optimum against the scalar closed forms of the consensus example."""

import itertools
import logging

from decomposable_model import SwitchedMas, consensus_example
from lmi_analysis import NoCertificate, consensus_closed_form, solve_h2_bound, swapped_closed_form
from .report import CheckResult

logger = logging.getLogger(__name__)

N_AGENTS = 20
BOUNDS = (2.68, 18.24)
PROBABILITIES = (0.2, 0.4, 0.6, 0.8, 1.0)
GAINS = (0.02, 0.04, 0.06, 0.08)
TOLERANCE = 1e-6


def closed_form_check(
    n_agents: int = N_AGENTS,
    bounds: tuple[float, float] = BOUNDS,
    probabilities=PROBABILITIES,
    gains=GAINS,
) -> CheckResult:
    result = CheckResult("closed-form")
    oracles = {False: consensus_closed_form, True: swapped_closed_form}
    for swapped, p, kappa in itertools.product((False, True), probabilities, gains):
        describe = f"{'swapped' if swapped else 'consensus'} p={p} kappa={kappa}"
        mas = SwitchedMas.from_bounds(n_agents, *bounds, p, consensus_example(kappa, swapped))
        expected = oracles[swapped](n_agents, kappa, p, *bounds)
        try:
            cert = solve_h2_bound(mas, deflated=True)
        except NoCertificate:
            cert = None

        if expected is None or cert is None:
            mismatch = 0.0 if expected is None and cert is None else 1.0
            result.record(mismatch, 0.0, f"{describe} feasibility disagrees")
            continue
        result.record(abs(cert.h2_bound - expected.h2_bound) / expected.h2_bound, TOLERANCE, describe)
    logger.info(f"{result.name}: {result.cases} cases, worst {result.worst:.2e}")
    return result
