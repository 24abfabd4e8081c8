"""Certified bound versus Monte-Carlo estimates across transmission probabilities."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from decomposable_model import SwitchedMas, consensus_example
from graphs import GraphFamily, circulant_graph
from lmi_analysis import NoCertificate, solve_h2_bound
from montecarlo import McConfig, McEstimate, default_sequences, worst_case_sweep

logger = logging.getLogger(__name__)


def default_p_grid(points: int = 20) -> list[float]:
    return [float(p) for p in np.linspace(1.0 / points, 1.0, points)]


class SpanConfig(BaseModel):
    n_agents: int = Field(default=20, ge=3)
    kappa: float = Field(default=0.1, gt=0)
    lambda_lo: float = Field(default=2.68, gt=0)
    lambda_hi: float = Field(default=18.24, gt=0)
    forward_links: list[int] = Field(default_factory=lambda: list(range(1, 8)), min_length=1)
    p_values: list[float] = Field(default_factory=default_p_grid, min_length=1)
    random_seeds: list[int] = Field(default_factory=lambda: [1, 2])
    period: int = Field(default=1, ge=1)
    mc: McConfig = Field(default_factory=McConfig)

    def family(self) -> GraphFamily:
        graphs = tuple(circulant_graph(self.n_agents, k) for k in self.forward_links)
        return GraphFamily(graphs, self.lambda_lo, self.lambda_hi)


@dataclass(frozen=True)
class SpanPoint:
    p: float
    h2_bound: Optional[float]
    estimates: list[McEstimate]

    @property
    def h2_mc_min(self) -> float:
        return math.sqrt(min(e.mean for e in self.estimates))

    @property
    def h2_mc_max(self) -> float:
        return math.sqrt(max(e.mean for e in self.estimates))


def span_point(cfg: SpanConfig, base: SwitchedMas, p: float) -> SpanPoint:
    mas = replace(base, p=p)
    try:
        h2_bound = solve_h2_bound(mas, deflated=True).h2_bound
    except NoCertificate as e:
        logger.info(f"p={p:g}: {e}")
        h2_bound = None
    sequences = default_sequences(len(base.require_family()), cfg.random_seeds, cfg.period)
    estimates, worst = worst_case_sweep(mas, sequences, cfg.mc)
    logger.debug(f"p={p:g}: bound {h2_bound}, worst sequence {worst.sequence} ({worst.h2:.6g})")
    return SpanPoint(p, h2_bound, estimates)


def run_span(cfg: SpanConfig, threads: int = 1) -> list[SpanPoint]:
    for p in cfg.p_values:
        if not 0 < p <= 1:
            raise ValueError(f"Transmission probabilities must lie in (0, 1], got {p}")
    # the configured bounds are used even when the computed spectra leave them
    base = SwitchedMas.from_family(cfg.family(), cfg.p_values[0], consensus_example(cfg.kappa), strict=False)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda p: span_point(cfg, base, p), cfg.p_values))
