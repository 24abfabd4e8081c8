"""Best certified gamma over a grid of admissible spectral intervals."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from decomposable_model import SwitchedMas, consensus_example
from lmi_analysis import NoCertificate, solve_h2_bound

logger = logging.getLogger(__name__)


class ContourConfig(BaseModel):
    n_agents: int = Field(default=20, ge=2)
    kappa: float = Field(default=0.1, gt=0)
    p: float = Field(default=0.5, gt=0, le=1)
    variant: Literal["consensus", "swapped"] = "consensus"
    grid_points: int = Field(default=50, ge=1, description="Samples per axis of (lambda_lo, lambda_hi)")

    def axis(self) -> np.ndarray:
        """Evenly spaced eigenvalue levels in (0, N]."""
        return self.n_agents * np.arange(1, self.grid_points + 1) / self.grid_points


@dataclass(frozen=True)
class ContourCell:
    lambda_lo: float
    lambda_hi: float
    gamma: Optional[float]


def admissible_cells(cfg: ContourConfig) -> list[tuple[float, float]]:
    axis = cfg.axis()
    return [(float(lo), float(hi)) for lo in axis for hi in axis if lo <= hi]


def solve_cell(cfg: ContourConfig, lo: float, hi: float) -> ContourCell:
    blocks = consensus_example(cfg.kappa, swapped=cfg.variant == "swapped")
    mas = SwitchedMas.from_bounds(cfg.n_agents, lo, hi, cfg.p, blocks)
    try:
        cert = solve_h2_bound(mas, deflated=True)
    except NoCertificate as e:
        logger.info(f"cell [{lo:g}, {hi:g}]: {e}")
        return ContourCell(lo, hi, None)
    return ContourCell(lo, hi, cert.gamma)


def run_contour(cfg: ContourConfig, threads: int = 1) -> list[ContourCell]:
    """Cells in grid order (lambda_lo major), independent of the worker count."""
    cells = admissible_cells(cfg)
    logger.debug(f"contour: {len(cells)} cells on {threads} workers")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda cell: solve_cell(cfg, *cell), cells))
