"""
Monte-Carlo estimation of the H2 norm of the switched system under sampled packet loss.

For a switching sequence nu the squared norm is the sum over input channels of the expected
output energy after a unit impulse at k = 0 on that channel. Every (channel, draw) pair owns a
random stream spawned from the configured seed, so estimates do not depend on batching order.
"""

import csv
import logging
import math
from dataclasses import dataclass
from typing import Literal, TextIO

import numpy as np
from pydantic import BaseModel, Field

from decomposable_model import SwitchedMas
from graphs import incidence_matrix, union_edge_set

logger = logging.getLogger(__name__)

TAIL_SHARE = 0.1
MASK_CHUNK = 128


class SwitchingSequence(BaseModel):
    """Deterministic topology schedule nu."""
    kind: Literal["constant", "sequential", "random"]
    topology: int = Field(default=0, ge=0, description="Topology index for constant sequences")
    period: int = Field(default=1, ge=1, description="Steps spent on each topology when sequential")
    seed: int = Field(default=0, description="Seed of i.i.d. uniform random switching")

    @classmethod
    def constant(cls, topology: int) -> "SwitchingSequence":
        return cls(kind="constant", topology=topology)

    @classmethod
    def sequential(cls, period: int = 1) -> "SwitchingSequence":
        return cls(kind="sequential", period=period)

    @classmethod
    def random(cls, seed: int) -> "SwitchingSequence":
        return cls(kind="random", seed=seed)

    @property
    def label(self) -> str:
        if self.kind == "constant":
            return f"constant-{self.topology}"
        if self.kind == "sequential":
            return f"sequential-{self.period}"
        return f"random-{self.seed}"


class McConfig(BaseModel):
    n_samples: int = Field(default=10, ge=1, description="Loss-sequence draws per input channel")
    horizon: int = Field(default=2000, ge=1)
    tail_tolerance: float = Field(default=1e-6, gt=0, description="Allowed energy share of the last 10% of the horizon")
    seed: int = 0
    project_disagreement: bool = True
    batch_size: int = Field(default=256, ge=1)


@dataclass(frozen=True)
class ImpulseEnergy:
    energy: float
    tail_fraction: float
    truncated: bool


@dataclass(frozen=True)
class McEstimate:
    sequence: str
    mean: float
    stderr: float
    truncated_energy_flag: bool
    per_channel: list[float]
    energies: np.ndarray  # (channels, draws)

    @property
    def h2(self) -> float:
        return math.sqrt(self.mean)


def switching_schedule(seq: SwitchingSequence, n_topologies: int, horizon: int) -> np.ndarray:
    """Topology index for k = 0 .. horizon - 1."""
    if n_topologies < 1:
        raise ValueError("Need at least one topology")
    k = np.arange(horizon)
    if seq.kind == "constant":
        if seq.topology >= n_topologies:
            raise ValueError(f"Topology {seq.topology} outside 0..{n_topologies - 1}")
        return np.full(horizon, seq.topology, dtype=int)
    if seq.kind == "sequential":
        return (k // seq.period) % n_topologies
    return np.random.default_rng(seq.seed).integers(0, n_topologies, size=horizon)


class _Simulator:
    """Batched impulse responses; arrays are laid out (agents, per-agent dimension, batch).

    With projection on, states and outputs are kept centred over the agents, which is the
    disagreement-space trajectory written in agent coordinates.
    """

    def __init__(self, mas: SwitchedMas, project: bool):
        family = mas.require_family()
        if project and mas.n_agents < 2:
            raise ValueError("Disagreement projection needs at least two agents")
        self.blocks = mas.blocks
        self.p = mas.p
        self.n_agents = mas.n_agents
        self.project = project
        edges = union_edge_set(family).sorted_edges()
        self.n_edges = len(edges)
        self.inc = incidence_matrix(edges, mas.n_agents)
        self.membership = np.array(
            [[e in g.edges for e in edges] for g in family.graphs], dtype=float
        ).reshape(len(family), self.n_edges)

    @property
    def n_channels(self) -> int:
        return self.n_agents * self.blocks.n_w

    def _couplings(self, x, mask, j):
        """(lossy Laplacian @ x, deterministic Laplacian @ x) via the incidence matrix."""
        shape = x.shape
        diff = (self.inc @ x.reshape(shape[0], -1)).reshape(self.n_edges, *shape[1:])
        lossy = self.inc.T @ (diff * mask[:, None, :]).reshape(self.n_edges, -1)
        coupled = self.inc.T @ (diff * self.membership[j][:, None, None]).reshape(self.n_edges, -1)
        return lossy.reshape(shape), coupled.reshape(shape)

    def _combine(self, letter, x, lossy, coupled):
        m_d, m_c, m_p = self.blocks.triple(letter)
        out = (np.einsum("ij,ajb->aib", m_d, x)
               + np.einsum("ij,ajb->aib", m_c, lossy)
               + np.einsum("ij,ajb->aib", m_p, coupled))
        if self.project:
            out -= out.mean(axis=0, keepdims=True)
        return out

    def run(self, channels: np.ndarray, rngs: list, schedule: np.ndarray):
        """Energies and tail energies of impulse responses on the given 0-based channels."""
        batch = len(channels)
        horizon = len(schedule)
        tail_start = horizon - max(1, math.ceil(TAIL_SHARE * horizon))
        x = np.zeros((self.n_agents, self.blocks.n_w, batch))
        x[channels // self.blocks.n_w, channels % self.blocks.n_w, np.arange(batch)] = 1.0

        energy = np.zeros(batch)
        tail = np.zeros(batch)
        masks = np.empty((MASK_CHUNK, self.n_edges, batch))
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(horizon):
                offset = k % MASK_CHUNK
                if offset == 0:
                    for b, rng in enumerate(rngs):
                        masks[:, :, b] = rng.random((MASK_CHUNK, self.n_edges)) < self.p
                j = schedule[k]
                mask = masks[offset] * self.membership[j][:, None]
                lossy, coupled = self._couplings(x, mask, j)
                # the impulse enters at k = 0 through B and D; afterwards the state drives C and A
                out_letter, state_letter = ("D", "B") if k == 0 else ("C", "A")
                z = self._combine(out_letter, x, lossy, coupled)
                x = self._combine(state_letter, x, lossy, coupled)
                step = np.sum(z * z, axis=(0, 1))
                energy += step
                if k >= tail_start:
                    tail += step
        return energy, tail


def _tail_fraction(energy: float, tail: float) -> float:
    if not (math.isfinite(energy) and math.isfinite(tail)):
        return math.inf
    return tail / energy if energy > 0 else 0.0


def impulse_energy(
    mas: SwitchedMas,
    nu: SwitchingSequence,
    s: int,
    cfg: McConfig,
    rng: np.random.Generator,
) -> ImpulseEnergy:
    """Output energy of one loss realization after a unit impulse on channel s (1-based)."""
    sim = _Simulator(mas, cfg.project_disagreement)
    if not 1 <= s <= sim.n_channels:
        raise ValueError(f"Channel {s} outside 1..{sim.n_channels}")
    schedule = switching_schedule(nu, len(mas.require_family()), cfg.horizon)
    energy, tail = sim.run(np.array([s - 1]), [rng], schedule)
    fraction = _tail_fraction(float(energy[0]), float(tail[0]))
    return ImpulseEnergy(float(energy[0]), fraction, fraction > cfg.tail_tolerance)


def _shifted_variance(values: np.ndarray) -> float:
    """Sample variance around the first value; exactly 0 for identical samples."""
    shifted = values - values[0]
    n = len(values)
    var = (float(np.sum(shifted * shifted)) - float(np.sum(shifted)) ** 2 / n) / (n - 1)
    return max(var, 0.0)


def estimate_h2(mas: SwitchedMas, nu: SwitchingSequence, cfg: McConfig) -> McEstimate:
    """Squared H2 norm for one switching sequence, averaged over cfg.n_samples draws per channel."""
    sim = _Simulator(mas, cfg.project_disagreement)
    schedule = switching_schedule(nu, len(mas.require_family()), cfg.horizon)
    n_channels, n_samples = sim.n_channels, cfg.n_samples
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_channels * n_samples)

    energies = np.empty(n_channels * n_samples)
    tails = np.empty(n_channels * n_samples)
    pairs = np.arange(n_channels * n_samples)
    for start in range(0, len(pairs), cfg.batch_size):
        chunk = pairs[start:start + cfg.batch_size]
        rngs = [np.random.default_rng(seeds[i]) for i in chunk]
        energies[chunk], tails[chunk] = sim.run(chunk // n_samples, rngs, schedule)

    flagged = [
        _tail_fraction(e, t) > cfg.tail_tolerance for e, t in zip(energies, tails)
    ]
    energies = energies.reshape(n_channels, n_samples)
    per_channel = [float(np.mean(row)) for row in energies]
    mean = sum(per_channel)
    if n_samples > 1:
        stderr = math.sqrt(sum(_shifted_variance(row) for row in energies) / n_samples)
    else:
        logger.warning("A single draw per channel gives no standard error; reporting 0")
        stderr = 0.0
    if not math.isfinite(mean):
        stderr = math.inf

    truncated = any(flagged)
    if truncated:
        logger.warning(
            f"{nu.label}: {sum(flagged)} of {len(flagged)} responses keep more than "
            f"{cfg.tail_tolerance:g} of their energy in the last {TAIL_SHARE:.0%} of "
            f"{cfg.horizon} steps"
        )
    logger.debug(f"{nu.label}: h2^2 = {mean:.6g} +- {stderr:.3g}")
    return McEstimate(nu.label, mean, stderr, truncated, per_channel, energies)


def worst_case_sweep(
    mas: SwitchedMas, sequences: list[SwitchingSequence], cfg: McConfig
) -> tuple[list[McEstimate], McEstimate]:
    """Estimates for every candidate sequence and the largest one (a lower bound on the sup)."""
    if not sequences:
        raise ValueError("Need at least one switching sequence")
    estimates = [estimate_h2(mas, nu, cfg) for nu in sequences]
    return estimates, max(estimates, key=lambda e: e.mean)


def default_sequences(n_topologies: int, random_seeds=(1, 2), period: int = 1) -> list[SwitchingSequence]:
    """Constant schedule per topology, one round-robin schedule and seeded random ones."""
    sequences = [SwitchingSequence.constant(j) for j in range(n_topologies)]
    sequences.append(SwitchingSequence.sequential(period))
    sequences.extend(SwitchingSequence.random(seed) for seed in random_seeds)
    return sequences


def write_samples_csv(rows: list[tuple[float, McEstimate]], handle: TextIO, header: bool = True) -> None:
    """Raw energies: (p, sequence_id, channel, draw, energy) with 1-based channel and draw."""
    writer = csv.writer(handle, lineterminator="\n")
    if header:
        writer.writerow(["p", "sequence_id", "channel", "draw", "energy"])
    for p, est in rows:
        for channel, draws in enumerate(est.energies, start=1):
            for draw, energy in enumerate(draws, start=1):
                writer.writerow([repr(p), est.sequence, channel, draw, repr(float(energy))])


def write_summary_csv(rows: list[tuple[float, McEstimate]], handle: TextIO, header: bool = True) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    if header:
        writer.writerow(["p", "sequence_id", "h2sq_mean", "stderr"])
    for p, est in rows:
        writer.writerow([repr(p), est.sequence, repr(est.mean), repr(est.stderr)])
