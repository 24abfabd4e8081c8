"""
Small dense semidefinite programming engine.

Problems have the form

    minimize    c^T x
    subject to  F_l(x) = F_l0 + sum_k x_k F_lk  negative definite,  l = 1..m

where x stacks the upper triangles of symmetric matrix variables. Strict inequalities are
enforced as F_l(x) <= -eps_l I with eps_l = strictness * (1 + ||F_l0||_F).

Phase I finds a strictly feasible point by minimizing t subject to F_l(x) <= t I (with
t >= -1 and ||x|| <= radius). Phase II follows the log-det barrier central path
c^T x / mu - sum_l log det(-F_l(x)) with damped Newton steps while mu shrinks geometrically.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional

import numpy as np
import scipy.linalg
from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

PHASE1_EXIT = -0.5
PHASE1_FLOOR = -1.0
MIN_STEP = 1e-14


class SolverOptions(BaseModel):
    """Tolerances and limits of the barrier method."""
    max_iterations: int = Field(default=500, ge=1, description="Newton steps over both phases")
    feasibility_margin: float = Field(default=1e-9, gt=0)
    gap_tolerance: float = Field(default=1e-8, gt=0, description="Relative duality-gap proxy")
    mu_initial: float = Field(default=1.0, gt=0)
    mu_factor: float = Field(default=0.2, gt=0, lt=1)
    backtrack_factor: float = Field(default=0.5, gt=0, lt=1)
    armijo_slope: float = Field(default=0.25, gt=0, lt=0.5)
    newton_tolerance: float = Field(default=1e-10, gt=0)
    strictness: float = Field(default=1e-9, ge=0)
    phase1_radius: float = Field(default=1e8, gt=0)
    record_trace: bool = False


class SdpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_ERROR = "numerical_error"


# --- PROBLEM DESCRIPTION ---

@dataclass(frozen=True)
class SymmetricVariable:
    name: str
    size: int
    offset: int

    @property
    def n_coordinates(self) -> int:
        return self.size * (self.size + 1) // 2

    def pairs(self) -> list[tuple[int, int]]:
        return [(a, b) for a in range(self.size) for b in range(a, self.size)]

    def basis(self) -> list[np.ndarray]:
        """E_ab = e_a e_b^T + e_b e_a^T (a < b) and e_a e_a^T on the diagonal."""
        mats = []
        for a, b in self.pairs():
            e = np.zeros((self.size, self.size))
            e[a, b] = 1.0
            e[b, a] = 1.0
            mats.append(e)
        return mats

    def diagonal_indices(self) -> list[int]:
        return [self.offset + k for k, (a, b) in enumerate(self.pairs()) if a == b]

    def matrix(self, x: np.ndarray) -> np.ndarray:
        m = np.zeros((self.size, self.size))
        for k, (a, b) in enumerate(self.pairs()):
            m[a, b] = m[b, a] = x[self.offset + k]
        return m

    def term(self, transform: Callable[[np.ndarray], np.ndarray]) -> list[tuple[int, np.ndarray]]:
        """Coefficients of the linear map V -> transform(V) on this variable's basis."""
        return [(self.offset + k, transform(e)) for k, e in enumerate(self.basis())]


@dataclass
class AffineMatrixOperator:
    """F(x) = constant + sum of x[index] * coefficient."""
    constant: np.ndarray
    coeffs: list[tuple[int, np.ndarray]]
    label: str = ""

    def __post_init__(self):
        self.constant = np.atleast_2d(np.asarray(self.constant, dtype=float))
        dim = self.constant.shape[0]
        if self.constant.shape != (dim, dim):
            raise ValueError(f"Constraint {self.label!r}: constant must be square")
        merged: dict[int, np.ndarray] = {}
        for index, coeff in self.coeffs:
            coeff = np.atleast_2d(np.asarray(coeff, dtype=float))
            if coeff.shape != (dim, dim):
                raise ValueError(
                    f"Constraint {self.label!r}: coefficient shape {coeff.shape} != {(dim, dim)}"
                )
            merged[index] = merged[index] + coeff if index in merged else coeff
        self.coeffs = sorted(merged.items())
        for m in [self.constant] + [c for _, c in self.coeffs]:
            if not np.allclose(m, m.T, rtol=0, atol=1e-10 * (1 + np.abs(m).max())):
                raise ValueError(f"Constraint {self.label!r} is not symmetric")

    @classmethod
    def from_terms(cls, constant, *terms: Iterable[tuple[int, np.ndarray]], label: str = ""):
        return cls(constant, [t for group in terms for t in group], label)

    @property
    def dim(self) -> int:
        return self.constant.shape[0]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        value = self.constant.copy()
        for index, coeff in self.coeffs:
            value += x[index] * coeff
        return value


class SdpProblem:
    """Declared symmetric variables, negative-definite constraints and a linear objective."""

    def __init__(self):
        self.variables: dict[str, SymmetricVariable] = {}
        self.constraints: list[AffineMatrixOperator] = []
        self.n = 0
        self._objective: dict[int, float] = {}

    def add_variable(self, name: str, size: int) -> SymmetricVariable:
        if name in self.variables:
            raise ValueError(f"Variable {name!r} already declared")
        if size < 1:
            raise ValueError(f"Variable {name!r} needs a positive size")
        var = SymmetricVariable(name, size, self.n)
        self.variables[name] = var
        self.n += var.n_coordinates
        return var

    def add_constraint(self, op: AffineMatrixOperator) -> None:
        for index, _ in op.coeffs:
            if not 0 <= index < self.n:
                raise ValueError(f"Constraint {op.label!r} references undeclared index {index}")
        self.constraints.append(op)

    def add_trace_objective(self, var: SymmetricVariable, weight: float = 1.0) -> None:
        for index in var.diagonal_indices():
            self._objective[index] = self._objective.get(index, 0.0) + weight

    @property
    def objective(self) -> np.ndarray:
        c = np.zeros(self.n)
        for index, weight in self._objective.items():
            c[index] = weight
        return c

    def value(self, var: SymmetricVariable, x: np.ndarray) -> np.ndarray:
        return var.matrix(x)


@dataclass
class IterateRecord:
    iteration: int
    phase: int
    mu: float
    objective: float
    max_eigenvalue: float


@dataclass
class SdpSolution:
    x: np.ndarray
    objective_value: float
    status: SdpStatus
    margin: float
    epsilon: float
    iterations: int
    trace: list[IterateRecord] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == SdpStatus.OPTIMAL


# --- LINEAR ALGEBRA HELPERS ---

def eig_sym(m: np.ndarray, tolerance: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric matrix."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {m.shape}")
    if not np.all(np.abs(m - m.T) <= tolerance):
        raise ValueError("Matrix is not symmetric within tolerance")
    return scipy.linalg.eigh(m)


def max_eigenvalue(m: np.ndarray) -> float:
    return float(scipy.linalg.eigvalsh(0.5 * (m + m.T))[-1])


class _Barrier:
    """-sum log det(-F_l(x)) over compiled constraints, with gradient and Hessian."""

    def __init__(self, constants, index_sets, coefficient_stacks, n):
        self.constants = constants
        self.index_sets = index_sets
        self.stacks = coefficient_stacks
        self.n = n
        self.degree = sum(c.shape[0] for c in constants)

    def values(self, x):
        for constant, idx, stack in zip(self.constants, self.index_sets, self.stacks):
            if len(idx):
                yield constant + np.tensordot(x[idx], stack, axes=1)
            else:
                yield constant

    def value(self, x) -> float:
        """Barrier value, +inf outside the strict feasible region."""
        total = 0.0
        for f in self.values(x):
            try:
                chol = np.linalg.cholesky(-f)
            except np.linalg.LinAlgError:
                return math.inf
            total -= 2.0 * np.log(np.diag(chol)).sum()
        return total

    def derivatives(self, x) -> tuple[np.ndarray, np.ndarray]:
        grad = np.zeros(self.n)
        hess = np.zeros((self.n, self.n))
        for f, idx, stack in zip(self.values(x), self.index_sets, self.stacks):
            if not len(idx):
                continue
            chol = np.linalg.cholesky(-f)
            inv = scipy.linalg.solve_triangular(chol, np.eye(f.shape[0]), lower=True)
            scaled = inv @ stack @ inv.T
            flat = scaled.reshape(len(idx), -1)
            grad[idx] += np.trace(scaled, axis1=1, axis2=2)
            hess[np.ix_(idx, idx)] += flat @ flat.T
        return grad, hess

    def max_eigenvalue(self, x) -> float:
        return max(max_eigenvalue(f) for f in self.values(x))


def _compile(constraints: list[AffineMatrixOperator], n: int, shifts: list[float]):
    constants, index_sets, stacks = [], [], []
    for op, shift in zip(constraints, shifts):
        constants.append(op.constant + shift * np.eye(op.dim))
        index_sets.append(np.array([i for i, _ in op.coeffs], dtype=int))
        if op.coeffs:
            stacks.append(np.stack([c for _, c in op.coeffs]))
        else:
            stacks.append(np.zeros((0, op.dim, op.dim)))
    return _Barrier(constants, index_sets, stacks, n)


# --- SOLVER ---

class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0

    def spend(self) -> bool:
        self.used += 1
        return self.used <= self.limit


class _NumericalBreakdown(RuntimeError):
    pass


def _center(barrier: _Barrier, c: np.ndarray, x: np.ndarray, mu: float,
            opts: SolverOptions, budget: _Budget) -> tuple[np.ndarray, bool]:
    """Damped Newton minimization of c.x / mu + barrier(x). Returns (x, within budget)."""
    phi = barrier.value(x)
    while True:
        grad_b, hess = barrier.derivatives(x)
        grad = c / mu + grad_b
        if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
            raise _NumericalBreakdown("Non-finite barrier derivatives")
        try:
            step = scipy.linalg.solve(hess, -grad, assume_a="pos")
        except (np.linalg.LinAlgError, ValueError):
            step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        slope = float(grad @ step)
        if not np.isfinite(slope):
            raise _NumericalBreakdown("Non-finite Newton step")
        if -slope / 2.0 <= opts.newton_tolerance:
            return x, True
        if not budget.spend():
            return x, False

        s = 1.0
        while s > MIN_STEP:
            candidate = x + s * step
            phi_new = barrier.value(candidate)
            change = s * float(c @ step) / mu + (phi_new - phi)
            if np.isfinite(phi_new) and change <= opts.armijo_slope * s * slope:
                break
            s *= opts.backtrack_factor
        else:
            # Newton direction no longer decreases within floating point resolution
            return x, True
        x, phi = candidate, phi_new


def _phase_one(constraints, n, shifts, opts, budget, trace):
    """Strictly feasible x for the shifted constraints, or None if none exists."""
    x0 = np.zeros(n)
    start = _compile(constraints, n, shifts)
    worst = start.max_eigenvalue(x0) if constraints else -1.0
    if worst < 0:
        return x0, worst

    # Augmented variables (x, t): F_l(x) - t I < 0, -1 - t < 0, ||x|| <= radius
    t_index = n
    augmented = []
    for op in constraints:
        augmented.append(AffineMatrixOperator(
            op.constant, list(op.coeffs) + [(t_index, -np.eye(op.dim))], op.label))
    augmented.append(AffineMatrixOperator(np.array([[PHASE1_FLOOR]]), [(t_index, -np.eye(1))], "floor"))
    radius = opts.phase1_radius
    ball_coeffs = []
    for k in range(n):
        e = np.zeros((n + 1, n + 1))
        e[k, n] = e[n, k] = -1.0
        ball_coeffs.append((k, e))
    augmented.append(AffineMatrixOperator(-radius * np.eye(n + 1), ball_coeffs, "radius"))

    barrier = _compile(augmented, n + 1, list(shifts) + [0.0, 0.0])
    c = np.zeros(n + 1)
    c[t_index] = 1.0
    z = np.append(x0, worst + 1.0)
    mu = opts.mu_initial
    while True:
        z, within = _center(barrier, c, z, mu, opts, budget)
        actual = start.max_eigenvalue(z[:n])
        if opts.record_trace:
            trace.append(IterateRecord(budget.used, 1, mu, float(z[t_index]), actual))
        logger.debug(f"phase I: mu={mu:.3e} t={z[t_index]:.6e} max eig={actual:.6e}")
        if actual <= PHASE1_EXIT:
            return z[:n], actual
        if not within:
            return None, actual
        if barrier.degree * mu <= opts.gap_tolerance:
            return (z[:n], actual) if actual < -opts.feasibility_margin else (None, actual)
        mu *= opts.mu_factor


def solve(problem: SdpProblem, opts: Optional[SolverOptions] = None) -> SdpSolution:
    """Minimize the objective subject to every constraint being negative definite."""
    opts = opts or SolverOptions()
    n = problem.n
    constraints = problem.constraints
    shifts = [opts.strictness * (1.0 + float(np.linalg.norm(op.constant))) for op in constraints]
    epsilon = max(shifts, default=0.0)
    c = problem.objective
    budget = _Budget(opts.max_iterations)
    trace: list[IterateRecord] = []
    original = _compile(constraints, n, [0.0] * len(constraints))

    def finish(x, status):
        x = np.zeros(n) if x is None else x
        margin = original.max_eigenvalue(x) if constraints else -math.inf
        if status == SdpStatus.OPTIMAL and not margin < 0:
            status = SdpStatus.NUMERICAL_ERROR
        return SdpSolution(x, float(c @ x), status, margin, epsilon, budget.used, trace)

    try:
        x, worst = _phase_one(constraints, n, shifts, opts, budget, trace)
        if x is None:
            status = SdpStatus.MAX_ITERATIONS if budget.used > budget.limit else SdpStatus.INFEASIBLE
            logger.debug(f"phase I ended without a strict point (max eig {worst:.3e}): {status.value}")
            return finish(None, status)
        if not np.any(c):
            return finish(x, SdpStatus.OPTIMAL)

        barrier = _compile(constraints, n, shifts)
        mu = opts.mu_initial
        while True:
            x, within = _center(barrier, c, x, mu, opts, budget)
            objective = float(c @ x)
            if opts.record_trace:
                trace.append(IterateRecord(budget.used, 2, mu, objective, original.max_eigenvalue(x)))
            logger.debug(f"phase II: mu={mu:.3e} objective={objective:.10g}")
            if not within:
                return finish(x, SdpStatus.MAX_ITERATIONS)
            if barrier.degree * mu <= opts.gap_tolerance * max(1.0, abs(objective)):
                return finish(x, SdpStatus.OPTIMAL)
            mu *= opts.mu_factor
    except (_NumericalBreakdown, FloatingPointError) as e:
        logger.warning(f"SDP solve broke down: {e}")
        return finish(None, SdpStatus.NUMERICAL_ERROR)


def write_trace_csv(solution: SdpSolution, path: str) -> None:
    """Dump recorded iterates (solve with record_trace=True)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "phase", "mu", "objective", "max_eigenvalue"])
        for r in solution.trace:
            writer.writerow([r.iteration, r.phase, repr(r.mu), repr(r.objective), repr(r.max_eigenvalue)])
