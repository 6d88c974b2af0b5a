"""Annealed forward-Euler integration, rounding and greedy booleanization.

The solver integrates ``dy/dt = -y + softmax(-Phi(y); 1/T)`` to equilibrium at
a decreasing sequence of temperatures ``T_s = gamma**(s-1) * T_1``, rounds the
equilibrium onto the extended discrete set and finally makes the rounding
Boolean by greedy block moves.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .core import (BooleanSolution, ExtendedRounding, MCPPObjective, Partition,
                   residual_norm, rhs)

logger = logging.getLogger(__name__)


# STEP CONTROL =========================================================================

@dataclass(frozen=True)
class StepController:
    """Two-way step-size controller for paired forward-Euler steps.

    The step ``h`` is held fixed over each pair of steps; after the pair the
    extrapolation error ``theta`` moves ``h`` by ``rho`` or ``1/rho``
    whenever ``theta`` leaves ``[Theta/rho**2, Theta*rho**2]``.
    """

    h: float = 1e-2
    theta: float = 1e-5
    rho: float = 1.1
    h_min: float = 1e-6
    h_max: float = 0.5

    def __post_init__(self):
        if not (self.h > 0 and self.theta > 0 and self.rho > 1):
            raise ValueError("need h > 0, theta > 0 and rho > 1")
        if not 0 < self.h_min <= self.h_max < 1:
            raise ValueError("need 0 < h_min <= h_max < 1")


def fe_step(y: np.ndarray, h: float, F: np.ndarray) -> np.ndarray:
    return y + h * F


def error_estimate(y_prev2: np.ndarray, F_prev2: np.ndarray, y_curr: np.ndarray,
                   h: float) -> float:
    """``||y_prev2 + 2h F_prev2 - y_curr||_2`` after two equal steps of size ``h``."""
    return float(np.linalg.norm(y_prev2 + 2.0 * h * F_prev2 - y_curr))


def adjust_step(theta: float, ctrl: StepController) -> StepController:
    r2 = ctrl.rho * ctrl.rho
    h = ctrl.h
    if theta > ctrl.theta * r2:
        h = h / ctrl.rho
    elif theta < ctrl.theta / r2:
        h = h * ctrl.rho
    h = min(max(h, ctrl.h_min), ctrl.h_max)
    return ctrl if h == ctrl.h else replace(ctrl, h=h)


# EQUILIBRIUM SEARCH ===================================================================

@dataclass
class EquilibriumResult:
    y: np.ndarray
    steps: int
    converged: bool
    residual: float
    ctrl: StepController


def integrate_autonomous(F: Callable[[np.ndarray], np.ndarray], y0: np.ndarray,
                         ctrl: StepController, tol_eq: float = 1e-6,
                         max_steps: int = 50_000,
                         step_log: list | None = None) -> EquilibriumResult:
    """Variable-step forward Euler on ``dy/dt = F(y)`` until ``||F||_inf <= tol_eq``.

    ``step_log``, if given, receives ``(step_index, h, theta)`` after every
    step pair.
    """
    y = np.array(y0, dtype=float, copy=True)
    f = F(y)
    res = residual_norm(f)
    steps = 0
    while res > tol_eq and steps < max_steps:
        h = ctrl.h
        y1 = fe_step(y, h, f)
        f1 = F(y1)
        steps += 1
        res = residual_norm(f1)
        if res <= tol_eq or steps >= max_steps:
            y, f = y1, f1
            break
        y2 = fe_step(y1, h, f1)
        f2 = F(y2)
        steps += 1
        theta = error_estimate(y, f, y2, h)
        ctrl = adjust_step(theta, ctrl)
        if step_log is not None:
            step_log.append((steps, h, theta))
        y, f = y2, f2
        res = residual_norm(f)
    return EquilibriumResult(y, steps, res <= tol_eq, res, ctrl)


def integrate_to_equilibrium(y0: np.ndarray, T: float, obj: MCPPObjective,
                             ctrl: StepController, tol_eq: float = 1e-6,
                             max_steps: int = 50_000,
                             step_log: list | None = None) -> EquilibriumResult:
    """Integrate the annealed ODE at fixed temperature ``T`` to equilibrium."""
    return integrate_autonomous(lambda y: rhs(y, T, obj), y0, ctrl, tol_eq,
                                max_steps, step_log)


# ROUNDING =============================================================================

def round_to_extended(y_bar: np.ndarray, partition: Partition) -> ExtendedRounding:
    """Round onto the extended set block by block.

    With ``eta`` the largest entry of a block, ``r = floor(1/eta + 1/2)``
    entries (the largest ones, ties to the lowest index) share mass ``1/r``.
    """
    supports = []
    for blk in partition.blocks(np.asarray(y_bar, dtype=float)):
        eta = blk.max()
        r = int(np.floor(1.0 / eta + 0.5)) if eta > 0 else len(blk)
        r = min(max(r, 1), len(blk))
        order = np.argsort(-blk, kind="stable")
        supports.append(tuple(order[:r]))
    return ExtendedRounding(tuple(supports))


def rounding_distance(y_bar: np.ndarray, y_hat: ExtendedRounding,
                      partition: Partition) -> float:
    return float(np.max(np.abs(y_hat.to_vector(partition) - y_bar)))


def _unit_index(blk: np.ndarray) -> int | None:
    nz = np.flatnonzero(blk)
    if len(nz) == 1 and blk[nz[0]] == 1.0:
        return int(nz[0])
    return None


def greedy_booleanize(y_hat: ExtendedRounding | np.ndarray, obj: MCPPObjective,
                      history: list | None = None) -> BooleanSolution:
    """Turn a point of the extended set into a Boolean local optimum.

    Blocks are swept in order; each block is set to the unit vector of its
    smallest ``Phi`` entry (lowest index on ties).  A block that is already a
    unit vector is only moved on a strict decrease, so sweeps terminate.
    ``history`` receives ``f(x)`` after every assignment.
    """
    part = obj.partition
    x = y_hat.to_vector(part) if isinstance(y_hat, ExtendedRounding) else np.array(y_hat, float)
    if history is not None:
        history.append(obj.value(x))
    changed = True
    while changed:
        changed = False
        for j in range(part.m):
            sl = part.slice(j)
            phi = obj.block_gradient(x, j)
            best = int(np.argmin(phi))
            cur = _unit_index(x[sl])
            if cur is not None:
                tol = 1e-12 * max(1.0, float(np.max(np.abs(phi))))
                if not phi[best] < phi[cur] - tol:
                    continue
            x[sl] = 0.0
            x[sl.start + best] = 1.0
            changed = True
            if history is not None:
                history.append(obj.value(x))
    return BooleanSolution.from_vector(x, part)


# ANNEALING ============================================================================

@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric temperature schedule and stopping tolerances."""

    t1: float = 3.0
    gamma: float = 0.95
    eps0: float = 1e-3
    max_temps: int = 1000
    max_steps: int = 50_000
    tol_eq: float = 1e-6
    stall_temps: int = 5

    def __post_init__(self):
        if not (self.t1 > 0 and 0 < self.gamma < 1 and self.eps0 > 0 and self.tol_eq > 0):
            raise ValueError("need t1 > 0, 0 < gamma < 1, eps0 > 0, tol_eq > 0")
        if self.max_temps < 1 or self.max_steps < 1:
            raise ValueError("max_temps and max_steps must be positive")

    def temperature(self, s: int) -> float:
        """Temperature of stage ``s`` (1-based)."""
        return self.t1 * self.gamma ** (s - 1)


@dataclass
class TemperatureRecord:
    T: float
    steps: int
    residual: float
    eps: float
    converged: bool


@dataclass
class SolveTrace:
    records: list[TemperatureRecord]
    y_bar: np.ndarray
    y_hat: ExtendedRounding
    x: BooleanSolution
    f_y_bar: float
    f_y_hat: float
    f_x: float
    status: str
    flags: list[str] = field(default_factory=list)

    @property
    def total_steps(self) -> int:
        return sum(r.steps for r in self.records)

    @property
    def n_temperatures(self) -> int:
        return len(self.records)

    @property
    def eps(self) -> float:
        return self.records[-1].eps if self.records else float("nan")


def anneal(obj: MCPPObjective, y0: np.ndarray, schedule: AnnealSchedule | None = None,
           ctrl: StepController | None = None) -> SolveTrace:
    """Cool through the schedule, warm-starting each stage from the last equilibrium.

    Stops when the rounding distance drops below ``eps0``, when the rounding
    and its booleanization have not changed for ``stall_temps`` stages, or
    when the temperature budget runs out.
    """
    schedule = schedule or AnnealSchedule()
    ctrl = ctrl or StepController()
    part = obj.partition
    y = part.check_state(y0).copy()
    records: list[TemperatureRecord] = []
    flags: list[str] = []
    status = "temperature_budget_exhausted"
    last = None
    same = 0
    y_hat = x = None
    for s in range(1, schedule.max_temps + 1):
        T = schedule.temperature(s)
        eq = integrate_to_equilibrium(y, T, obj, ctrl, schedule.tol_eq, schedule.max_steps)
        y, ctrl = eq.y, eq.ctrl
        if not eq.converged and "step_limit" not in flags:
            flags.append("step_limit")
        y_hat = round_to_extended(y, part)
        eps = rounding_distance(y, y_hat, part)
        records.append(TemperatureRecord(T, eq.steps, eq.residual, eps, eq.converged))
        logger.debug("T=%.4g steps=%d eps=%.3g", T, eq.steps, eps)
        if eps < schedule.eps0:
            status = "converged"
            break
        if last is not None and y_hat == last[0]:
            x = greedy_booleanize(y_hat, obj)
            same = same + 1 if x == last[1] else 1
        else:
            x = None
            same = 1
        last = (y_hat, x)
        if same >= schedule.stall_temps:
            status = "stalled"
            break
    if status != "converged" and status not in flags:
        flags.append(status)
    x = greedy_booleanize(y_hat, obj)
    return SolveTrace(records, y, y_hat, x,
                      f_y_bar=obj.value(y), f_y_hat=obj.value(y_hat.to_vector(part)),
                      f_x=obj.value(x.to_vector(part)), status=status, flags=flags)


def sample_initial(partition: Partition, rng_seed) -> np.ndarray:
    """Uniform sample from the open simplex of every block (Dirichlet(1,...,1))."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    e = rng.exponential(size=partition.n)
    e = np.maximum(e, np.finfo(float).tiny)
    return e / np.repeat(partition.block_sums(e), partition.block_sizes)


# TRIALS ===============================================================================

def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("MCPP_ODE_THREADS", "1")))
    except ValueError:
        return 1


def run_trials(fn: Callable[[int], object], seeds: Sequence[int],
               workers: int | None = None) -> list:
    """Evaluate ``fn(seed)`` for every seed; results come back in seed order."""
    workers = workers or default_workers()
    if workers == 1 or len(seeds) <= 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds))


def best_index(values: Sequence[float]) -> int | None:
    """Index of the largest value; the earliest one wins ties."""
    best = None
    for i, v in enumerate(values):
        if best is None or v > values[best]:
            best = i
    return best
