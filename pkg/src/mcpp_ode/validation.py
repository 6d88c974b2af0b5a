"""Exact checks for small instances.

The annealed ODE is a mean-field approximation of a continuous-time Markov
chain whose stationary law is the Boltzmann distribution ``exp(-f/T)``.  For
small partitions the chain can be built explicitly, which gives exact
references for the ODE equilibria.  The module also holds the local-optimality
check over the extended set and the a-posteriori certificate that an
equilibrium rounds to a local optimum.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (BooleanSolution, ExtendedRounding, MCPPObjective, Partition, residual_norm,
                   rhs, softmax)
from .solver import round_to_extended, rounding_distance


class BudgetExceededError(ValueError):
    pass


# CTMC =================================================================================

@dataclass
class CTMCInstance:
    """Chain on all Boolean feasible points; ``states[s, j]`` is the choice of block ``j``."""

    partition: Partition
    states: np.ndarray
    X: np.ndarray           # (|X|, n) state vectors
    f: np.ndarray           # objective per state
    Q: sp.csr_matrix        # generator, rows sum to zero
    T: float

    @property
    def size(self) -> int:
        return len(self.states)


def enumerate_states(partition: Partition, budget: int = 10_000) -> np.ndarray:
    size = math.prod(partition.block_sizes)
    if size > budget:
        raise BudgetExceededError(f"{size} feasible states exceed the budget of {budget}")
    return np.array(list(itertools.product(*(range(d) for d in partition.block_sizes))),
                    dtype=np.intp).reshape(size, partition.m)


def build_ctmc(obj: MCPPObjective, T: float, budget: int = 10_000) -> CTMCInstance:
    """Generator with single-block moves ``x -> x'`` at rate ``softmax(-Phi^(j)(x); 1/T)_{i'}``."""
    if not T > 0:
        raise ValueError("temperature must be positive")
    part = obj.partition
    states = enumerate_states(part, budget)
    S = len(states)
    # mixed-radix index of a state: sum_j s_j * stride_j
    stride = np.ones(part.m, dtype=np.intp)
    for j in range(part.m - 2, -1, -1):
        stride[j] = stride[j + 1] * part.block_sizes[j + 1]
    X = np.zeros((S, part.n))
    X[np.arange(S)[:, None], part.offsets[:-1] + states] = 1.0
    f = np.array([obj.value(x) for x in X])
    rows, cols, vals = [], [], []
    for s in range(S):
        phi = obj.block_gradients(X[s])
        for j in range(part.m):
            p = softmax(-part.block(phi, j), 1.0 / T)
            cur = states[s, j]
            for i in range(part.block_sizes[j]):
                if i != cur:
                    rows.append(s)
                    cols.append(s + (i - cur) * stride[j])
                    vals.append(p[i])
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(S, S))
    Q = (Q - sp.diags(np.asarray(Q.sum(axis=1)).ravel())).tocsr()
    return CTMCInstance(part, states, X, f, Q, float(T))


def _boltzmann_weights(ctmc: CTMCInstance) -> np.ndarray:
    return np.exp(-(ctmc.f - ctmc.f.min()) / ctmc.T)


def boltzmann_distribution(ctmc: CTMCInstance) -> np.ndarray:
    w = _boltzmann_weights(ctmc)
    return w / w.sum()


def boltzmann_mean(ctmc: CTMCInstance) -> np.ndarray:
    """Expected state vector under ``exp(-f/T)``."""
    return boltzmann_distribution(ctmc) @ ctmc.X


def check_detailed_balance(ctmc: CTMCInstance) -> float:
    """Largest flux mismatch ``|w(x) q(x->x') - w(x') q(x'->x)|`` over allowed moves."""
    w = _boltzmann_weights(ctmc)
    off = ctmc.Q - sp.diags(ctmc.Q.diagonal())
    flux = sp.diags(w) @ off
    diff = (flux - flux.T).tocoo()
    return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0


def stationary_distribution(ctmc: CTMCInstance, dense_limit: int = 2048) -> np.ndarray:
    """Stationary law of the generator.

    Up to ``dense_limit`` states this uses the GTH state reduction, which has
    no subtractions and stays accurate entrywise when rates span many orders
    of magnitude (low temperatures).  Larger chains fall back to a sparse
    solve of ``Q^T p = 0`` with the last equation replaced by ``sum(p) = 1``.
    """
    S = ctmc.size
    if S <= dense_limit:
        A = ctmc.Q.toarray()
        np.fill_diagonal(A, 0.0)
        for k in range(S - 1, 0, -1):
            A[:k, k] /= A[k, :k].sum()
            A[:k, :k] += np.outer(A[:k, k], A[k, :k])
        p = np.zeros(S)
        p[0] = 1.0
        for k in range(1, S):
            p[k] = p[:k] @ A[:k, k]
        return p / p.sum()
    A = ctmc.Q.T.tolil()
    A[S - 1, :] = np.ones(S)
    b = np.zeros(S)
    b[-1] = 1.0
    return np.atleast_1d(spla.spsolve(A.tocsc(), b))


def integrate_forward_equation(ctmc: CTMCInstance, p0, t_end: float, dt: float,
                               record_every: int = 1):
    """Explicit Euler on ``dp/dt = Q^T p``.

    Returns the final distribution, the sample times and the mean state at
    every ``record_every``-th step.
    """
    p = np.asarray(p0, dtype=float).copy()
    if p.shape != (ctmc.size,) or abs(p.sum() - 1.0) > 1e-12 or np.any(p < 0):
        raise ValueError("p0 must be a probability vector over the states")
    if not dt > 0 or 1.0 + dt * ctmc.Q.diagonal().min() < 0:
        raise ValueError(f"dt={dt} is unstable for this generator")
    QT = ctmc.Q.T.tocsr()
    n_steps = int(math.ceil(t_end / dt - 1e-12))
    times, means = [0.0], [p @ ctmc.X]
    for k in range(1, n_steps + 1):
        p = p + dt * (QT @ p)
        if k % record_every == 0 or k == n_steps:
            times.append(k * dt)
            means.append(p @ ctmc.X)
    return p, np.array(times), np.array(means)


def mean_field_gap(y_bar, ctmc: CTMCInstance) -> float:
    """``||y_bar - E[X]||_inf`` between an ODE equilibrium and the exact mean."""
    return float(np.max(np.abs(np.asarray(y_bar) - boltzmann_mean(ctmc))))


# LOCAL OPTIMALITY =====================================================================

@dataclass
class LocalOptimality:
    ok: bool
    block: int | None = None
    support: tuple[int, ...] | None = None
    decrease: float = 0.0


def _support_vectors(d: int, max_size: int | None = None):
    for r in range(1, (max_size or d) + 1):
        for A in itertools.combinations(range(d), r):
            v = np.zeros(d)
            v[list(A)] = 1.0 / r
            yield A, v


def check_local_optimality(x, obj: MCPPObjective, atol: float = 1e-10,
                           budget: int = 100_000, unit_only: bool = False) -> LocalOptimality:
    """Does any single-block replacement by a point of the extended set lower ``f``?

    Returns the first move decreasing ``f`` by more than ``atol``.  With
    ``unit_only`` only unit vectors are tried (the Boolean local optimum).
    """
    part = obj.partition
    if sum(2 ** d - 1 for d in part.block_sizes) > budget:
        raise BudgetExceededError("per-block support enumeration exceeds the budget")
    y = x.to_vector(part) if isinstance(x, (BooleanSolution, ExtendedRounding)) else np.asarray(x, float)
    f0 = obj.value(y)
    for j in range(part.m):
        for A, v in _support_vectors(part.block_sizes[j], 1 if unit_only else None):
            f1 = obj.value(part.replace_block(y, j, v))
            if f1 < f0 - atol:
                return LocalOptimality(False, j, A, f0 - f1)
    return LocalOptimality(True)


# CERTIFICATE ==========================================================================

def enumerate_extended(partition: Partition, budget: int = 100_000):
    size = math.prod(2 ** d - 1 for d in partition.block_sizes)
    if size > budget:
        raise BudgetExceededError(f"{size} extended points exceed the budget of {budget}")
    per_block = [[v for _, v in _support_vectors(d)] for d in partition.block_sizes]
    for combo in itertools.product(*per_block):
        yield np.concatenate(combo)


def lipschitz_bound(obj: MCPPObjective, budget: int = 1 << 16) -> float:
    """``max_x max_{j,i} sum_k |dPhi_i/dx_k|`` over the vertices of ``[0,1]^n``.

    Each ``Phi_i`` is multilinear, so ``dPhi_i/dx_k`` at a vertex equals the
    difference of ``Phi_i`` at the two vertices differing in coordinate
    ``k``, and the maximum over the cube is attained at a vertex.
    """
    n = obj.partition.n
    if 2 ** n > budget:
        raise BudgetExceededError(f"2^{n} vertices exceed the budget of {budget}")
    V = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
    G = np.array([obj.block_gradients(v) for v in V])   # row index = binary code, MSB first
    idx = np.arange(len(V))
    total = np.zeros((len(V), n))
    for k in range(n):
        bit = 1 << (n - 1 - k)
        hi, lo = idx | bit, idx & ~bit
        total += np.abs(G[hi] - G[lo])
    L = float(total.max()) if n else 0.0
    return L


def minimal_gap(obj: MCPPObjective, budget: int = 100_000, rtol: float = 1e-12) -> float | None:
    """Smallest nonzero ``|Phi_i - Phi_i'|`` within a block over the extended set.

    Differences below ``rtol`` times the gradient scale count as ties.
    Returns None when no two entries ever differ.
    """
    part = obj.partition
    g = math.inf
    for y in enumerate_extended(part, budget):
        phi = obj.block_gradients(y)
        scale = max(1.0, float(np.max(np.abs(phi))))
        for blk in part.blocks(phi):
            diff = np.abs(blk[:, None] - blk[None, :])
            diff = diff[diff > rtol * scale]
            if diff.size:
                g = min(g, float(diff.min()))
    return None if math.isinf(g) else g


@dataclass
class Certificate:
    eps: float                 # infinity distance from y_bar to its rounding
    residual: float            # infinity norm of the right-hand side at y_bar
    T: float
    L: float
    g: float | None
    d_hat: int
    cond_distance: bool        # d_hat e < 1/2
    cond_separation: bool      # e / ln(1/(d_hat e) - 1) < T / (2L)
    cond_gap: bool | None      # T ln((1+d_hat e)/(1-d_hat e)) + 2 L e < g; None if vacuous
    gap_lhs: float
    concise_bound: bool        # e < min(1/(4 d_hat), T/(2L), g/(3 d_hat T + 2L))
    y_hat: ExtendedRounding

    @property
    def eps_effective(self) -> float:
        """The distance ``e`` used in the conditions: ``eps + residual``."""
        return self.eps + self.residual

    @property
    def gap_vacuous(self) -> bool:
        return self.g is None

    @property
    def passed(self) -> bool:
        return self.cond_distance and self.cond_separation and self.cond_gap is not False


def certify_equilibrium(y_bar, obj: MCPPObjective, T: float,
                        L: float | None = None, g: float | None = None,
                        budget: int = 100_000, margin: float = 1e-9) -> Certificate:
    """Sufficient conditions for the rounding of ``y_bar`` to be a local optimum.

    ``y_bar`` is only an approximate equilibrium.  With ``s = softmax(-Phi(y_bar)/T)``
    the fixed-point relation ``ln(s_a/s_b) = (Phi_b - Phi_a)/T`` holds exactly and
    ``|s - y_hat| <= eps + |rhs(y_bar)|``, while ``|Phi(y_hat) - Phi(y_bar)| <= L eps``,
    so the conditions are evaluated at ``e = eps + residual``.  The conditions are
    strict and can be tight (for one block the gap condition holds with equality at an
    exact equilibrium), so each one must hold with relative slack ``margin``.

    ``L`` and ``g`` are computed by enumeration unless given.
    """
    part = obj.partition
    y_bar = np.asarray(y_bar, dtype=float)
    y_hat = round_to_extended(y_bar, part)
    eps = rounding_distance(y_bar, y_hat, part)
    res = residual_norm(rhs(y_bar, T, obj))
    if L is None:
        L = lipschitz_bound(obj)
    if g is None:
        g = minimal_gap(obj, budget)
    keep = 1.0 - margin
    dh = part.d_hat
    e = eps + res
    de = dh * e
    c1 = de < 0.5 * keep
    if not c1:
        c2 = False
    elif e == 0.0 or L == 0.0:
        c2 = True
    else:
        c2 = e / math.log(1.0 / de - 1.0) < keep * T / (2.0 * L)
    if c1:
        lhs = T * math.log1p(de) - T * math.log1p(-de) + 2.0 * L * e
    else:
        lhs = math.inf
    c3 = None if g is None else lhs < keep * g
    bounds = [1.0 / (4 * dh)]
    if L > 0:
        bounds.append(T / (2.0 * L))
    if g is not None:
        bounds.append(g / (3.0 * dh * T + 2.0 * L))
    rb = e < keep * min(bounds)
    return Certificate(eps, res, float(T), float(L), g, dh, c1, c2, c3, lhs, rb, y_hat)


# FINITE DIFFERENCES ===================================================================

def finite_difference_gradient(obj: MCPPObjective, y, step: float = 2.0 ** -7) -> np.ndarray:
    """Central-difference estimate of ``df/dy`` using the multilinear extension.

    The extension is affine in every single coordinate, so the truncation error is
    zero for any step; a moderate dyadic step keeps the rounding error near machine
    precision. The divisor is the realized difference of the perturbed arguments.
    """
    y = np.asarray(y, dtype=float)
    g = np.empty_like(y)
    for k in range(len(y)):
        up, down = y.copy(), y.copy()
        up[k] += step
        down[k] -= step
        g[k] = (obj.value(up) - obj.value(down)) / (up[k] - down[k])
    return g
