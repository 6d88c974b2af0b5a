"""Star discrepancy of a point set as two multiple choice polynomial programs.

For ``U = {u^1..u^N}`` in ``[0,1)^d`` the star discrepancy is the larger of
``max D(u)`` over the grid ``Gamma-bar`` (coordinates of ``U`` plus 1) and
``max D-bar(u)`` over the grid ``Gamma``.  Each maximization becomes an MCPP
with ``d`` blocks (one per dimension): block ``j`` selects a position in the
sorted ``j``-th coordinates.  The objectives ``delta`` and ``delta-bar`` are
products of per-dimension linear forms, hence affine in every block.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import BooleanSolution, MCPPObjective, Partition
from .solver import (AnnealSchedule, StepController, anneal, best_index, run_trials,
                     sample_initial)


class PointSetError(ValueError):
    pass


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float, ndmin=2)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise PointSetError(f"expected an (N, d) array with N, d >= 1, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p >= 1):
            raise PointSetError("all coordinates must lie in [0, 1)")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def parse_pointset(text: str) -> PointSet:
    """Header ``N d`` followed by ``N`` rows of ``d`` reals."""
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise PointSetError("empty input")
    try:
        N, d = (int(t) for t in rows[0])
    except ValueError:
        raise PointSetError(f"line 1: expected header 'N d', got {' '.join(rows[0])!r}")
    if len(rows) - 1 != N:
        raise PointSetError(f"header announces {N} points but {len(rows) - 1} rows follow")
    pts = []
    for no, tok in enumerate(rows[1:], 2):
        if len(tok) != d:
            raise PointSetError(f"line {no}: expected {d} coordinates, got {len(tok)}")
        try:
            pts.append([float(t) for t in tok])
        except ValueError:
            raise PointSetError(f"line {no}: malformed coordinate")
    return PointSet(np.array(pts, dtype=float).reshape(N, d))


def read_pointset(path) -> PointSet:
    return parse_pointset(Path(path).read_text())


# GRID =================================================================================

@dataclass(frozen=True)
class GridIndex:
    """Sorted coordinates and ranks of a point set.

    ``ubar[j]`` holds the sorted ``j``-th coordinates followed by 1 (length
    ``N+1``); ``rank[i, j]`` is the 0-based position of ``u^i_j`` in
    ``ubar[j]``.  Ties get consecutive ranks in original point order.
    """

    points: PointSet
    ubar: np.ndarray   # (d, N+1)
    rank: np.ndarray   # (N, d)

    @property
    def N(self) -> int:
        return self.points.N

    @property
    def d(self) -> int:
        return self.points.d


def preprocess(U: PointSet) -> GridIndex:
    P = U.points
    N, d = P.shape
    order = np.argsort(P, axis=0, kind="stable")
    rank = np.empty((N, d), dtype=np.intp)
    ubar = np.ones((d, N + 1))
    for j in range(d):
        rank[order[:, j], j] = np.arange(N)
        ubar[j, :N] = P[order[:, j], j]
    ubar.setflags(write=False)
    rank.setflags(write=False)
    return GridIndex(U, ubar, rank)


def _as_points(U) -> np.ndarray:
    return U.points if isinstance(U, PointSet) else np.asarray(U, dtype=float)


def eval_D(u, U) -> float:
    """``vol([0,u)) - |[0,u) & U| / N`` (half-open box)."""
    P = _as_points(U)
    u = np.asarray(u, dtype=float)
    return float(np.prod(u) - np.count_nonzero(np.all(P < u, axis=1)) / len(P))


def eval_Dbar(u, U) -> float:
    """``|[0,u] & U| / N - vol([0,u])`` (closed box)."""
    P = _as_points(U)
    u = np.asarray(u, dtype=float)
    return float(np.count_nonzero(np.all(P <= u, axis=1)) / len(P) - np.prod(u))


# OBJECTIVES ===========================================================================

def _prod_excluding(a: np.ndarray) -> np.ndarray:
    """``out[..., j] = prod_{j' != j} a[..., j']`` via prefix and suffix products."""
    ones = np.ones(a.shape[:-1] + (1,))
    pre = np.cumprod(np.concatenate([ones, a[..., :-1]], axis=-1), axis=-1)
    suf = np.cumprod(np.concatenate([ones, a[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return pre * suf


class _BoxObjective(MCPPObjective):
    # open=True: D-type (delta, blocks of size N+1, strict rank comparison);
    # open=False: closed-box D-bar type (blocks of size N, inclusive ranks).
    open_box: bool

    def __init__(self, grid: GridIndex):
        self.grid = grid
        N, d = grid.N, grid.d
        self.size = N + 1 if self.open_box else N
        if self.size < 2:
            raise ValueError("the closed-box problem needs N >= 2 (for N = 1 the only "
                             "candidate is the point itself)")
        self.partition = Partition.uniform(d, self.size)
        self._ubar = np.ascontiguousarray(grid.ubar[:, :self.size])
        self._rank = grid.rank
        # z[i, j] = sum of block j from position rank[i, j] + shift onward
        self._zpos = grid.rank + (1 if self.open_box else 0)
        self._cols = np.arange(d)

    def _X(self, y):
        return np.asarray(y, dtype=float).reshape(self.grid.d, self.size)

    def _parts(self, X):
        b = np.einsum("ji,ji->j", X, self._ubar)
        tail = np.zeros((X.shape[0], self.size + 1))
        tail[:, :-1] = np.cumsum(X[:, ::-1], axis=1)[:, ::-1]
        Z = tail[self._cols, self._zpos]           # (N, d)
        return b, Z

    def volume_and_count(self, y):
        """``(nu, alpha)``: multilinear volume and point-count forms."""
        b, Z = self._parts(self._X(y))
        return float(np.prod(b)), float(np.prod(Z, axis=1).sum())

    def discrepancy(self, y) -> float:
        """``delta`` (open box) or ``delta-bar`` (closed box); ``f = -discrepancy``."""
        nu, alpha = self.volume_and_count(y)
        N = self.grid.N
        return nu - alpha / N if self.open_box else alpha / N - nu

    def value(self, y):
        return -self.discrepancy(y)

    def block_gradients(self, y):
        X = self._X(y)
        N, d = self.grid.N, self.grid.d
        b, Z = self._parts(X)
        dnu = self._ubar * _prod_excluding(b)[:, None]
        G = _prod_excluding(Z)                     # (N, d)
        # scatter G by rank, then partial sums over ranks below (open) or up to (closed)
        H = np.zeros((d, self.size))
        H[self._cols, self._rank] = G
        S = np.cumsum(H, axis=1)
        if self.open_box:
            dalpha = np.zeros_like(S)
            dalpha[:, 1:] = S[:, :-1]
            return -(dnu - dalpha / N).ravel()
        return -(S / N - dnu).ravel()

    def gradient_cost(self):
        return 8 * self.grid.N * self.grid.d

    def decode(self, x: BooleanSolution) -> np.ndarray:
        """Grid point ``u`` with ``u_j = ubar[j, s_j]``."""
        return self._ubar[self._cols, np.asarray(x.chosen)]

    def canonical_preimage(self, u) -> BooleanSolution:
        """Preimage selecting the lowest position holding each coordinate."""
        u = np.asarray(u, dtype=float)
        chosen = []
        for j in range(self.grid.d):
            hits = np.flatnonzero(self._ubar[j] == u[j])
            if len(hits) == 0:
                raise ValueError(f"coordinate {u[j]} is not on the grid of dimension {j}")
            chosen.append(int(hits[0]))
        return BooleanSolution(tuple(chosen))

    def exact(self, u) -> float:
        """``D(u)`` or ``D-bar(u)`` evaluated directly on the point set."""
        P = self.grid.points
        return eval_D(u, P) if self.open_box else eval_Dbar(u, P)


class DeltaObjective(_BoxObjective):
    """``-delta`` over ``d`` blocks of size ``N+1`` (half-open boxes)."""

    open_box = True


class DeltaBarObjective(_BoxObjective):
    """``-delta-bar`` over ``d`` blocks of size ``N`` (closed boxes)."""

    open_box = False


def delta_objective(grid: GridIndex) -> DeltaObjective:
    return DeltaObjective(grid)


def deltabar_objective(grid: GridIndex) -> DeltaBarObjective:
    return DeltaBarObjective(grid)


def naive_gradient(obj: _BoxObjective, y) -> np.ndarray:
    """Block gradients straight from the product-of-sums formulas.

    Every partial sum and every cross-dimension product is recomputed from
    scratch for each entry, costing ``O(N^2 d^2)``; it shares no
    intermediate quantities with the fast path.
    """
    grid = obj.grid
    N, d, size = grid.N, grid.d, obj.size
    X = np.asarray(y, dtype=float).reshape(d, size)
    ubar = grid.ubar[:, :size]
    shift = 1 if obj.open_box else 0
    pos = np.arange(size)
    # Z[i, j] = sum_{k >= rank[i, j] + shift} X[j, k]
    Z = np.array([[X[j, pos >= grid.rank[i, j] + shift].sum() for j in range(d)]
                  for i in range(N)])
    lin = (X * ubar).sum(axis=1)
    grad = np.zeros((d, size))
    for j in range(d):
        others = [jj for jj in range(d) if jj != j]
        vol_rest = np.prod(lin[others])
        cnt_rest = np.prod(Z[:, others], axis=1)
        for t in range(size):
            dnu = ubar[j, t] * vol_rest
            inside = (grid.rank[:, j] + shift) <= t
            dalpha = cnt_rest[inside].sum()
            grad[j, t] = -(dnu - dalpha / N) if obj.open_box else -(dalpha / N - dnu)
    return grad.ravel()


# EXACT ENUMERATION ====================================================================

def exact_star_discrepancy(U, budget: float = 1e7, return_point: bool = False):
    """Star discrepancy by enumerating the critical grids.

    Counts on the grid come from a ``d``-dimensional histogram of the points
    followed by cumulative sums along every axis, so the cost is linear in the
    number of grid points.  Refuses when that number exceeds ``budget``.
    """
    P = _as_points(U)
    N, d = P.shape
    axes = [np.unique(np.append(P[:, j], 1.0)) for j in range(d)]
    size = float(np.prod([len(a) for a in axes]))
    if size > budget:
        raise ValueError(f"grid has {size:.3g} points, above the enumeration budget {budget:.3g}")
    shape = tuple(len(a) for a in axes)
    pos = tuple(np.searchsorted(axes[j], P[:, j]) for j in range(d))
    H = np.zeros(shape)
    np.add.at(H, pos, 1.0)
    closed = H
    for ax in range(d):
        closed = np.cumsum(closed, axis=ax)
    # open count at index s: points with positions strictly below s on every axis
    opened = np.pad(closed, [(1, 0)] * d)[tuple(slice(0, n) for n in shape)]
    vol = axes[0]
    for a in axes[1:]:
        vol = np.multiply.outer(vol, a)
    D = vol - opened / N
    # closed boxes only on the coordinates of U, i.e. drop the trailing 1 per axis
    inner = tuple(slice(0, n - 1) for n in shape)
    Dbar = closed[inner] / N - vol[inner]
    iD = np.unravel_index(np.argmax(D), D.shape)
    best = float(D[iD])
    point = np.array([axes[j][iD[j]] for j in range(d)])
    if Dbar.size:
        iB = np.unravel_index(np.argmax(Dbar), Dbar.shape)
        if Dbar[iB] > best:
            best = float(Dbar[iB])
            point = np.array([axes[j][iB[j]] for j in range(d)])
    return (best, point) if return_point else best


# SOLVER ===============================================================================

@dataclass
class StarTrialReport:
    seed: int
    value: float
    value_open: float
    value_closed: float
    steps: int
    temperatures: int
    status: str
    flags: list[str]


@dataclass
class StarDiscResult:
    value: float | None
    point: np.ndarray | None
    best_seed: int | None
    trials: list[StarTrialReport]


def default_controller(U: PointSet) -> StepController:
    return StepController(theta=1e-6 * U.N * U.d)


def solve_stardisc(U: PointSet, trials: int = 100, schedule: AnnealSchedule | None = None,
                   ctrl: StepController | None = None, seed: int = 0,
                   workers: int | None = None) -> StarDiscResult:
    """Lower bound for the star discrepancy from both MCPP forms.

    Every trial anneals the open-box and the closed-box problem, decodes the
    Boolean solutions to grid points and evaluates ``D`` / ``D-bar`` there
    exactly, so every reported value is attained by an actual box.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    grid = preprocess(U)
    objs = (DeltaObjective(grid), DeltaBarObjective(grid) if U.N > 1 else None)
    schedule = schedule or AnnealSchedule(t1=1e-4)
    ctrl = ctrl or default_controller(U)

    def one(s):
        rng = np.random.default_rng(s)
        vals, pts, steps, temps, status, flags = [], [], 0, 0, [], []
        for obj in objs:
            if obj is None:
                # single point: the closed box at the point is the only candidate
                u = U.points[0].copy()
                vals.append(eval_Dbar(u, U))
                pts.append(u)
                continue
            trace = anneal(obj, sample_initial(obj.partition, rng), schedule, ctrl)
            u = obj.decode(trace.x)
            vals.append(obj.exact(u))
            pts.append(u)
            steps += trace.total_steps
            temps += trace.n_temperatures
            status.append(trace.status)
            flags += [f for f in trace.flags if f not in flags]
        b = int(vals[1] > vals[0])
        rep = StarTrialReport(s, vals[b], vals[0], vals[1], steps, temps,
                              "converged" if all(st == "converged" for st in status) else status[b],
                              flags)
        return rep, pts[b]

    out = run_trials(one, [seed + t for t in range(trials)], workers)
    reports = [r for r, _ in out]
    b = best_index([r.value for r in reports])
    return StarDiscResult(reports[b].value, out[b][1], reports[b].seed, reports)
