"""MAX-k-CUT: G-Set parsing, the cut objective and the multi-trial driver."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import MCPPObjective, Partition
from .solver import (AnnealSchedule, StepController, anneal, best_index, run_trials,
                     sample_initial)


class GSetParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Graph:
    """Undirected edge-weighted graph with 0-based vertices and ``i < j`` edges."""

    n_vertices: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    adjacency: sp.csr_matrix = field(repr=False, compare=False)

    @classmethod
    def from_edges(cls, n_vertices: int, edges) -> "Graph":
        """Build from ``(i, j, w)`` triples (0-based); duplicates are summed."""
        edges = list(edges)
        if edges:
            e = np.asarray(edges, dtype=float)
            i, j, w = e[:, 0].astype(np.intp), e[:, 1].astype(np.intp), e[:, 2]
        else:
            i = j = np.zeros(0, dtype=np.intp)
            w = np.zeros(0)
        if np.any(i == j):
            raise ValueError("self-loops are not allowed")
        if len(i) and (min(i.min(), j.min()) < 0 or max(i.max(), j.max()) >= n_vertices):
            raise ValueError("edge endpoint out of range")
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        upper = sp.coo_matrix((w, (lo, hi)), shape=(n_vertices, n_vertices)).tocsr()
        upper.sum_duplicates()
        coo = upper.tocoo()
        adjacency = (upper + upper.T).tocsr()
        adjacency.sort_indices()
        return cls(int(n_vertices), coo.row.astype(np.intp), coo.col.astype(np.intp),
                   coo.data.astype(float), adjacency)

    @property
    def n_edges(self) -> int:
        return len(self.weights)

    @property
    def w_tot(self) -> float:
        return float(self.weights.sum())

    def weighted_degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def dense(self) -> np.ndarray:
        return self.adjacency.toarray()


def parse_gset(text: str) -> Graph:
    """Parse G-Set text: header ``|V| |E|`` then ``i j w`` lines, 1-based."""
    lines = [(no, ln.split()) for no, ln in enumerate(text.splitlines(), 1)]
    lines = [(no, tok) for no, tok in lines if tok]
    if not lines:
        raise GSetParseError("empty input")
    no, head = lines[0]
    try:
        nv, ne = (int(t) for t in head)
    except ValueError:
        raise GSetParseError(f"expected header '|V| |E|', got {' '.join(head)!r}", no)
    if nv < 1 or ne < 0:
        raise GSetParseError("vertex count must be positive and edge count nonnegative", no)
    body = lines[1:]
    if len(body) != ne:
        raise GSetParseError(f"header announces {ne} edges but {len(body)} edge lines follow")
    edges = []
    for no, tok in body:
        if len(tok) != 3:
            raise GSetParseError(f"expected 'i j w', got {' '.join(tok)!r}", no)
        try:
            a, b, w = int(tok[0]), int(tok[1]), float(tok[2])
        except ValueError:
            raise GSetParseError(f"malformed edge {' '.join(tok)!r}", no)
        if not (1 <= a <= nv and 1 <= b <= nv):
            raise GSetParseError(f"vertex index out of range 1..{nv}", no)
        if a == b:
            raise GSetParseError(f"self-loop at vertex {a}", no)
        if not np.isfinite(w):
            raise GSetParseError("non-finite weight", no)
        edges.append((a - 1, b - 1, w))
    return Graph.from_edges(nv, edges)


def read_gset(path) -> Graph:
    return parse_gset(Path(path).read_text())


def cut_value(g: Graph, labels) -> float:
    labels = np.asarray(labels)
    return float(g.weights[labels[g.rows] != labels[g.cols]].sum())


class MaxKCutObjective(MCPPObjective):
    """``f(x) = -sum_{i<j} w_ij (1 - x^(i) . x^(j))`` on ``|V|`` blocks of size ``k``.

    With ``P`` the ``k x |V|`` assignment matrix, ``f = -w_tot + tr(P W P^T)/2``
    and the block gradients are the columns of ``P W``; stored row-major as
    ``Y = P^T`` this is the sparse product ``W Y``.
    """

    def __init__(self, graph: Graph, k: int):
        if k < 2:
            raise ValueError("k must be at least 2")
        self.graph = graph
        self.k = int(k)
        self.partition = Partition.uniform(graph.n_vertices, self.k)
        self._W = graph.adjacency
        self._w_tot = graph.w_tot

    def _Y(self, y):
        return np.asarray(y, dtype=float).reshape(self.graph.n_vertices, self.k)

    def _WY(self, Y):
        # one matvec per column beats scipy's multi-vector kernel for small k
        cols = np.ascontiguousarray(Y.T)
        return np.column_stack([self._W @ c for c in cols])

    def block_gradients(self, y):
        return self._WY(self._Y(y)).ravel()

    def block_gradient(self, y, j):
        W = self._W
        lo, hi = W.indptr[j], W.indptr[j + 1]
        return W.data[lo:hi] @ self._Y(y)[W.indices[lo:hi]]

    def value(self, y):
        Y = self._Y(y)
        return float(-self._w_tot + 0.5 * np.sum(Y * self._WY(Y)))

    def gradient_cost(self):
        return self.k * self._W.nnz

    def labels(self, x) -> np.ndarray:
        """Subset label (0-based) of every vertex for a Boolean solution."""
        return np.asarray(x.chosen, dtype=np.intp)


def critical_temperature(g: Graph, k: int) -> float:
    """Temperature below which the uniform equilibrium loses stability.

    Linearizing the annealed ODE at ``y = 1/k`` gives ``du/dt = -u - W u / (kT)``,
    unstable exactly when ``T < -lambda_min(W) / k``.  Returns 0 if ``W`` has
    no negative eigenvalue (no edges).
    """
    W = g.adjacency
    if g.n_edges == 0:
        return 0.0
    if g.n_vertices <= 500:
        lam = float(np.linalg.eigvalsh(W.toarray())[0])
    else:
        lam = float(spla.eigsh(W.astype(float), k=1, which="SA", return_eigenvectors=False)[0])
    return max(0.0, -lam / k)


def informative_t1(g: Graph, k: int, fraction: float = 0.5, fallback: float = 3.0) -> float:
    """Starting temperature a fixed fraction below :func:`critical_temperature`.

    Starting above the critical temperature lands every trial on the uniform
    equilibrium, which rounds to itself and removes all diversity between
    random starts.
    """
    tc = critical_temperature(g, k)
    return fraction * tc if tc > 0 else fallback


@dataclass
class TrialReport:
    seed: int
    value: float
    steps: int
    temperatures: int
    status: str
    flags: list[str]


@dataclass
class MaxCutResult:
    best_cut: float | None
    best_labels: np.ndarray | None
    best_seed: int | None
    trials: list[TrialReport]
    labels: list[np.ndarray] = field(default_factory=list)    # per trial, in seed order


def solve_maxkcut(g: Graph, k: int = 2, trials: int = 100,
                  schedule: AnnealSchedule | None = None,
                  ctrl: StepController | None = None, seed: int = 0,
                  workers: int | None = None) -> MaxCutResult:
    """Independent annealing runs from random starts; trial ``t`` uses ``seed + t``."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    obj = MaxKCutObjective(g, k)
    schedule = schedule or AnnealSchedule(t1=3.0)
    ctrl = ctrl or StepController(theta=1e-5)

    def one(s):
        trace = anneal(obj, sample_initial(obj.partition, s), schedule, ctrl)
        labels = obj.labels(trace.x)
        rep = TrialReport(s, cut_value(g, labels), trace.total_steps,
                          trace.n_temperatures, trace.status, trace.flags)
        return rep, labels

    out = run_trials(one, [seed + t for t in range(trials)], workers)
    reports = [r for r, _ in out]
    b = best_index([r.value for r in reports])
    return MaxCutResult(reports[b].value, out[b][1], reports[b].seed, reports,
                        [lab for _, lab in out])
