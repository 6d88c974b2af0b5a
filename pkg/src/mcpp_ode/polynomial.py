"""Explicit multilinear polynomials and the unconstrained-to-MCPP reformulation."""
from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Mapping

import numpy as np

from .core import InvalidInputError, MCPPObjective, Partition


class MultilinearPolynomial:
    """``f(x) = sum_T c_T prod_{i in T} x_i`` over ``n`` variables.

    Repeated indices in a monomial are collapsed (``x_i**2 == x_i`` on
    Booleans), so the stored form is always multilinear and ``value`` is the
    multilinear extension at fractional points.
    """

    def __init__(self, n: int, terms: Mapping[tuple[int, ...], float] | Iterable):
        self.n = int(n)
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[tuple[int, ...], float] = defaultdict(float)
        for idx, coef in items:
            key = tuple(sorted(set(int(i) for i in idx)))
            if key and not (0 <= key[0] and key[-1] < self.n):
                raise InvalidInputError(f"monomial {idx} out of range for n={self.n}")
            merged[key] += float(coef)
        self.terms = {k: c for k, c in merged.items() if c != 0.0}
        # monomials grouped by degree: index matrix (M, deg) and coefficients (M,)
        groups = defaultdict(list)
        for k, c in self.terms.items():
            groups[len(k)].append((k, c))
        self._const = self.terms.get((), 0.0)
        self._groups = [(np.array([k for k, _ in g], dtype=np.intp).reshape(len(g), deg),
                         np.array([c for _, c in g]))
                        for deg, g in sorted(groups.items()) if deg > 0]

    @property
    def degree(self) -> int:
        return max((len(k) for k in self.terms), default=0)

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        total = self._const
        for idx, c in self._groups:
            total += float(c @ np.prod(x[idx], axis=1))
        return float(total)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.zeros(self.n)
        for idx, c in self._groups:
            vals = x[idx]
            for pos in range(idx.shape[1]):
                rest = np.prod(np.delete(vals, pos, axis=1), axis=1)
                np.add.at(g, idx[:, pos], c * rest)
        return g


class PolynomialObjective(MCPPObjective):
    """MCPP objective given by an explicit polynomial on a partition.

    Monomials containing two variables of the same block vanish on the
    feasible set and are dropped, which makes ``f`` affine in every block.
    """

    def __init__(self, partition: Partition, terms):
        self.partition = partition
        block_of = np.repeat(np.arange(partition.m), partition.block_sizes)
        poly = MultilinearPolynomial(partition.n, terms)
        kept = {k: c for k, c in poly.terms.items()
                if len(set(block_of[list(k)])) == len(k)}
        self.poly = MultilinearPolynomial(partition.n, kept)

    def block_gradients(self, y):
        return self.poly.gradient(y)

    def value(self, y):
        return self.poly.value(y)


class UnconstrainedObjective(MCPPObjective):
    """MCPP form of ``min f(x)`` over ``{0,1}^n`` without choice constraints.

    Each free variable ``x_j`` gets a companion ``x_{j+n}`` with
    ``x_j + x_{j+n} = 1``.  In the flat layout block ``j`` is stored as
    ``(x_j, x_{j+n})`` at positions ``2j, 2j+1``; ``Phi^{(j)} = (df/dx_j, 0)``.
    """

    def __init__(self, f):
        self.f = f
        self.partition = Partition.uniform(f.n, 2)

    @staticmethod
    def original(y: np.ndarray) -> np.ndarray:
        """The ``n`` original variables ``x_1..x_n`` of a flat MCPP state."""
        return np.asarray(y)[0::2]

    @staticmethod
    def lift(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.column_stack([x, 1.0 - x]).ravel()

    def block_gradients(self, y):
        g = np.zeros(self.partition.n)
        g[0::2] = self.f.gradient(self.original(y))
        return g

    def value(self, y):
        return self.f.value(self.original(y))


def reformulate_unconstrained(f) -> UnconstrainedObjective:
    """Wrap an unconstrained pseudo-Boolean ``f`` (``n``, ``value``, ``gradient``)."""
    return UnconstrainedObjective(f)


def random_polynomial_objective(partition: Partition, rng: np.random.Generator,
                                degree: int = 2, density: float = 1.0,
                                scale: float = 1.0) -> PolynomialObjective:
    """Random objective with one monomial per cross-block index combination.

    Every combination of up to ``degree`` variables from distinct blocks gets
    a normal coefficient with probability ``density``.
    """
    from itertools import combinations, product

    terms = {}
    for i in range(partition.n):
        terms[(i,)] = scale * rng.standard_normal()
    for deg in range(2, degree + 1):
        for blocks in combinations(range(partition.m), deg):
            ranges = [range(partition.offsets[b], partition.offsets[b + 1]) for b in blocks]
            for idx in product(*ranges):
                if rng.random() < density:
                    terms[idx] = scale * rng.standard_normal()
    return PolynomialObjective(partition, terms)
