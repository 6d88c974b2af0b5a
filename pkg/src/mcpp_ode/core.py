"""Problem-independent data model for multiple choice polynomial programs.

A multiple choice polynomial program minimizes a polynomial ``f`` over Boolean
vectors ``x`` whose entries are grouped into ``m`` blocks, with exactly one
entry equal to 1 in every block.  All states are stored as flat float vectors;
block ``j`` occupies the contiguous slice ``partition.slice(j)``.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np


class InvalidInputError(ValueError):
    """Raised on malformed numerical input (non-finite entries, bad shapes)."""


# PARTITION ============================================================================

@dataclass(frozen=True)
class Partition:
    """Block structure ``d_1, ..., d_m`` over ``n = sum(d_j)`` variables."""

    block_sizes: tuple[int, ...]
    offsets: np.ndarray = field(init=False, repr=False, compare=False)
    is_uniform: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = tuple(int(d) for d in self.block_sizes)
        if len(sizes) < 1:
            raise InvalidInputError("a partition needs at least one block")
        if any(d < 2 for d in sizes):
            raise InvalidInputError(f"every block needs at least 2 choices, got {sizes}")
        object.__setattr__(self, "block_sizes", sizes)
        offsets = np.zeros(len(sizes) + 1, dtype=np.intp)
        np.cumsum(sizes, out=offsets[1:])
        offsets.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "is_uniform", len(set(sizes)) == 1)

    @classmethod
    def uniform(cls, m: int, d: int) -> "Partition":
        return cls((d,) * m)

    @property
    def m(self) -> int:
        return len(self.block_sizes)

    @property
    def n(self) -> int:
        return int(self.offsets[-1])

    @property
    def d_hat(self) -> int:
        return max(self.block_sizes)

    def slice(self, j: int) -> slice:
        return slice(int(self.offsets[j]), int(self.offsets[j + 1]))

    def block(self, y: np.ndarray, j: int) -> np.ndarray:
        return y[self.offsets[j]:self.offsets[j + 1]]

    def blocks(self, y: np.ndarray) -> list[np.ndarray]:
        return [self.block(y, j) for j in range(self.m)]

    def block_sums(self, y: np.ndarray) -> np.ndarray:
        return np.add.reduceat(np.asarray(y, dtype=float), self.offsets[:-1])

    def replace_block(self, y: np.ndarray, j: int, v) -> np.ndarray:
        """Copy of ``y`` with block ``j`` overwritten by ``v``."""
        out = np.array(y, dtype=float, copy=True)
        out[self.slice(j)] = v
        return out

    def uniform_point(self) -> np.ndarray:
        return np.concatenate([np.full(d, 1.0 / d) for d in self.block_sizes])

    def check_state(self, y: np.ndarray, atol: float = 1e-12) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n,):
            raise InvalidInputError(f"state has shape {y.shape}, expected ({self.n},)")
        if not np.all(np.isfinite(y)):
            raise InvalidInputError("state contains non-finite entries")
        if np.any(np.abs(self.block_sums(y) - 1.0) > atol):
            raise InvalidInputError("state violates the per-block unit-sum constraint")
        return y


# SOFTMAX / HARDMAX ====================================================================

def softmax(z, beta: float = 1.0) -> np.ndarray:
    """Stable ``exp(beta*z_i) / sum_k exp(beta*z_k)``."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("softmax input contains non-finite entries")
    if not beta > 0:
        raise InvalidInputError(f"beta must be positive, got {beta}")
    w = np.exp(beta * (z - z.max()))
    return w / w.sum()


def softmax_blocks(z: np.ndarray, partition: Partition, beta: float) -> np.ndarray:
    """Apply :func:`softmax` independently to every block of a flat vector."""
    if partition.is_uniform:
        zz = z.reshape(partition.m, partition.block_sizes[0])
        w = np.exp(beta * (zz - zz.max(axis=1, keepdims=True)))
        w /= w.sum(axis=1, keepdims=True)
        return w.ravel()
    starts = partition.offsets[:-1]
    sizes = np.asarray(partition.block_sizes)
    zmax = np.repeat(np.maximum.reduceat(z, starts), sizes)
    w = np.exp(beta * (z - zmax))
    return w / np.repeat(np.add.reduceat(w, starts), sizes)


def hardmax(z) -> np.ndarray:
    """Limit of softmax as ``beta -> inf``: ``1/r`` on the ``r`` maximal entries."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("hardmax input contains non-finite entries")
    top = z == z.max()
    return top / np.count_nonzero(top)


# DISCRETE POINTS ======================================================================

@dataclass(frozen=True)
class BooleanSolution:
    """A feasible point: block ``j`` selects choice ``chosen[j]`` (0-based)."""

    chosen: tuple[int, ...]

    def to_vector(self, partition: Partition) -> np.ndarray:
        x = np.zeros(partition.n)
        for j, s in enumerate(self.chosen):
            if not 0 <= s < partition.block_sizes[j]:
                raise InvalidInputError(f"choice {s} out of range for block {j}")
            x[partition.offsets[j] + s] = 1.0
        return x

    @classmethod
    def from_vector(cls, x: np.ndarray, partition: Partition) -> "BooleanSolution":
        chosen = []
        for j, blk in enumerate(partition.blocks(np.asarray(x))):
            nz = np.flatnonzero(blk)
            if len(nz) != 1 or blk[nz[0]] != 1.0:
                raise InvalidInputError(f"block {j} is not a unit vector: {blk}")
            chosen.append(int(nz[0]))
        return cls(tuple(chosen))


@dataclass(frozen=True)
class ExtendedRounding:
    """Point of the extended set: block ``j`` is uniform on ``supports[j]``."""

    supports: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        supports = tuple(tuple(sorted(int(i) for i in a)) for a in self.supports)
        if any(len(a) == 0 for a in supports):
            raise InvalidInputError("every support set must be nonempty")
        object.__setattr__(self, "supports", supports)

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.supports)

    @property
    def is_boolean(self) -> bool:
        return all(len(a) == 1 for a in self.supports)

    def to_vector(self, partition: Partition) -> np.ndarray:
        y = np.zeros(partition.n)
        for j, a in enumerate(self.supports):
            if max(a) >= partition.block_sizes[j]:
                raise InvalidInputError(f"support {a} out of range for block {j}")
            y[partition.offsets[j] + np.asarray(a)] = 1.0 / len(a)
        return y

    @classmethod
    def from_vector(cls, y: np.ndarray, partition: Partition) -> "ExtendedRounding":
        return cls(tuple(tuple(np.flatnonzero(blk)) for blk in partition.blocks(np.asarray(y))))


# OBJECTIVE CONTRACT ===================================================================

class MCPPObjective(ABC):
    """Objective ``f`` that is affine in every block.

    Subclasses provide the flat vector of block gradients
    ``Phi^{(j)}_i = df/dx^{(j)}_i`` and the multilinear extension of ``f``.
    ``Phi^{(j)}`` must not depend on block ``j`` itself, so that
    ``f(y) = y^{(j)} . Phi^{(j)}(y) + f(y with block j zeroed)``.
    Instances are read-only after construction and may be shared between
    concurrent solver runs.
    """

    partition: Partition

    @abstractmethod
    def block_gradients(self, y: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def value(self, y: np.ndarray) -> float:
        ...

    def block_gradient(self, y: np.ndarray, j: int) -> np.ndarray:
        """``Phi^{(j)}(y)``; override when a single block is cheaper than all."""
        return self.partition.block(self.block_gradients(y), j)

    def gradient_cost(self) -> int:
        """Multiply-add count of one :meth:`block_gradients` call (0 if unknown)."""
        return 0


def rhs(y: np.ndarray, T: float, obj: MCPPObjective) -> np.ndarray:
    """Right-hand side ``-y + softmax(-Phi(y); 1/T)`` of the annealed ODE."""
    if not T > 0:
        raise InvalidInputError(f"temperature must be positive, got {T}")
    phi = obj.block_gradients(y)
    return softmax_blocks(-phi, obj.partition, 1.0 / T) - y


def rhs_operation_count(obj: MCPPObjective) -> int:
    # gradient, then per entry: negate/shift, exp, normalize, subtract state
    return obj.gradient_cost() + 4 * obj.partition.n


def residual_norm(F: np.ndarray) -> float:
    return float(np.max(np.abs(F)))
