"""Model parameters and bond configurations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import FiniteGraph


def p_critical(q: float) -> float:
    """Self-dual point ``sqrt(q) / (1 + sqrt(q))``."""
    s = math.sqrt(q)
    return s / (1.0 + s)


def dual_p(p: float, q: float) -> float:
    """Dual edge-weight ``q(1-p) / (p + q(1-p))``."""
    return q * (1.0 - p) / (p + q * (1.0 - p))


@dataclass(frozen=True)
class ModelParams:
    """Edge-weight ``p`` and cluster-weight ``q``."""

    p: float
    q: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")

    @classmethod
    def critical(cls, q: float) -> "ModelParams":
        return cls(p_critical(q), q)

    @property
    def p_c(self) -> float:
        return p_critical(self.q)

    @property
    def beta(self) -> float:
        """Potts inverse temperature ``-log(1 - p)``."""
        return math.inf if self.p == 1.0 else -math.log1p(-self.p)

    def dual(self) -> "ModelParams":
        return ModelParams(dual_p(self.p, self.q), self.q)

    def open_prob(self, connected: bool) -> float:
        """Conditional probability that an edge is open given the rest."""
        if connected:
            return self.p
        return self.p / (self.p + self.q * (1.0 - self.p))


@dataclass(frozen=True, eq=False)
class BondConfiguration:
    """One bit per edge of ``graph`` (1 = open)."""

    graph: FiniteGraph
    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=np.uint8).copy()
        if b.shape != (self.graph.n_edges,):
            raise ValueError("one bit per edge is required")
        if b.size and b.max() > 1:
            raise ValueError("bits must be 0 or 1")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @classmethod
    def all_open(cls, g: FiniteGraph) -> "BondConfiguration":
        return cls(g, np.ones(g.n_edges, dtype=np.uint8))

    @classmethod
    def all_closed(cls, g: FiniteGraph) -> "BondConfiguration":
        return cls(g, np.zeros(g.n_edges, dtype=np.uint8))

    @classmethod
    def from_int(cls, g: FiniteGraph, c: int) -> "BondConfiguration":
        """Edge ``i`` open iff bit ``i`` of ``c`` is set."""
        return cls(g, (c >> np.arange(g.n_edges)) & 1)

    @property
    def o(self) -> int:
        return int(self.bits.sum())

    @property
    def c(self) -> int:
        return self.graph.n_edges - self.o

    def __le__(self, other: "BondConfiguration") -> bool:
        return bool(np.all(self.bits <= other.bits))
