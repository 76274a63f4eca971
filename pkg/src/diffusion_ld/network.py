"""Topologies and doubly-stochastic combination matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TopologyError",
    "Topology",
    "CombinationMatrix",
    "DEFAULT10_EDGES",
    "default_topology",
    "full_topology",
    "path_topology",
    "laplacian_weights",
    "uniform_matrix",
    "matrix_power_row",
    "perron_envelope",
]

STOCHASTIC_TOL = 1e-12
# matrix-power deviations this small are rounding, not transient
_ROUNDING_FLOOR = 64 * np.finfo(float).eps

#: Benchmark graph: ring 1-...-10-1 plus five chords (1-based labels).
DEFAULT10_EDGES = tuple(
    [(k, k % 10 + 1) for k in range(1, 11)]
    + [(1, 3), (3, 5), (3, 6), (3, 10), (5, 7)]
)


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    """Undirected graph on sensors ``0..S-1``; edges are unordered pairs."""

    S: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.S < 1:
            raise TopologyError("a topology needs at least one sensor")
        norm = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise TopologyError(f"self-loop on sensor {a + 1} is not allowed")
            if not (0 <= a < self.S and 0 <= b < self.S):
                raise TopologyError(f"edge ({a + 1}, {b + 1}) outside 1..{self.S}")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_one_based(cls, S, pairs):
        return cls(int(S), frozenset((int(a) - 1, int(b) - 1) for a, b in pairs))

    def adjacency(self):
        adj = np.zeros((self.S, self.S))
        for a, b in self.edges:
            adj[a, b] = adj[b, a] = 1.0
        return adj

    def degrees(self):
        return self.adjacency().sum(axis=1).astype(int)

    def components(self):
        """Connected components as sorted lists of 0-based sensor indices."""
        nbrs = {k: set() for k in range(self.S)}
        for a, b in self.edges:
            nbrs[a].add(b)
            nbrs[b].add(a)
        seen, comps = set(), []
        for start in range(self.S):
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                k = stack.pop()
                comp.append(k)
                for j in nbrs[k] - seen:
                    seen.add(j)
                    stack.append(j)
            comps.append(sorted(comp))
        return comps

    def check_connected(self):
        comps = self.components()
        if len(comps) > 1:
            named = "; ".join("{" + ", ".join(str(k + 1) for k in c) + "}" for c in comps)
            raise TopologyError(f"graph is disconnected, components: {named}")


def default_topology():
    return Topology.from_one_based(10, DEFAULT10_EDGES)


def full_topology(S):
    return Topology(S, frozenset((a, b) for a in range(S) for b in range(a + 1, S)))


def path_topology(S):
    return Topology(S, frozenset((k, k + 1) for k in range(S - 1)))


def _second_eigenvalue_magnitude(w):
    S = w.shape[0]
    if S == 1:
        return 0.0
    if np.array_equal(w, w.T):
        eig = np.linalg.eigvalsh(w)
    else:
        eig = np.linalg.eigvals(w)
    mags = np.sort(np.abs(eig))[::-1]
    return float(mags[1])


@dataclass(frozen=True, eq=False)
class CombinationMatrix:
    """Validated doubly-stochastic weights ``a[k, l]`` with their ``lambda2``.

    Construct through :meth:`from_weights` (validates and computes the
    spectrum) or one of the builders in this module.
    """

    weights: np.ndarray
    lambda2: float

    @classmethod
    def from_weights(cls, weights, topology=None):
        w = np.array(weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise TopologyError(f"combination matrix must be square, got shape {w.shape}")
        if np.any(w < 0):
            raise TopologyError("combination weights must be nonnegative")
        row = np.abs(w.sum(axis=1) - 1.0).max()
        col = np.abs(w.sum(axis=0) - 1.0).max()
        if row > STOCHASTIC_TOL or col > STOCHASTIC_TOL:
            raise TopologyError(
                f"matrix is not doubly stochastic (row err {row:.3g}, col err {col:.3g})")
        if topology is not None:
            if topology.S != w.shape[0]:
                raise TopologyError("matrix size does not match the topology")
            allowed = topology.adjacency() + np.eye(topology.S)
            bad = np.argwhere((allowed == 0) & (w != 0))
            if len(bad):
                k, l = bad[0]
                raise TopologyError(f"nonzero weight a[{k + 1},{l + 1}] on a non-edge")
        lam2 = _second_eigenvalue_magnitude(w)
        if w.shape[0] > 1 and not lam2 < 1.0:
            raise TopologyError(f"second eigenvalue magnitude {lam2:.6g} is not below 1")
        w.setflags(write=False)
        return cls(w, lam2)

    @property
    def S(self):
        return self.weights.shape[0]

    def __eq__(self, other):
        if not isinstance(other, CombinationMatrix):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    __hash__ = None


def laplacian_weights(topology):
    """Laplacian rule: ``1/d_max`` on edges, ``1 - deg/d_max`` on the diagonal."""
    topology.check_connected()
    adj = topology.adjacency()
    deg = adj.sum(axis=1)
    dmax = deg.max()
    if dmax == 0:  # single sensor
        return CombinationMatrix.from_weights(np.ones((1, 1)))
    w = adj / dmax
    w[np.diag_indices_from(w)] = 1.0 - deg / dmax
    return CombinationMatrix.from_weights(w, topology)


def uniform_matrix(S):
    """Fully connected network with weights ``1/S`` (the centralised emulation)."""
    return CombinationMatrix.from_weights(np.full((S, S), 1.0 / S))


def _weights(A):
    return A.weights if isinstance(A, CombinationMatrix) else np.asarray(A, dtype=float)


def matrix_power_row(A, n, k):
    """Row ``k`` of ``A**n`` computed by repeated squaring."""
    if n < 0:
        raise ValueError("matrix power must be nonnegative")
    w = _weights(A)
    result = np.eye(w.shape[0])
    base = w.copy()
    while n:
        if n & 1:
            result = result @ base
        base = base @ base
        n >>= 1
    return result[k].copy()


def perron_envelope(A, n_max):
    """Return ``(C, lam)`` with ``lam = (1 + lambda2)/2`` and the smallest ``C``
    such that ``max |b_kl(i) - 1/S| <= C lam**i`` for ``1 <= i <= n_max``."""
    w = _weights(A)
    lam2 = A.lambda2 if isinstance(A, CombinationMatrix) else _second_eigenvalue_magnitude(w)
    lam = 0.5 * (1.0 + lam2)
    S = w.shape[0]
    b = np.eye(S)
    c = 0.0
    for i in range(1, n_max + 1):
        b = b @ w
        dev = np.abs(b - 1.0 / S).max()
        if dev <= _ROUNDING_FLOOR:
            continue  # b(i) equals 1/S up to rounding
        c = max(c, dev / lam**i)
    return c, lam
