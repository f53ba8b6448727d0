"""Directed tail-causality networks and their topology metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations
from math import comb

import numpy as np

from .causality import bh_fdr, decimate_vdar1, hong_test, lr_tail_test
from .core import as_panel


@dataclass(frozen=True)
class CausalityNetwork:
    """Directed graph over labelled nodes; an edge ``(a, b)`` reads ``a -> b``."""

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    method: str = ""
    diagnostics: tuple[str, ...] = field(default=())

    def __post_init__(self):
        nodes = tuple(self.nodes)
        if len(set(nodes)) != len(nodes):
            raise ValueError("node labels must be distinct")
        edges = frozenset((str(a), str(b)) for a, b in self.edges)
        known = set(nodes)
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-loop on {a!r}")
            if a not in known or b not in known:
                raise ValueError(f"edge ({a!r}, {b!r}) has an undeclared endpoint")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))

    @property
    def N(self) -> int:
        return len(self.nodes)

    def adjacency(self) -> np.ndarray:
        """Boolean matrix with ``A[a, b]`` true for an edge ``a -> b``."""
        idx = {n: k for k, n in enumerate(self.nodes)}
        A = np.zeros((self.N, self.N), dtype=bool)
        for a, b in self.edges:
            A[idx[a], idx[b]] = True
        return A


def build_pairwise_network(panel, method: str = "lr", level: float = 0.05,
                           p_max_or_M: int = 3) -> CausalityNetwork:
    """Test all ``N(N-1)`` ordered pairs and keep the BH-FDR survivors.

    ``p_max_or_M`` is the BIC search bound for ``lr`` and the bandwidth for
    ``hong``. Pairs whose test raises are left out and reported in
    ``diagnostics``.
    """
    panel = as_panel(panel)
    if panel.N < 2:
        raise ValueError("network needs at least two series")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if method == "lr":
        run = lambda x, y: lr_tail_test(x, y, p_max_or_M)
    elif method == "hong":
        run = lambda x, y: hong_test(x, y, p_max_or_M)
    else:
        raise ValueError(f"unknown method {method!r}")
    pairs, pvals, diag = [], [], []
    for j, i in permutations(range(panel.N), 2):
        try:
            res = run(panel[i], panel[j])
        except (ValueError, RuntimeError) as exc:
            diag.append(f"{panel.labels[j]}->{panel.labels[i]}: {exc}")
            continue
        pairs.append((panel.labels[j], panel.labels[i]))
        pvals.append(res.p_value)
    rejected = bh_fdr(pvals, level) if pvals else set()
    return CausalityNetwork(panel.labels, frozenset(pairs[k] for k in rejected),
                            f"pairwise-{method}", tuple(diag))


def build_multivariate_network(panel) -> CausalityNetwork:
    """Edges ``j -> i`` for every nonzero off-diagonal decimated coupling ``(i, j)``."""
    panel = as_panel(panel)
    dec = decimate_vdar1(panel)
    labels = panel.labels
    edges = frozenset((labels[j], labels[i]) for j, i in dec.edges())
    return CausalityNetwork(labels, edges, "decimation")


# -- metrics -----------------------------------------------------------------------

def link_density(g: CausalityNetwork) -> float:
    """Fraction of the ``N(N-1)`` possible directed links present."""
    if g.N < 2:
        return 0.0
    return len(g.edges) / (g.N * (g.N - 1))


def reciprocity(g: CausalityNetwork) -> float:
    """Share of links whose reverse link is also present (0 for an empty graph)."""
    if not g.edges:
        return 0.0
    mutual = sum((b, a) in g.edges for a, b in g.edges)
    return mutual / len(g.edges)


def triangle_density(g: CausalityNetwork) -> float:
    """Closed triplets of the undirected skeleton over all ``C(N, 3)`` triplets."""
    if g.N < 3:
        return 0.0
    A = g.adjacency()
    S = (A | A.T).astype(np.int64)
    # trace(S^3) counts every undirected triangle six times
    closed = int(np.trace(S @ S @ S)) // 6
    return closed / comb(g.N, 3)


def jaccard(g1: CausalityNetwork, g2: CausalityNetwork) -> float:
    """Jaccard similarity of the directed edge sets (0 when both are empty)."""
    if set(g1.nodes) != set(g2.nodes):
        raise ValueError("networks must share the same node set")
    union = g1.edges | g2.edges
    if not union:
        return 0.0
    return len(g1.edges & g2.edges) / len(union)


def metrics(g: CausalityNetwork) -> dict[str, float]:
    return {
        "density": link_density(g),
        "reciprocity": reciprocity(g),
        "triangle_density": triangle_density(g),
    }
