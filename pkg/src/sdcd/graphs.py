"""Binary directed-graph utilities: acyclicity, thresholding, greedy DAG
trimming, Markov boundaries, and CPDAG conversion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DiGraph",
    "Pdag",
    "cpdag",
    "dag_trim",
    "is_acyclic",
    "load_graph_csv",
    "markov_boundary",
    "save_graph_csv",
    "threshold",
    "topological_order",
]


@dataclass(frozen=True)
class DiGraph:
    """Directed graph on d nodes; edges are ordered (src, dst) pairs."""

    d: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        object.__setattr__(self, "edges", edges)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop {i}->{j} not allowed")
            if not (0 <= i < self.d and 0 <= j < self.d):
                raise ValueError(f"edge ({i},{j}) out of range for d={self.d}")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def parents(self, j: int) -> set:
        return {i for i, k in self.edges if k == j}

    def children(self, j: int) -> set:
        return {k for i, k in self.edges if i == j}

    def to_matrix(self) -> np.ndarray:
        a = np.zeros((self.d, self.d))
        for i, j in self.edges:
            a[i, j] = 1.0
        return a


@dataclass(frozen=True)
class Pdag:
    """Partially directed graph: directed pairs plus undirected pairs."""

    d: int
    directed: frozenset = field(default_factory=frozenset)
    undirected: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        directed = frozenset((int(i), int(j)) for i, j in self.directed)
        undirected = frozenset(
            frozenset((int(i), int(j))) for i, j in self.undirected
        )
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)


def is_acyclic(g: DiGraph) -> bool:
    """Kahn's algorithm with deterministic (ascending node id) ordering."""
    indeg = [0] * g.d
    succ = [[] for _ in range(g.d)]
    for i, j in sorted(g.edges):
        indeg[j] += 1
        succ[i].append(j)
    stack = [v for v in range(g.d - 1, -1, -1) if indeg[v] == 0]
    seen = 0
    while stack:
        v = stack.pop()
        seen += 1
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    return seen == g.d


def topological_order(g: DiGraph) -> list:
    if not is_acyclic(g):
        raise ValueError("graph has a cycle")
    indeg = [0] * g.d
    succ = [[] for _ in range(g.d)]
    for i, j in sorted(g.edges):
        indeg[j] += 1
        succ[i].append(j)
    order, stack = [], [v for v in range(g.d - 1, -1, -1) if indeg[v] == 0]
    while stack:
        v = stack.pop()
        order.append(v)
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    return order


def threshold(a: np.ndarray, tau: float) -> DiGraph:
    """Keep off-diagonal entries with weight >= tau as edges."""
    a = np.asarray(a, dtype=np.float64)
    d = a.shape[0]
    edges = {
        (i, j)
        for i in range(d)
        for j in range(d)
        if i != j and a[i, j] >= tau
    }
    return DiGraph(d, frozenset(edges))


def _creates_cycle(succ: list, i: int, j: int) -> bool:
    """Would adding i -> j close a cycle, i.e. is i reachable from j?"""
    stack, seen = [j], {j}
    while stack:
        v = stack.pop()
        if v == i:
            return True
        for w in succ[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return False


def dag_trim(a: np.ndarray, tau: float) -> DiGraph:
    """Greedy heaviest-first edge selection guaranteeing an acyclic result.

    Candidates are off-diagonal entries strictly above tau, sorted by
    decreasing weight with lexicographic (i, j) tie-breaking; each is kept
    only if the partial graph stays acyclic.
    """
    a = np.asarray(a, dtype=np.float64)
    d = a.shape[0]
    candidates = [
        (i, j) for i in range(d) for j in range(d) if i != j and a[i, j] > tau
    ]
    candidates.sort(key=lambda e: (-a[e[0], e[1]], e[0], e[1]))
    succ = [set() for _ in range(d)]
    edges = set()
    for i, j in candidates:
        if not _creates_cycle(succ, i, j):
            succ[i].add(j)
            edges.add((i, j))
    return DiGraph(d, frozenset(edges))


def markov_boundary(g: DiGraph, j: int) -> set:
    """Parents, children, and children's other parents of node j."""
    if not (0 <= j < g.d):
        raise ValueError(f"node {j} out of range for d={g.d}")
    pa = g.parents(j)
    ch = g.children(j)
    spouses = set()
    for c in ch:
        spouses |= g.parents(c)
    return (pa | ch | spouses) - {j}


def _meek_closure(d: int, directed: set, undirected: set) -> tuple:
    """Apply Meek rules R1-R4 until fixpoint."""

    def adjacent(x, y):
        return (
            (x, y) in directed
            or (y, x) in directed
            or frozenset((x, y)) in undirected
        )

    changed = True
    while changed:
        changed = False
        for pair in sorted(tuple(sorted(p)) for p in undirected):
            for a, b in (pair, pair[::-1]):
                orient = False
                # R1: c -> a, a - b, c and b nonadjacent  =>  a -> b
                for c in range(d):
                    if (c, a) in directed and c != b and not adjacent(c, b):
                        orient = True
                        break
                # R2: a -> c -> b with a - b  =>  a -> b
                if not orient:
                    for c in range(d):
                        if (a, c) in directed and (c, b) in directed:
                            orient = True
                            break
                # R3: a - c -> b and a - e -> b with c, e nonadjacent
                if not orient:
                    cands = [
                        c
                        for c in range(d)
                        if frozenset((a, c)) in undirected
                        and (c, b) in directed
                    ]
                    for x in range(len(cands)):
                        for y in range(x + 1, len(cands)):
                            if not adjacent(cands[x], cands[y]):
                                orient = True
                                break
                        if orient:
                            break
                # R4: a - c, c -> e, e -> b, c and b nonadjacent,
                #     a and e adjacent  =>  a -> b
                if not orient:
                    for c in range(d):
                        if frozenset((a, c)) not in undirected:
                            continue
                        if adjacent(c, b):
                            continue
                        for e in range(d):
                            if (
                                (c, e) in directed
                                and (e, b) in directed
                                and adjacent(a, e)
                            ):
                                orient = True
                                break
                        if orient:
                            break
                if orient:
                    undirected.discard(frozenset((a, b)))
                    directed.add((a, b))
                    changed = True
                    break
            if changed:
                break
    return directed, undirected


def cpdag(g: DiGraph) -> Pdag:
    """Completed PDAG of a DAG: v-structures kept, Meek closure applied."""
    if not is_acyclic(g):
        raise ValueError("cpdag requires an acyclic input graph")

    def adjacent(x, y):
        return (x, y) in g.edges or (y, x) in g.edges

    # Orient edges that participate in a v-structure i -> k <- j.
    directed = set()
    for k in range(g.d):
        pa = sorted(g.parents(k))
        for x in range(len(pa)):
            for y in range(x + 1, len(pa)):
                if not adjacent(pa[x], pa[y]):
                    directed.add((pa[x], k))
                    directed.add((pa[y], k))
    undirected = {
        frozenset((i, j)) for i, j in g.edges if (i, j) not in directed
    }
    directed, undirected = _meek_closure(g.d, directed, undirected)
    return Pdag(g.d, frozenset(directed), frozenset(undirected))


def save_graph_csv(g: DiGraph, path) -> None:
    """Write a graph as a 'src,dst' edge-list CSV."""
    with open(path, "w") as fh:
        fh.write("src,dst\n")
        for i, j in sorted(g.edges):
            fh.write(f"{i},{j}\n")


def load_graph_csv(path, d: int | None = None) -> DiGraph:
    """Read a graph CSV; auto-detects edge list vs dense 0/1 matrix.

    An edge list starts with the literal header 'src,dst'; anything else is
    parsed as a dense matrix (one row per line, optional header). For edge
    lists, d defaults to max node index + 1.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"empty graph file: {path}")
    if lines[0].replace(" ", "") == "src,dst":
        edges = set()
        for ln in lines[1:]:
            i, j = ln.split(",")
            edges.add((int(i), int(j)))
        if d is None:
            d = max((max(i, j) for i, j in edges), default=-1) + 1
        return DiGraph(d, frozenset(edges))
    rows = lines
    try:
        float(lines[0].split(",")[0])
    except ValueError:
        rows = lines[1:]  # dense matrix with a column-name header
    a = np.asarray(
        [[float(tok) for tok in ln.split(",")] for ln in rows]
    )
    if d is not None and a.shape[0] != d:
        raise ValueError(f"matrix size {a.shape[0]} != expected d={d}")
    return threshold(a, 0.5)
