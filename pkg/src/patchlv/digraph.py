"""Weighted digraphs of patch networks and their combinatorial machinery.

The weight matrix convention throughout: ``a[i, j]`` is the rate of movement
from patch ``j`` to patch ``i``, so each positive entry ``a[i, j]`` is an arc
``j -> i`` carrying weight ``a[i, j]``. Vertices are 0-based in the Python
API and 1-based in the JSON interchange format.
"""

from collections import deque
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from . import _backend
from .errors import (
    CapExceeded,
    NotComplete,
    NotCycleBalanced,
    NotStronglyConnected,
    PairSumNegative,
)

CYCLE_ENUM_CAP = 8
UNICYCLIC_ENUM_CAP = 7
DEFAULT_REL_TOL = 1e-9


@dataclass(frozen=True)
class WeightedDigraph:
    """Patch network: n >= 2 vertices with nonnegative arc weights.

    ``weights[i, j]`` is the movement rate from patch j to patch i; the
    diagonal must be zero.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weight matrix must be square")
        if w.shape[0] < 2:
            raise ValueError("at least 2 patches required")
        if (w < 0).any():
            raise ValueError("arc weights must be nonnegative")
        if np.diag(w).any():
            raise ValueError("self-loops are not allowed (diagonal must be zero)")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def arc_count(self) -> int:
        return int(np.count_nonzero(self.weights))

    def arcs(self):
        """All arcs as (tail, head, weight) triples, sorted by (tail, head)."""
        heads, tails = np.nonzero(self.weights)
        out = [(int(t), int(h), float(self.weights[h, t])) for h, t in zip(heads, tails)]
        out.sort(key=lambda a: (a[0], a[1]))
        return out


def graph_from_json(obj) -> WeightedDigraph:
    """Build a digraph from ``{"n": int, "arcs": [{"from", "to", "weight"}]}``.

    Patch indices in the JSON form are 1-based.
    """
    n = int(obj["n"])
    w = np.zeros((n, n))
    for arc in obj["arcs"]:
        j = int(arc["from"]) - 1
        i = int(arc["to"]) - 1
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"arc endpoint out of range: {arc}")
        w[i, j] = float(arc["weight"])
    return WeightedDigraph(w)


def graph_to_json(g: WeightedDigraph) -> dict:
    return {
        "n": g.n,
        "arcs": [
            {"from": t + 1, "to": h + 1, "weight": w} for t, h, w in g.arcs()
        ],
    }


@dataclass(frozen=True)
class DirectedCycle:
    """Simple directed cycle, stored as the vertex sequence v1 -> v2 -> ... -> v1."""

    vertices: tuple
    weight: float


@dataclass(frozen=True)
class UnicyclicSubdigraph:
    """Spanning subdigraph in which every vertex is the head of exactly one
    arc and exactly one directed cycle exists."""

    arcs: tuple  # (tail, head) pairs, one per vertex, sorted by head
    weight: float
    cycle_arcs: tuple  # the arcs of the unique directed cycle


@dataclass(frozen=True)
class CycleViolation:
    vertices: tuple
    forward_weight: float
    reverse_weight: Optional[float]  # None when the reversed cycle is absent


@dataclass(frozen=True)
class CycleBalanceCertificate:
    balanced: bool
    potential: Optional[np.ndarray] = None
    violation: Optional[CycleViolation] = None

    def to_json(self) -> dict:
        if self.balanced:
            return {"balanced": True, "potential": list(map(float, self.potential))}
        v = self.violation
        return {
            "balanced": False,
            "violation": {
                "cycle": [int(x) + 1 for x in v.vertices],
                "forward_weight": v.forward_weight,
                "reverse_weight": v.reverse_weight,
            },
        }


def _successors(g: WeightedDigraph):
    # out-neighbors of j are the positive entries of column j
    return [np.flatnonzero(g.weights[:, j] > 0).tolist() for j in range(g.n)]


def _reachable(succ, start, n):
    seen = [False] * n
    seen[start] = True
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in succ[v]:
            if not seen[w]:
                seen[w] = True
                queue.append(w)
    return seen


def is_strongly_connected(g: WeightedDigraph) -> bool:
    """True iff every ordered vertex pair is joined by a directed path."""
    succ = _successors(g)
    if not all(_reachable(succ, 0, g.n)):
        return False
    pred = [np.flatnonzero(g.weights[j, :] > 0).tolist() for j in range(g.n)]
    return all(_reachable(pred, 0, g.n))


def is_sign_pattern_symmetric(g: WeightedDigraph) -> bool:
    """True iff a[i,j] > 0 exactly when a[j,i] > 0."""
    pos = g.weights > 0
    return bool((pos == pos.T).all())


def cycle_weight(g: WeightedDigraph, vertices) -> Optional[float]:
    """Product of arc weights along the cycle v1 -> v2 -> ... -> v1.

    Returns None if any required arc is missing.
    """
    a = g.weights
    w = 1.0
    k = len(vertices)
    for m in range(k):
        tail = vertices[m]
        head = vertices[(m + 1) % k]
        if a[head, tail] <= 0:
            return None
        w *= a[head, tail]
    return w


def enumerate_cycles(g: WeightedDigraph, cap: int = CYCLE_ENUM_CAP):
    """All simple directed cycles (length >= 2) with their weights.

    Cycles are reported as vertex tuples starting at their smallest vertex,
    in lexicographic order.
    """
    if g.n > cap:
        raise CapExceeded(f"cycle enumeration capped at n={cap}, got n={g.n}")
    succ = _successors(g)
    cycles = []
    path = []
    onpath = [False] * g.n

    def extend(v, start):
        for w in succ[v]:
            if w == start and len(path) >= 2:
                cycles.append(tuple(path))
            elif w > start and not onpath[w]:
                path.append(w)
                onpath[w] = True
                extend(w, start)
                path.pop()
                onpath[w] = False

    for s in range(g.n):
        path = [s]
        onpath = [False] * g.n
        onpath[s] = True
        extend(s, s)
    return [DirectedCycle(c, cycle_weight(g, c)) for c in cycles]


def _bfs_skeleton_tree(g: WeightedDigraph):
    """BFS spanning tree of the undirected skeleton (pairs with both arcs).

    Returns (parent, visit_order); root 0 has parent -1. Assumes sign-pattern
    symmetry and strong connectivity, so the skeleton is connected.
    """
    a = g.weights
    parent = [-1] * g.n
    seen = [False] * g.n
    seen[0] = True
    queue = deque([0])
    order = []
    while queue:
        v = queue.popleft()
        order.append(v)
        for w in range(g.n):
            if not seen[w] and a[w, v] > 0 and a[v, w] > 0:
                seen[w] = True
                parent[w] = v
                queue.append(w)
    return parent, order


def _tree_path(parent, u, v):
    """Vertex path from u to v along the tree given by ``parent``."""
    anc_u = [u]
    while parent[anc_u[-1]] >= 0:
        anc_u.append(parent[anc_u[-1]])
    index_u = {x: k for k, x in enumerate(anc_u)}
    walk = [v]
    while walk[-1] not in index_u:
        walk.append(parent[walk[-1]])
    lca = walk[-1]
    return anc_u[: index_u[lca] + 1] + walk[:-1][::-1]


def _shortest_directed_path(g: WeightedDigraph, start, goal):
    succ = _successors(g)
    prev = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        if v == goal:
            break
        for w in succ[v]:
            if w not in prev:
                prev[w] = v
                queue.append(w)
    path = [goal]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def certify_cycle_balance(
    g: WeightedDigraph, tol: float = DEFAULT_REL_TOL
) -> CycleBalanceCertificate:
    """Decide cycle balance: every directed cycle has its reverse present
    with equal weight product.

    Uses the detailed-balance characterization: balance holds iff the sign
    pattern is symmetric and a positive potential s with
    a[i,j]*s[j] == a[j,i]*s[i] exists on every arc. The potential is built
    over a BFS spanning tree of the skeleton and verified on all remaining
    arcs; a failed arc yields an explicit violating cycle through the tree.
    """
    if not is_strongly_connected(g):
        raise NotStronglyConnected("cycle-balance certification needs strong connectivity")
    a = g.weights
    n = g.n

    for i in range(n):
        for j in range(i + 1, n):
            if (a[i, j] > 0) != (a[j, i] > 0):
                # one-way pair: any cycle through the arc has no reverse
                tail, head = (j, i) if a[i, j] > 0 else (i, j)
                back = _shortest_directed_path(g, head, tail)
                cyc = tuple([tail] + back[:-1])
                return CycleBalanceCertificate(
                    balanced=False,
                    violation=CycleViolation(cyc, cycle_weight(g, cyc), None),
                )

    parent, order = _bfs_skeleton_tree(g)
    s = np.zeros(n)
    s[0] = 1.0
    for v in order:
        u = parent[v]
        if u >= 0:
            s[v] = s[u] * a[v, u] / a[u, v]

    for i in range(n):
        for j in range(i + 1, n):
            if a[i, j] > 0:
                lhs = a[i, j] * s[j]
                rhs = a[j, i] * s[i]
                if abs(lhs - rhs) > tol * (lhs + rhs):
                    path = _tree_path(parent, j, i)
                    cyc = tuple([i] + path[:-1])
                    wf = cycle_weight(g, cyc)
                    wr = cycle_weight(g, cyc[::-1])
                    return CycleBalanceCertificate(
                        balanced=False,
                        violation=CycleViolation(cyc, wf, wr),
                    )
    return CycleBalanceCertificate(balanced=True, potential=s)


def check_3cycle_balance(g: WeightedDigraph, tol: float = DEFAULT_REL_TOL) -> bool:
    """Triangle test on complete digraphs: every 3-cycle weight equals the
    weight of its reverse. Equivalent to full cycle balance on complete
    digraphs with n >= 3.
    """
    a = g.weights
    n = g.n
    if n < 3 or not (a[~np.eye(n, dtype=bool)] > 0).all():
        raise NotComplete("triangle test needs a complete digraph with n >= 3")
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                fwd = a[i, j] * a[j, k] * a[k, i]
                rev = a[i, k] * a[k, j] * a[j, i]
                if abs(fwd - rev) > tol * (fwd + rev):
                    return False
    return True


def _in_arc_choices(g: WeightedDigraph):
    # candidate tails for the single in-arc of each vertex
    return [np.flatnonzero(g.weights[i] > 0).tolist() for i in range(g.n)]


def _single_cycle_of(tails, n):
    """Vertices of the unique cycle of the map i -> tails[i], or None if the
    functional graph has more or fewer than one cycle."""
    seen = [False] * n
    onpath = [-1] * n
    entry = -1
    for start in range(n):
        if seen[start]:
            continue
        cur = start
        while not seen[cur] and onpath[cur] != start:
            onpath[cur] = start
            cur = tails[cur]
        if not seen[cur]:
            if entry >= 0:
                return None  # second cycle
            entry = cur
        cur = start
        while not seen[cur]:
            seen[cur] = True
            cur = tails[cur]
    if entry < 0:
        return None
    cyc = [entry]
    cur = tails[entry]
    while cur != entry:
        cyc.append(cur)
        cur = tails[cur]
    return cyc


def enumerate_spanning_unicyclic(
    g: WeightedDigraph, cap: int = UNICYCLIC_ENUM_CAP
):
    """All spanning subdigraphs in which every vertex has in-degree exactly
    one and exactly one directed cycle exists.

    Iterates over all in-arc assignments (tail choice per vertex), keeping
    the connected single-cycle ones. A spanning directed cycle (every tree
    reduced to its root) counts.
    """
    if g.n > cap:
        raise CapExceeded(f"unicyclic enumeration capped at n={cap}, got n={g.n}")
    a = g.weights
    n = g.n
    choices = _in_arc_choices(g)
    if any(not ch for ch in choices):
        return []
    out = []
    for tails in product(*choices):
        cyc = _single_cycle_of(tails, n)
        if cyc is None:
            continue
        w = 1.0
        for i in range(n):
            w *= a[i, tails[i]]
        out.append(
            UnicyclicSubdigraph(
                arcs=tuple((tails[i], i) for i in range(n)),
                weight=w,
                cycle_arcs=tuple((tails[i], i) for i in cyc),
            )
        )
    return out


def laplacian_cofactors(g: WeightedDigraph) -> np.ndarray:
    """Diagonal cofactors of the row Laplacian; the left null vector.

    For a strongly connected digraph all entries are positive and the row
    vector annihilates the row Laplacian.
    """
    if not is_strongly_connected(g):
        raise NotStronglyConnected("cofactor vector needs strong connectivity")
    a = g.weights
    lap = np.diag(a.sum(axis=1)) - a
    n = g.n
    alpha = np.empty(n)
    idx = np.arange(n)
    for i in range(n):
        keep = idx != i
        alpha[i] = np.linalg.det(lap[np.ix_(keep, keep)])
    return alpha


def tree_cycle_identity(g: WeightedDigraph, F, cap: int = UNICYCLIC_ENUM_CAP):
    """Evaluate both sides of the cofactor/unicyclic-cover identity.

    Left side: sum over ordered pairs of alpha_i * a[i,j] * F[i,j]. Right
    side: sum over spanning unicyclic subdigraphs of weight times the sum of
    F over the arcs of the unique cycle (F indexed as F[tail, head]).
    Returns (lhs, rhs); the two agree up to floating-point error.
    """
    if g.n > cap:
        raise CapExceeded(f"identity evaluation capped at n={cap}, got n={g.n}")
    alpha = laplacian_cofactors(g)  # raises NotStronglyConnected
    F = np.asarray(F, dtype=float)
    lhs = float(np.sum(alpha[:, None] * g.weights * F))
    a = np.ascontiguousarray(g.weights)
    rhs, _ = _backend.tree_cycle_rhs(a, np.ascontiguousarray(F))
    return lhs, float(rhs)


def symmetrized_sum(g: WeightedDigraph, F, tol: float = DEFAULT_REL_TOL) -> float:
    """Cofactor-weighted double sum of F over the arcs of a cycle-balanced
    digraph.

    Requires F[i,j] + F[j,i] >= 0 for all pairs; the result is then
    nonnegative, vanishing exactly when every pair sum on an arc is zero.
    """
    cert = certify_cycle_balance(g, tol)
    if not cert.balanced:
        raise NotCycleBalanced("symmetrized sum requires a cycle-balanced digraph")
    F = np.asarray(F, dtype=float)
    n = g.n
    for i in range(n):
        for j in range(i + 1, n):
            pair = F[i, j] + F[j, i]
            if pair < -1e-12 * (1.0 + abs(F[i, j]) + abs(F[j, i])):
                raise PairSumNegative(f"F[{i},{j}] + F[{j},{i}] = {pair} < 0")
    alpha = laplacian_cofactors(g)
    return float(np.sum(alpha[:, None] * g.weights * F))
