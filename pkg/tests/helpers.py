"""Shared generators for randomized tests.

All generators take an explicit ``numpy.random.Generator`` so every test is
reproducible from its own seed.
"""

import numpy as np

from patchlv import PatchSystem, WeightedDigraph


def random_strongly_connected(rng, n, density=0.5, w_lo=0.1, w_hi=3.0):
    """Random digraph made strongly connected by overlaying a random
    permutation cycle."""
    W = rng.uniform(w_lo, w_hi, (n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(W, 0.0)
    perm = rng.permutation(n)
    for k in range(n):
        i, j = perm[(k + 1) % n], perm[k]
        if W[i, j] == 0:
            W[i, j] = rng.uniform(w_lo, w_hi)
    return WeightedDigraph(W)


def random_tree_pairs(rng, n):
    """Edge list of a random labelled tree on n vertices."""
    edges = []
    for v in range(1, n):
        edges.append((int(rng.integers(0, v)), v))
    return edges


def random_cycle_balanced(rng, n, extra=0.4):
    """Cycle-balanced digraph from a detailed-balance potential.

    A random bidirectional tree guarantees strong connectivity; extra pairs
    are added with weights consistent with the same potential, so every
    cycle stays balanced.
    """
    s = rng.uniform(0.5, 2.0, n)
    W = np.zeros((n, n))
    pairs = set(random_tree_pairs(rng, n))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in pairs and rng.random() < extra:
                pairs.add((i, j))
    for i, j in pairs:
        m = rng.uniform(0.2, 2.0)
        W[i, j] = m * s[i] / s[j]
        W[j, i] = m * s[j] / s[i]
    return WeightedDigraph(W)


def random_bidirectional_tree(rng, n, w_lo=0.1, w_hi=3.0):
    """Bidirectional tree with independent weights per direction; balanced
    because every cycle has two vertices."""
    W = np.zeros((n, n))
    for i, j in random_tree_pairs(rng, n):
        W[i, j] = rng.uniform(w_lo, w_hi)
        W[j, i] = rng.uniform(w_lo, w_hi)
    return WeightedDigraph(W)


def random_complete(rng, n, w_lo=0.1, w_hi=3.0):
    W = rng.uniform(w_lo, w_hi, (n, n))
    np.fill_diagonal(W, 0.0)
    return WeightedDigraph(W)


def detailed_balance_complete(rng, n):
    """Complete digraph with weights s_i/s_j; certified balanced by
    construction."""
    s = rng.uniform(0.5, 2.0, n)
    W = s[:, None] / s[None, :]
    np.fill_diagonal(W, 0.0)
    return WeightedDigraph(W)


def random_balanced_system(rng, n, bc_below_one=True):
    """PatchSystem on a random cycle-balanced graph with random parameters."""
    g = (
        random_cycle_balanced(rng, n)
        if rng.random() < 0.5
        else random_bidirectional_tree(rng, n)
    )
    p = rng.uniform(0.5, 2.0, n)
    q = rng.uniform(0.5, 2.0, n)
    if bc_below_one:
        b = rng.uniform(0.2, 0.95)
        c = rng.uniform(0.2, min(0.95 / b, 2.0))
    else:
        b = rng.uniform(0.2, 1.5)
        c = rng.uniform(0.2, 1.5)
    mu_u = float(10.0 ** rng.uniform(-2, 1))
    mu_v = float(10.0 ** rng.uniform(-2, 1))
    return PatchSystem(g, p, q, float(b), float(c), mu_u, mu_v)


def degenerate_system(rng, n, c=2.0, mu=0.8):
    """System with b*c = 1 whose one-species profiles match through c, so the
    equilibrium set is a whole segment."""
    from patchlv import SinglePatchParams, connection_matrix, single_equilibrium

    g = random_cycle_balanced(rng, n)
    p = rng.uniform(0.8, 1.8, n)
    u_star = single_equilibrium(SinglePatchParams(g, mu, p))
    w = u_star / c
    L = connection_matrix(g)
    q = w - mu * (L @ w) / w
    if (q <= 0).any():
        # with c >= 1 this cannot happen; guard for unusual draws
        raise ValueError("derived growth vector not positive")
    return PatchSystem(g, p, q, 1.0 / c, c, mu, mu)


def reference_sweep_system():
    """Two symmetric patches with strongly uneven shared resources; the
    dispersal plane splits into all three interior regions."""
    g = WeightedDigraph(np.array([[0.0, 1.0], [1.0, 0.0]]))
    r = np.array([0.5, 3.0])
    return PatchSystem(g, r, r, 0.95, 0.95, 1.0, 1.0)
