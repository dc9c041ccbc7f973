"""Pure NumPy implementations of the hot kernels.

Fallback backend used when the compiled extension is unavailable (or when
PATCHLV_PURE is set). Function signatures and semantics mirror
``patchlv._kernels`` exactly; see ``patchlv._backend`` for selection.
"""

from itertools import product

import numpy as np

BLOWUP_LIMIT = 1e12


def rk4_two_span(L, mu_u, mu_v, p, q, b, c, y0, nsteps, dt):
    """Advance the two-species system ``nsteps`` RK4 steps of size ``dt``.

    ``y0`` is the packed state [u_1..u_n, v_1..v_n]. Negative components are
    clipped to zero after each step. Returns (y, nclips, max_neg, blown)
    where max_neg is the largest clipped magnitude and blown flags
    non-finite or > BLOWUP_LIMIT states.
    """
    n = L.shape[0]
    u = np.array(y0[:n], dtype=float)
    v = np.array(y0[n:], dtype=float)
    nclips = 0
    max_neg = 0.0

    def f(uu, vv):
        du = mu_u * (L @ uu) + uu * (p - uu - c * vv)
        dv = mu_v * (L @ vv) + vv * (q - b * uu - vv)
        return du, dv

    half = 0.5 * dt
    sixth = dt / 6.0
    for _ in range(nsteps):
        k1u, k1v = f(u, v)
        k2u, k2v = f(u + half * k1u, v + half * k1v)
        k3u, k3v = f(u + half * k2u, v + half * k2v)
        k4u, k4v = f(u + dt * k3u, v + dt * k3v)
        u = u + sixth * (k1u + 2.0 * (k2u + k3u) + k4u)
        v = v + sixth * (k1v + 2.0 * (k2v + k3v) + k4v)
        for arr in (u, v):
            neg = arr < 0.0
            if neg.any():
                max_neg = max(max_neg, float(-arr[neg].min()))
                nclips += int(neg.sum())
                arr[neg] = 0.0
        if not (np.isfinite(u).all() and np.isfinite(v).all()) or max(
            u.max(initial=0.0), v.max(initial=0.0)
        ) > BLOWUP_LIMIT:
            return np.concatenate([u, v]), nclips, max_neg, True
    return np.concatenate([u, v]), nclips, max_neg, False


def rk4_single_span(L, mu, r, w0, nsteps, dt):
    """Single-species counterpart of :func:`rk4_two_span`."""
    w = np.array(w0, dtype=float)
    nclips = 0
    max_neg = 0.0

    def f(ww):
        return mu * (L @ ww) + ww * (r - ww)

    half = 0.5 * dt
    sixth = dt / 6.0
    for _ in range(nsteps):
        k1 = f(w)
        k2 = f(w + half * k1)
        k3 = f(w + half * k2)
        k4 = f(w + dt * k3)
        w = w + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        neg = w < 0.0
        if neg.any():
            max_neg = max(max_neg, float(-w[neg].min()))
            nclips += int(neg.sum())
            w[neg] = 0.0
        if not np.isfinite(w).all() or w.max(initial=0.0) > BLOWUP_LIMIT:
            return w, nclips, max_neg, True
    return w, nclips, max_neg, False


def _cycle_info(tails, n):
    """Cycle census of the in-arc assignment ``tails``.

    Returns (ncycles, entry) where entry is a vertex on the first cycle
    found; stops counting at 2 since callers only keep single-cycle covers.
    """
    seen = [False] * n
    onpath = [-1] * n
    ncycles = 0
    entry = -1
    for start in range(n):
        if seen[start]:
            continue
        cur = start
        while not seen[cur] and onpath[cur] != start:
            onpath[cur] = start
            cur = tails[cur]
        if not seen[cur]:
            ncycles += 1
            if entry < 0:
                entry = cur
            if ncycles > 1:
                return ncycles, entry
        cur = start
        while not seen[cur]:
            seen[cur] = True
            cur = tails[cur]
    return ncycles, entry


def tree_cycle_rhs(a, F):
    """Sum w(Q) * (cycle-arc sum of F) over all spanning single-cycle
    in-arc covers Q of the weight matrix ``a``.

    F is indexed like the weight matrix: the cycle arc j -> i (weight
    a[i, j]) contributes F[i, j]. Returns (total, count) with count the
    number of covers visited.
    """
    n = a.shape[0]
    choices = [np.flatnonzero(a[i] > 0.0).tolist() for i in range(n)]
    if any(len(ch) == 0 for ch in choices):
        return 0.0, 0
    total = 0.0
    count = 0
    for tails in product(*choices):
        ncyc, entry = _cycle_info(tails, n)
        if ncyc != 1:
            continue
        w = 1.0
        for i in range(n):
            w *= a[i, tails[i]]
        s = 0.0
        cur = entry
        while True:
            s += F[cur, tails[cur]]
            cur = tails[cur]
            if cur == entry:
                break
        total += w * s
        count += 1
    return total, count


def power_iteration(B, tol_abs, max_iter):
    """Two-sided power iteration for the dominant eigenvalue of the
    nonnegative matrix ``B``.

    Iterates right and left vectors from all-ones seeds, estimating the
    eigenvalue with the bilinear quotient y.Bx / y.x; stops when both
    residuals fall below ``tol_abs``. Returns
    (lam, x, y, resid, iters, converged) with x, y normalized to sum 1.
    """
    n = B.shape[0]
    x = np.full(n, 1.0 / n)
    y = np.full(n, 1.0 / n)
    lam = 0.0
    resid = np.inf
    for it in range(1, max_iter + 1):
        bx = B @ x
        by = B.T @ y
        lam = float(y @ bx) / float(y @ x)
        resid = max(
            float(np.abs(bx - lam * x).max()), float(np.abs(by - lam * y).max())
        )
        if resid <= tol_abs:
            return lam, x, y, resid, it, True
        sx = bx.sum()
        sy = by.sum()
        if sx <= 0.0 or sy <= 0.0 or not np.isfinite(sx) or not np.isfinite(sy):
            return lam, x, y, resid, it, False
        x = bx / sx
        y = by / sy
    return lam, x, y, resid, max_iter, False
