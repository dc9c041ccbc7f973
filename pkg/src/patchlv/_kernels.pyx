# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: RK4 spans, spanning-unicyclic accumulation, and
two-sided power iteration. Semantics mirror ``patchlv._purekernels``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, isfinite

cnp.import_array()

cdef double BLOWUP_LIMIT = 1e12


def rk4_two_span(const double[:, ::1] L, double mu_u, double mu_v,
                 const double[::1] p, const double[::1] q, double b, double c,
                 const double[::1] y0, Py_ssize_t nsteps, double dt):
    """Advance the two-species system nsteps RK4 steps of size dt.

    Returns (y, nclips, max_neg, blown); see the pure backend docstring.
    """
    cdef Py_ssize_t n = L.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(2 * n, dtype=np.float64)
    cdef double[::1] y = out
    cdef cnp.ndarray[double, ndim=1] buf = np.empty(8 * n, dtype=np.float64)
    cdef double[::1] ku = buf[:n]
    cdef double[::1] kv = buf[n:2 * n]
    cdef double[::1] au = buf[2 * n:3 * n]
    cdef double[::1] av = buf[3 * n:4 * n]
    cdef double[::1] su = buf[4 * n:5 * n]
    cdef double[::1] sv = buf[5 * n:6 * n]
    cdef double[::1] tu = buf[6 * n:7 * n]
    cdef double[::1] tv = buf[7 * n:]
    cdef Py_ssize_t i, j, step
    cdef long nclips = 0
    cdef double max_neg = 0.0
    cdef double half = 0.5 * dt, sixth = dt / 6.0
    cdef double acc_u, acc_v, val
    cdef bint blown = False

    for i in range(2 * n):
        y[i] = y0[i]

    for step in range(nsteps):
        # k1 at y; accumulate y + dt/6*k and the staged state in one pass
        for i in range(n):
            acc_u = 0.0
            acc_v = 0.0
            for j in range(n):
                acc_u += L[i, j] * y[j]
                acc_v += L[i, j] * y[n + j]
            ku[i] = mu_u * acc_u + y[i] * (p[i] - y[i] - c * y[n + i])
            kv[i] = mu_v * acc_v + y[n + i] * (q[i] - b * y[i] - y[n + i])
        for i in range(n):
            su[i] = y[i] + sixth * ku[i]
            sv[i] = y[n + i] + sixth * kv[i]
            au[i] = y[i] + half * ku[i]
            av[i] = y[n + i] + half * kv[i]
        # k2
        for i in range(n):
            acc_u = 0.0
            acc_v = 0.0
            for j in range(n):
                acc_u += L[i, j] * au[j]
                acc_v += L[i, j] * av[j]
            ku[i] = mu_u * acc_u + au[i] * (p[i] - au[i] - c * av[i])
            kv[i] = mu_v * acc_v + av[i] * (q[i] - b * au[i] - av[i])
        for i in range(n):
            su[i] += 2.0 * sixth * ku[i]
            sv[i] += 2.0 * sixth * kv[i]
            tu[i] = y[i] + half * ku[i]
            tv[i] = y[n + i] + half * kv[i]
        # k3
        for i in range(n):
            acc_u = 0.0
            acc_v = 0.0
            for j in range(n):
                acc_u += L[i, j] * tu[j]
                acc_v += L[i, j] * tv[j]
            ku[i] = mu_u * acc_u + tu[i] * (p[i] - tu[i] - c * tv[i])
            kv[i] = mu_v * acc_v + tv[i] * (q[i] - b * tu[i] - tv[i])
        for i in range(n):
            su[i] += 2.0 * sixth * ku[i]
            sv[i] += 2.0 * sixth * kv[i]
            au[i] = y[i] + dt * ku[i]
            av[i] = y[n + i] + dt * kv[i]
        # k4
        for i in range(n):
            acc_u = 0.0
            acc_v = 0.0
            for j in range(n):
                acc_u += L[i, j] * au[j]
                acc_v += L[i, j] * av[j]
            ku[i] = mu_u * acc_u + au[i] * (p[i] - au[i] - c * av[i])
            kv[i] = mu_v * acc_v + av[i] * (q[i] - b * au[i] - av[i])
        blown = False
        for i in range(n):
            val = su[i] + sixth * ku[i]
            if val < 0.0:
                if -val > max_neg:
                    max_neg = -val
                nclips += 1
                val = 0.0
            y[i] = val
            if not isfinite(val) or val > BLOWUP_LIMIT:
                blown = True
            val = sv[i] + sixth * kv[i]
            if val < 0.0:
                if -val > max_neg:
                    max_neg = -val
                nclips += 1
                val = 0.0
            y[n + i] = val
            if not isfinite(val) or val > BLOWUP_LIMIT:
                blown = True
        if blown:
            return out, nclips, max_neg, True
    return out, nclips, max_neg, False


def rk4_single_span(const double[:, ::1] L, double mu, const double[::1] r,
                    const double[::1] w0, Py_ssize_t nsteps, double dt):
    """Single-species counterpart of rk4_two_span."""
    cdef Py_ssize_t n = L.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] w = out
    cdef cnp.ndarray[double, ndim=1] buf = np.empty(3 * n, dtype=np.float64)
    cdef double[::1] k = buf[:n]
    cdef double[::1] a = buf[n:2 * n]
    cdef double[::1] s = buf[2 * n:]
    cdef Py_ssize_t i, j, step
    cdef long nclips = 0
    cdef double max_neg = 0.0
    cdef double half = 0.5 * dt, sixth = dt / 6.0
    cdef double acc, val
    cdef bint blown = False

    for i in range(n):
        w[i] = w0[i]

    for step in range(nsteps):
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += L[i, j] * w[j]
            k[i] = mu * acc + w[i] * (r[i] - w[i])
        for i in range(n):
            s[i] = w[i] + sixth * k[i]
            a[i] = w[i] + half * k[i]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += L[i, j] * a[j]
            k[i] = mu * acc + a[i] * (r[i] - a[i])
        for i in range(n):
            s[i] += 2.0 * sixth * k[i]
            a[i] = w[i] + half * k[i]
        # note: a now holds the k3 stage input built from k2 values
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += L[i, j] * a[j]
            k[i] = mu * acc + a[i] * (r[i] - a[i])
        for i in range(n):
            s[i] += 2.0 * sixth * k[i]
            a[i] = w[i] + dt * k[i]
        blown = False
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += L[i, j] * a[j]
            k[i] = mu * acc + a[i] * (r[i] - a[i])
        for i in range(n):
            val = s[i] + sixth * k[i]
            if val < 0.0:
                if -val > max_neg:
                    max_neg = -val
                nclips += 1
                val = 0.0
            w[i] = val
            if not isfinite(val) or val > BLOWUP_LIMIT:
                blown = True
        if blown:
            return out, nclips, max_neg, True
    return out, nclips, max_neg, False


def tree_cycle_rhs(const double[:, ::1] a, const double[:, ::1] F):
    """Sum w(Q) * (cycle-arc sum of F) over all spanning single-cycle
    in-arc covers Q; the cycle arc j -> i contributes F[i, j].
    Returns (total, count)."""
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=2] choice_arr = np.zeros((n, n), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] choices = choice_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] scratch = np.zeros(5 * n, dtype=np.int64)
    cdef cnp.int64_t[::1] nchoice = scratch[:n]
    cdef cnp.int64_t[::1] idx = scratch[n:2 * n]
    cdef cnp.int64_t[::1] tails = scratch[2 * n:3 * n]
    cdef cnp.int64_t[::1] seen = scratch[3 * n:4 * n]
    cdef cnp.int64_t[::1] onpath = scratch[4 * n:]
    cdef Py_ssize_t i, j, pos, start, cur, entry
    cdef long ncyc
    cdef double total = 0.0, w, fs
    cdef long count = 0
    cdef cnp.int64_t stamp = 0

    for i in range(n):
        pos = 0
        for j in range(n):
            if a[i, j] > 0.0:
                choices[i, pos] = j
                pos += 1
        nchoice[i] = pos
        if pos == 0:
            return 0.0, 0
        idx[i] = 0
        tails[i] = choices[i, 0]
        seen[i] = -1
        onpath[i] = -1

    while True:
        # census of cycles in the functional map i -> tails[i]
        ncyc = 0
        entry = -1
        for start in range(n):
            if seen[start] == stamp:
                continue
            cur = start
            while seen[cur] != stamp and onpath[cur] != stamp * n + start:
                onpath[cur] = stamp * n + start
                cur = tails[cur]
            if seen[cur] != stamp:
                ncyc += 1
                if entry < 0:
                    entry = cur
                if ncyc > 1:
                    break
            cur = start
            while seen[cur] != stamp:
                seen[cur] = stamp
                cur = tails[cur]
        if ncyc == 1:
            w = 1.0
            for i in range(n):
                w *= a[i, tails[i]]
            fs = 0.0
            cur = entry
            while True:
                fs += F[cur, tails[cur]]
                cur = tails[cur]
                if cur == entry:
                    break
            total += w * fs
            count += 1
        # odometer advance
        stamp += 1
        i = n - 1
        while i >= 0:
            idx[i] += 1
            if idx[i] < nchoice[i]:
                tails[i] = choices[i, idx[i]]
                break
            idx[i] = 0
            tails[i] = choices[i, 0]
            i -= 1
        if i < 0:
            return total, count


def power_iteration(const double[:, ::1] B, double tol_abs, Py_ssize_t max_iter):
    """Two-sided power iteration on the nonnegative matrix B.

    Returns (lam, x, y, resid, iters, converged) with x, y sum-normalized.
    """
    cdef Py_ssize_t n = B.shape[0]
    cdef cnp.ndarray[double, ndim=1] xa = np.full(n, 1.0 / n)
    cdef cnp.ndarray[double, ndim=1] ya = np.full(n, 1.0 / n)
    cdef double[::1] x = xa
    cdef double[::1] y = ya
    cdef cnp.ndarray[double, ndim=1] buf = np.empty(2 * n, dtype=np.float64)
    cdef double[::1] bx = buf[:n]
    cdef double[::1] by = buf[n:]
    cdef Py_ssize_t i, j, it
    cdef double lam = 0.0, resid = 0.0
    cdef double num, den, rx, ry, sx, sy, d

    for it in range(1, max_iter + 1):
        for i in range(n):
            num = 0.0
            den = 0.0
            for j in range(n):
                num += B[i, j] * x[j]
                den += B[j, i] * y[j]
            bx[i] = num
            by[i] = den
        num = 0.0
        den = 0.0
        for i in range(n):
            num += y[i] * bx[i]
            den += y[i] * x[i]
        lam = num / den
        rx = 0.0
        ry = 0.0
        for i in range(n):
            d = fabs(bx[i] - lam * x[i])
            if d > rx:
                rx = d
            d = fabs(by[i] - lam * y[i])
            if d > ry:
                ry = d
        resid = rx if rx > ry else ry
        if resid <= tol_abs:
            return lam, xa, ya, resid, it, True
        sx = 0.0
        sy = 0.0
        for i in range(n):
            sx += bx[i]
            sy += by[i]
        if sx <= 0.0 or sy <= 0.0 or not isfinite(sx) or not isfinite(sy):
            return lam, xa, ya, resid, it, False
        for i in range(n):
            x[i] = bx[i] / sx
            y[i] = by[i] / sy
    return lam, xa, ya, resid, max_iter, False
