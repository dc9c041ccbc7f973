"""Dense spectral machinery for the patch coupling matrices.

Connection matrix: off-diagonal a[i,j], diagonal minus the column sums (the
negative of a column Laplacian). Row Laplacian: diagonal row sums, negated
off-diagonals. The spectral bound s(M) of a quasi-positive irreducible M is
its Perron root, computed by two-sided power iteration on a diagonal shift.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import _backend
from .digraph import WeightedDigraph
from .errors import NonConvergence, NotQuasiPositive, SpectralBoundNotZero

POWER_ITER_BUDGET = 100_000
POWER_ITER_RTOL = 1e-12


def connection_matrix(g: WeightedDigraph) -> np.ndarray:
    """Coupling matrix with zero column sums: a[i,j] off-diagonal, diagonal
    the negated column sum of the off-diagonals."""
    a = g.weights
    return a - np.diag(a.sum(axis=0))


def row_laplacian(g: WeightedDigraph) -> np.ndarray:
    """Row Laplacian: zero row sums, off-diagonal -a[i,j]."""
    a = g.weights
    return np.diag(a.sum(axis=1)) - a


@dataclass(frozen=True)
class SpectralReport:
    bound: float
    right_vec: np.ndarray  # positive, sum 1
    left_vec: np.ndarray  # positive, sum 1
    residual: float
    iterations: int

    def to_json(self) -> dict:
        return {
            "bound": self.bound,
            "right_vec": list(map(float, self.right_vec)),
            "left_vec": list(map(float, self.left_vec)),
            "residual": self.residual,
            "iterations": self.iterations,
        }


def spectral_bound(
    M, rtol: float = POWER_ITER_RTOL, max_iter: int = POWER_ITER_BUDGET
) -> SpectralReport:
    """Perron root and eigenvectors of a quasi-positive irreducible matrix.

    Power iteration runs on M + sigma*I with sigma = max|M_ii| + 1, which is
    nonnegative with positive diagonal, hence primitive for irreducible M.
    The all-ones seed makes the result deterministic.
    """
    M = np.ascontiguousarray(M, dtype=float)
    n = M.shape[0]
    off = M[~np.eye(n, dtype=bool)]
    if (off < 0).any():
        raise NotQuasiPositive("matrix has a negative off-diagonal entry")
    sigma = float(np.abs(np.diag(M)).max()) + 1.0
    B = M + sigma * np.eye(n)
    norm = float(np.abs(M).sum(axis=1).max())
    tol_abs = rtol * (1.0 + norm)
    lam, x, y, resid, iters, ok = _backend.power_iteration(B, tol_abs, max_iter)
    if not ok:
        raise NonConvergence(
            f"power iteration exhausted {max_iter} iterations (residual {resid:.3e})",
            residual=resid,
        )
    return SpectralReport(
        bound=float(lam - sigma),
        right_vec=np.asarray(x),
        left_vec=np.asarray(y),
        residual=float(resid),
        iterations=int(iters),
    )


def lambda1(mu: float, h, L) -> float:
    """Decay rate of the dominant linearized mode: the negated spectral
    bound of mu*L + diag(h).

    Positive values mean the mode decays. mu = 0 returns the uncoupled
    boundary value -max(h) directly.
    """
    h = np.asarray(h, dtype=float)
    if mu == 0.0:
        return float(-h.max())
    return -spectral_bound(mu * np.asarray(L, dtype=float) + np.diag(h)).bound


def theta(L) -> np.ndarray:
    """Positive right null vector of the connection matrix, normalized to
    sum 1.

    Solved exactly from the bordered linear system (first equation replaced
    by the normalization); nonsingular whenever the digraph is strongly
    connected.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    A = L.copy()
    A[0, :] = 1.0
    b = np.zeros(n)
    b[0] = 1.0
    th = np.linalg.solve(A, b)
    if (th <= 0).any():
        raise NonConvergence("null vector of the coupling matrix is not positive")
    return th


@dataclass(frozen=True)
class SpectralLimits:
    limit_zero: float  # value of s(a*A + D) as a -> 0
    limit_infinity: float  # value as a -> infinity
    eta: np.ndarray  # positive right null vector of A, sum 1


def spectral_limits(A, d, tol: float = 1e-10) -> SpectralLimits:
    """Limits of a |-> s(a*A + diag(d)) for quasi-positive irreducible A
    with spectral bound zero.

    The small-a limit is max(d). The reported large-a limit is the
    eta-weighted mean of d, eta the positive right eigenvector of A at
    eigenvalue zero. That weighted mean equals the actual limit of the
    sampled map exactly when the all-ones vector is a left null vector of A
    (zero column sums) - the dispersal-coupling class all the applications
    use; a warning is emitted otherwise, since the general limit weights d
    by both one-sided eigenvectors. The caller must pass A already
    normalized to s(A) = 0; this is verified, not repaired.
    """
    A = np.asarray(A, dtype=float)
    d = np.asarray(d, dtype=float)
    rep = spectral_bound(A)
    if abs(rep.bound) > tol * max(1.0, float(np.abs(A).max())):
        raise SpectralBoundNotZero(f"s(A) = {rep.bound:.3e}, expected 0")
    col_defect = float(np.abs(A.sum(axis=0)).max())
    if col_defect > 1e-9 * max(1.0, float(np.abs(A).max())):
        warnings.warn(
            "column sums of A are nonzero; the reported large-scale limit "
            "weights d by the right eigenvector only and will differ from "
            "the sampled map's limit",
            stacklevel=2,
        )
    eta = rep.right_vec
    return SpectralLimits(
        limit_zero=float(d.max()),
        limit_infinity=float(eta @ d),
        eta=eta,
    )


def scaled_bound_samples(A, d, a_values) -> np.ndarray:
    """Sample a |-> s(a*A + diag(d)) on a grid; the monotonicity probe for
    :func:`spectral_limits`."""
    A = np.asarray(A, dtype=float)
    D = np.diag(np.asarray(d, dtype=float))
    return np.array([spectral_bound(a * A + D).bound for a in a_values])
