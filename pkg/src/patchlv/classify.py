"""Global-dynamics classification over the dispersal and competition planes.

Each parameter point is labeled by the signs of two decay rates: lambda_u,
the rate governing invasion against the u-only equilibrium, and lambda_v,
its v-only counterpart. Positive lambda_u means the u-only state is linearly
stable. Under weak competition on a cycle-balanced network the sign pair
decides the global outcome: one semitrivial state attracts everything, a
unique interior equilibrium attracts everything, or (in the degenerate
band) a whole segment of equilibria forms the attractor.
"""

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .dynamics import (
    ContinuumFamily,
    EquilibriumKind,
    PatchSystem,
    SinglePatchParams,
    Stability,
    coexistence_equilibrium,
    continuum_family,
    default_coexistence_seeds,
    equilibrium_report,
    integrate,
    single_equilibrium,
)
from .errors import (
    AssumptionViolated,
    NewtonDiverged,
    OneSidedResources,
    PatchLVError,
    ProportionalResource,
    TiedResources,
)
from .spectral import connection_matrix, lambda1, theta

CLASSIFY_TOL = 1e-7
DEFAULT_MU_GRID = np.logspace(-3.0, 3.0, 60)


class Region(Enum):
    S_U = "S_u"
    S_V = "S_v"
    S_MINUS = "S_minus"
    S_U0 = "S_u0"
    S_V0 = "S_v0"
    S_00 = "S_00"


class Outcome(Enum):
    E1_GAS = "E1_GAS"
    E2_GAS = "E2_GAS"
    COEXISTENCE_GAS = "Coexistence_GAS"
    CONTINUUM = "Continuum"


@dataclass(frozen=True)
class RegionLabel:
    region: Region
    lambda_u: float  # decay rate against invasion of the u-only state
    lambda_v: float  # decay rate against invasion of the v-only state
    tol: float
    bc_unity: bool  # b*c within tolerance of 1
    profiles_match: bool  # u-only profile equals c times the v-only profile

    def to_json(self) -> dict:
        return {
            "region": self.region.value,
            "lambda_u": self.lambda_u,
            "lambda_v": self.lambda_v,
            "tol": self.tol,
            "bc_unity": self.bc_unity,
            "profiles_match": self.profiles_match,
        }


@dataclass(frozen=True)
class GlobalOutcome:
    outcome: Outcome
    witness: Optional[object]  # EquilibriumReport or ContinuumFamily


def check_assumptions(sys: PatchSystem):
    """Assumptions behind the classification: weak competition, strong
    connectivity (enforced at construction), cycle balance."""
    if sys.b * sys.c > 1.0 + 1e-12:
        raise AssumptionViolated(f"strong competition b*c = {sys.b * sys.c} > 1")
    if not sys.balance_certificate.balanced:
        v = sys.balance_certificate.violation
        raise AssumptionViolated(
            f"graph is not cycle-balanced (cycle {v.vertices} has forward "
            f"weight {v.forward_weight}, reverse {v.reverse_weight})"
        )


def invasion_rates(sys: PatchSystem):
    """(lambda_u, lambda_v) for the current dispersal rates."""
    lam_u = lambda1(sys.mu_v, sys.q - sys.b * sys.u_star, sys.L)
    lam_v = lambda1(sys.mu_u, sys.p - sys.c * sys.v_star, sys.L)
    return lam_u, lam_v


def classify_point(sys: PatchSystem, tol: float = CLASSIFY_TOL, witness: bool = True):
    """Label the parameter point and map it to its global outcome.

    Returns (RegionLabel, GlobalOutcome). With witness=True the outcome
    carries the attracting object (equilibrium report or continuum family).
    """
    if sys.mu_u <= 0 or sys.mu_v <= 0:
        raise AssumptionViolated("classification requires positive dispersal rates")
    check_assumptions(sys)
    lam_u, lam_v = invasion_rates(sys)
    if lam_u > tol and lam_v > tol:
        raise AssumptionViolated(
            f"both invasion rates positive ({lam_u:.3e}, {lam_v:.3e}); "
            "the sign pair is impossible under the model assumptions"
        )
    bc_unity, profiles = sys.degeneracy()

    if lam_u > tol:
        region = Region.S_U
    elif lam_v > tol:
        region = Region.S_V
    elif lam_u < -tol and lam_v < -tol:
        region = Region.S_MINUS
    elif abs(lam_u) <= tol and abs(lam_v) <= tol:
        region = Region.S_00
        if not (bc_unity and profiles):
            warnings.warn(
                "both invasion rates vanish but the degeneracy predicates "
                f"(bc_unity={bc_unity}, profiles_match={profiles}) do not hold; "
                "the point sits inside the tolerance band without the exact "
                "degeneracy",
                stacklevel=2,
            )
    elif abs(lam_u) <= tol:
        region = Region.S_U0
    else:
        region = Region.S_V0

    label = RegionLabel(region, lam_u, lam_v, tol, bc_unity, profiles)

    z = np.zeros(sys.n)
    if region in (Region.S_U, Region.S_U0):
        out = Outcome.E1_GAS
        wit = (
            equilibrium_report(sys, EquilibriumKind.SEMITRIVIAL_U, sys.u_star, z)
            if witness
            else None
        )
    elif region in (Region.S_V, Region.S_V0):
        out = Outcome.E2_GAS
        wit = (
            equilibrium_report(sys, EquilibriumKind.SEMITRIVIAL_V, z, sys.v_star)
            if witness
            else None
        )
    elif region is Region.S_MINUS:
        out = Outcome.COEXISTENCE_GAS
        wit = None
        if witness:
            wit = coexistence_equilibrium(sys)
            if wit is None:
                raise NewtonDiverged(
                    "interior equilibrium expected in S_minus but no seed converged"
                )
    else:
        out = Outcome.CONTINUUM
        wit = continuum_family(sys) if witness else None
    return label, GlobalOutcome(out, wit)


# ---------------------------------------------------------------------------
# parameter sweeps


@dataclass(frozen=True)
class SweepCell:
    x: float
    y: float
    lambda_u: float
    lambda_v: float
    region: Optional[Region]
    outcome: Optional[Outcome]
    error: Optional[str] = None
    verified: Optional[bool] = None


def _cell_system(template: PatchSystem, plane: str, x: float, y: float) -> PatchSystem:
    if plane == "mu":
        return replace(template, mu_u=x, mu_v=y)
    if plane == "bc":
        return replace(template, b=x, c=y)
    raise ValueError(f"unknown sweep plane {plane!r}")


def _eval_cell(args):
    template, plane, x, y, tol = args
    try:
        label, outcome = classify_point(
            _cell_system(template, plane, x, y), tol, witness=False
        )
        return SweepCell(x, y, label.lambda_u, label.lambda_v, label.region, outcome.outcome)
    except PatchLVError as exc:
        return SweepCell(
            x, y, float("nan"), float("nan"), None, None, error=type(exc).__name__
        )


def sweep(
    template: PatchSystem,
    plane: str,
    xs,
    ys,
    tol: float = CLASSIFY_TOL,
    jobs: int = 1,
):
    """Classify every grid cell of the (mu_u, mu_v) or (b, c) plane.

    Cells are independent; with jobs > 1 they are evaluated in a process
    pool. Output order is row-major (x outer, y inner) regardless of
    scheduling. Per-cell failures are recorded in the row and the sweep
    continues.
    """
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    tasks = [(template, plane, x, y, tol) for x in xs for y in ys]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_eval_cell, tasks, chunksize=8))
    else:
        cells = [_eval_cell(t) for t in tasks]
    both_positive = [
        c for c in cells if c.error is None and c.lambda_u > tol and c.lambda_v > tol
    ]
    if both_positive:
        raise AssumptionViolated(
            f"{len(both_positive)} sweep cells report both invasion rates positive"
        )
    return cells


def _attractor_state(sys: PatchSystem, outcome: Outcome, witness):
    z = np.zeros(sys.n)
    if outcome is Outcome.E1_GAS:
        return np.concatenate([sys.u_star, z])
    if outcome is Outcome.E2_GAS:
        return np.concatenate([z, sys.v_star])
    if outcome is Outcome.COEXISTENCE_GAS:
        return np.concatenate([witness.u, witness.v])
    return None  # continuum: handled by distance-to-family


def continuum_distance(family: ContinuumFamily, u, v):
    """Distance (max-norm) from (u, v) to the equilibrium segment, together
    with the best mixing fraction rho."""
    base = family.base
    w = base / family.c
    denom = float(base @ base + w @ w)
    rho = float((u @ base + w @ w - v @ w) / denom)
    rho = min(1.0, max(0.0, rho))
    du = u - rho * base
    dv = v - (1.0 - rho) * w
    return float(max(np.abs(du).max(), np.abs(dv).max())), rho


def verify_cells(
    template: PatchSystem,
    plane: str,
    cells,
    per_region: int = 5,
    n_inits: int = 3,
    t_end: float = 2000.0,
    dist_tol: float = 1e-4,
    seed: int = 0,
    tol: float = CLASSIFY_TOL,
):
    """Integration-based spot check of sweep outcomes.

    For each interior region (S_u, S_v, S_minus) the cells with the largest
    classification margin are sampled; trajectories from random interior
    states must land within dist_tol of the predicted attractor. Returns a
    new cell list with the verified flag filled on sampled cells.
    """
    rng = np.random.default_rng(seed)
    margins = {
        Region.S_U: lambda c: c.lambda_u,
        Region.S_V: lambda c: c.lambda_v,
        Region.S_MINUS: lambda c: min(-c.lambda_u, -c.lambda_v),
    }
    chosen = {}
    for region, margin in margins.items():
        pool = [c for c in cells if c.region is region]
        pool.sort(key=margin, reverse=True)
        for c in pool[:per_region]:
            chosen[(c.x, c.y)] = None

    out = []
    for cell in cells:
        key = (cell.x, cell.y)
        if key not in chosen:
            out.append(cell)
            continue
        sys = _cell_system(template, plane, cell.x, cell.y)
        _, outcome = classify_point(sys, tol, witness=True)
        target = _attractor_state(sys, outcome.outcome, outcome.witness)
        ok = True
        if outcome.outcome is Outcome.COEXISTENCE_GAS:
            ok = outcome.witness.verdict is Stability.STABLE
        for _ in range(n_inits):
            if not ok:
                break
            u0 = rng.uniform(0.05, 1.2, sys.n) * sys.p
            v0 = rng.uniform(0.05, 1.2, sys.n) * sys.q
            traj = integrate(sys, (u0, v0), t_end, samples=2)
            if target is not None:
                dist = float(np.abs(traj.final - target).max())
            else:
                dist, _ = continuum_distance(
                    outcome.witness, traj.final[: sys.n], traj.final[sys.n :]
                )
            if dist > dist_tol:
                ok = False
                break
        out.append(replace(cell, verified=ok))
    return out


# ---------------------------------------------------------------------------
# thresholds in the competition plane (shared resource vector)


@dataclass(frozen=True)
class ThresholdReport:
    kind: str  # "b_threshold" | "c_threshold" | "mu_crossing"
    value: float
    bracket: tuple
    sign_table: tuple  # rate values at the final bracket endpoints

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "bracket": list(self.bracket),
            "sign_table": list(self.sign_table),
        }


def _bisect(g, lo, hi, kind, rel_width=1e-9, max_iter=200):
    f_lo = g(lo)
    f_hi = g(hi)
    if f_lo == 0.0:
        return ThresholdReport(kind, lo, (lo, lo), (f_lo, f_lo))
    if f_hi == 0.0:
        return ThresholdReport(kind, hi, (hi, hi), (f_hi, f_hi))
    if not (f_lo < 0 < f_hi):
        raise PatchLVError(
            f"{kind}: no sign change over [{lo}, {hi}] ({f_lo:.3e}, {f_hi:.3e})"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rel_width * max(1.0, abs(mid)):
            break
        f_mid = g(mid)
        if f_mid < 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return ThresholdReport(kind, 0.5 * (lo + hi), (lo, hi), (f_lo, f_hi))


def shared_resource_thresholds(
    graph,
    r,
    mu_u: float,
    mu_v: float,
    tol: float = CLASSIFY_TOL,
):
    """Critical competition rates when both species share the growth vector r.

    Returns (b_threshold, c_threshold): the zeros in b of the invasion rate
    against the u-only state and in c of the one against the v-only state.
    Both rates are strictly increasing in their argument, so bisection
    brackets a unique root. Requires r not proportional to the null profile
    of the coupling matrix; equal dispersal rates make both thresholds
    exactly one.
    """
    r = np.asarray(r, dtype=float)
    L = connection_matrix(graph)
    th = theta(L)
    if float(np.abs(r / r.sum() - th).max()) <= 1e-8:
        raise ProportionalResource(
            "growth vector proportional to the coupling null profile; "
            "competition thresholds are undefined there"
        )
    if mu_u == mu_v:
        one = ThresholdReport("b_threshold", 1.0, (1.0, 1.0), (0.0, 0.0))
        return one, replace_kind(one, "c_threshold")

    w_u = single_equilibrium(SinglePatchParams(graph, mu_u, r))
    w_v = single_equilibrium(SinglePatchParams(graph, mu_v, r))

    def g_b(b):
        return lambda1(mu_v, r - b * w_u, L)

    def g_c(c):
        return lambda1(mu_u, r - c * w_v, L)

    hi_b = 2.0 * float(r.max()) / float(w_u.min())
    hi_c = 2.0 * float(r.max()) / float(w_v.min())
    b_rep = _bisect(g_b, 0.0, hi_b, "b_threshold")
    c_rep = _bisect(g_c, 0.0, hi_c, "c_threshold")
    return b_rep, c_rep


def replace_kind(rep: ThresholdReport, kind: str) -> ThresholdReport:
    return ThresholdReport(kind, rep.value, rep.bracket, rep.sign_table)


# ---------------------------------------------------------------------------
# equal competition, equal dispersal: scan over the common rate


@dataclass(frozen=True)
class ScanRow:
    mu: float
    lambda_u: float
    lambda_v: float
    region: Region
    outcome: Outcome


@dataclass(frozen=True)
class DispersalScan:
    rows: tuple
    crossings_u: tuple  # ThresholdReports where lambda_u changes sign
    crossings_v: tuple
    dominance: Optional[str]  # "u" or "v" when one growth vector dominates
    drift_sign: float  # null-profile-weighted resource difference


def equal_competition_scan(
    graph, p, q, mu_grid=None, tol: float = CLASSIFY_TOL
):
    """Classify the symmetric system (b = c = 1, shared dispersal rate)
    along a grid of rates and refine every sign change of the two invasion
    rates.

    Strict componentwise dominance of one growth vector short-circuits to
    that species' victory; the threshold scan applies when neither vector
    dominates. All crossings are reported - the rate need not cross once.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if mu_grid is None:
        mu_grid = DEFAULT_MU_GRID
    mu_grid = np.asarray(mu_grid, dtype=float)

    dominance = None
    if (p > q).all():
        dominance = "u"
    elif (q > p).all():
        dominance = "v"

    rows = []
    for mu in mu_grid:
        sys = PatchSystem(graph, p, q, 1.0, 1.0, float(mu), float(mu))
        label, outcome = classify_point(sys, tol, witness=False)
        rows.append(
            ScanRow(float(mu), label.lambda_u, label.lambda_v, label.region, outcome.outcome)
        )

    L = connection_matrix(graph)
    th = theta(L)
    drift = float(th @ (p - q))

    def lam_u_at(mu):
        sysm = PatchSystem(graph, p, q, 1.0, 1.0, mu, mu)
        lam_u, _ = invasion_rates(sysm)
        return lam_u

    def lam_v_at(mu):
        sysm = PatchSystem(graph, p, q, 1.0, 1.0, mu, mu)
        _, lam_v = invasion_rates(sysm)
        return lam_v

    def crossings(values, fn):
        reps = []
        for k in range(len(mu_grid) - 1):
            a, b = values[k], values[k + 1]
            if a == 0.0 or (a < 0) == (b < 0):
                continue
            g = fn if a < 0 else (lambda m, f=fn: -f(m))
            rep = _bisect(g, float(mu_grid[k]), float(mu_grid[k + 1]), "mu_crossing")
            if a > 0:  # report the true rate values, not the negated ones
                rep = ThresholdReport(
                    rep.kind,
                    rep.value,
                    rep.bracket,
                    (-rep.sign_table[0], -rep.sign_table[1]),
                )
            reps.append(rep)
        return tuple(reps)

    cross_u = crossings([row.lambda_u for row in rows], lam_u_at)
    cross_v = crossings([row.lambda_v for row in rows], lam_v_at)
    return DispersalScan(tuple(rows), cross_u, cross_v, dominance, drift)


# ---------------------------------------------------------------------------
# dispersal limits


def small_mu_limit(p, q):
    """Zero-dispersal limit of the interior equilibrium of the symmetric
    system: each species keeps exactly its advantaged patches.

    Requires every patch to favor one species strictly (no ties) and both
    species to hold at least one patch.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if (p == q).any():
        raise TiedResources("growth rates tie on some patch; the limit is undefined")
    omega_u = p > q
    omega_v = q > p
    if not omega_u.any() or not omega_v.any():
        raise OneSidedResources(
            "one species dominates every patch; dominance applies instead"
        )
    u0 = np.where(omega_u, p, 0.0)
    v0 = np.where(omega_v, q, 0.0)
    return u0, v0


def _small_mu_seed(L, p, q, u0, v0, mu):
    """First-order expansion of the interior equilibrium near zero dispersal,
    used to seed Newton where the minority components are O(mu)."""
    du = np.where(
        v0 > 0, (L @ u0) / np.where(v0 > 0, q - p, 1.0), 0.0
    )
    dv = np.where(
        u0 > 0, (L @ v0) / np.where(u0 > 0, p - q, 1.0), 0.0
    )
    floor = 1e-3 * mu * min(float(p.min()), float(q.min()))
    su = np.maximum(u0 + mu * du, floor)
    sv = np.maximum(v0 + mu * dv, floor)
    return np.concatenate([su, sv])


def small_mu_probe(graph, p, q, mu_values):
    """Distance from the computed interior equilibrium to its zero-dispersal
    limit at each requested rate.

    Returns (u0, v0, results) with results a list of
    (mu, EquilibriumReport, distance).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    u0, v0 = small_mu_limit(p, q)
    L = connection_matrix(graph)
    target = np.concatenate([u0, v0])
    results = []
    for mu in mu_values:
        mu = float(mu)
        sys = PatchSystem(graph, p, q, 1.0, 1.0, mu, mu)
        seeds = [_small_mu_seed(L, p, q, u0, v0, mu)] + default_coexistence_seeds(sys)
        rep = coexistence_equilibrium(sys, seeds=seeds)
        if rep is None:
            raise NewtonDiverged(f"no interior equilibrium found at mu={mu}")
        dist = float(np.abs(np.concatenate([rep.u, rep.v]) - target).max())
        results.append((mu, rep, dist))
    return u0, v0, results


def large_mu_limit(graph, p) -> np.ndarray:
    """Infinite-dispersal limit of the single-species profile: the null
    profile scaled by the ratio of its resource-weighted mass to its squared
    mass."""
    p = np.asarray(p, dtype=float)
    th = theta(connection_matrix(graph))
    scale = float(th @ p) / float(th @ th)
    return scale * th


def large_mu_probe(graph, p, mu_values):
    """Distance of the single-species profile from its infinite-dispersal
    limit at each requested rate. Returns (limit, list of (mu, distance))."""
    p = np.asarray(p, dtype=float)
    lim = large_mu_limit(graph, p)
    out = []
    for mu in mu_values:
        w = single_equilibrium(SinglePatchParams(graph, float(mu), p))
        out.append((float(mu), float(np.abs(w - lim).max())))
    return lim, out
