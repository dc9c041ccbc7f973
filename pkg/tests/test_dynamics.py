import warnings

import numpy as np
import pytest

from helpers import (
    degenerate_system,
    random_balanced_system,
    random_strongly_connected,
)
from patchlv import (
    EquilibriumKind,
    OrderRelation,
    PatchSystem,
    SinglePatchParams,
    Stability,
    WeightedDigraph,
    coexistence_equilibrium,
    connection_matrix,
    continuum_family,
    integrate,
    jacobian,
    jacobian_spectral_bound,
    order_compare,
    semitrivial_equilibria,
    single_equilibrium,
    single_rhs,
    system_from_json,
    system_to_json,
    theta,
    trivial_equilibrium,
    two_rhs,
)
from patchlv.dynamics import _newton
from patchlv.errors import StepSizeTooLarge, StepSizeWarning


def two_cycle(a12=1.0, a21=1.0):
    return WeightedDigraph(np.array([[0.0, a12], [a21, 0.0]]))


def shared_resource_system(b=0.5, c=0.5, mu_u=0.7, mu_v=1.3, delta=3.0):
    """System with growth proportional to the coupling null profile; the
    one-species profiles then equal the growth vector exactly."""
    g = two_cycle(2.0, 3.0)
    th = theta(connection_matrix(g))
    r = delta * th
    return PatchSystem(g, r, r, b, c, mu_u, mu_v), r


class TestValidation:
    def test_rejects_nonpositive_growth(self):
        with pytest.raises(ValueError):
            PatchSystem(two_cycle(), np.array([1.0, 0.0]), np.ones(2), 1, 1, 1, 1)

    def test_rejects_disconnected_graph(self):
        W = np.zeros((3, 3))
        W[1, 0] = 1.0
        W[2, 1] = 1.0
        with pytest.raises(ValueError):
            PatchSystem(WeightedDigraph(W), np.ones(3), np.ones(3), 1, 1, 1, 1)

    def test_weak_competition_flag(self):
        sys = PatchSystem(two_cycle(), np.ones(2), np.ones(2), 0.5, 1.5, 1, 1)
        assert sys.weak_competition
        strong = PatchSystem(two_cycle(), np.ones(2), np.ones(2), 1.5, 1.5, 1, 1)
        assert not strong.weak_competition

    def test_json_round_trip(self):
        sys, _ = shared_resource_system()
        again = system_from_json(system_to_json(sys))
        assert np.array_equal(again.graph.weights, sys.graph.weights)
        assert again.b == sys.b and again.mu_v == sys.mu_v
        assert np.array_equal(again.p, sys.p)


class TestVectorFields:
    def test_single_rhs_zero_state(self):
        params = SinglePatchParams(two_cycle(), 0.4, np.array([1.0, 2.0]))
        assert single_rhs(params, np.zeros(2)) == pytest.approx(np.zeros(2))

    def test_single_rhs_null_profile_growth(self):
        g = two_cycle(2.0, 3.0)
        r = 3.0 * theta(connection_matrix(g))
        params = SinglePatchParams(g, 0.9, r)
        assert np.abs(single_rhs(params, r)).max() <= 1e-12

    def test_single_rhs_constant_on_symmetric_graph(self):
        params = SinglePatchParams(two_cycle(), 2.0, np.full(2, 1.5))
        assert np.abs(single_rhs(params, np.full(2, 1.5))).max() <= 1e-14

    def test_two_rhs_trivial_and_semitrivial(self):
        sys, _ = shared_resource_system()
        du, dv = two_rhs(sys, np.zeros(2), np.zeros(2))
        assert not du.any() and not dv.any()
        du, dv = two_rhs(sys, sys.u_star, np.zeros(2))
        assert max(np.abs(du).max(), np.abs(dv).max()) <= 1e-11

    def test_two_rhs_interior_closed_form(self):
        sys, r = shared_resource_system(b=0.5, c=0.5)
        u = (1 - 0.5) / (1 - 0.25) * r
        v = (1 - 0.5) / (1 - 0.25) * r
        du, dv = two_rhs(sys, u, v)
        assert max(np.abs(du).max(), np.abs(dv).max()) <= 1e-12


class TestIntegrate:
    def test_constant_at_equilibrium(self):
        sys, r = shared_resource_system(b=0.5, c=0.5)
        u = (1 - 0.5) / (1 - 0.25) * r
        traj = integrate(sys, (u, u), 50.0, samples=6)
        drift = np.abs(traj.states - traj.states[0]).max()
        assert drift <= 1e-10

    def test_single_species_converges(self):
        rng = np.random.default_rng(0)
        g = random_strongly_connected(rng, 3)
        params = SinglePatchParams(g, 0.6, rng.uniform(0.5, 2.0, 3))
        w_star = single_equilibrium(params)
        traj = integrate(params, rng.uniform(0.1, 2.0, 3), 500.0, samples=3)
        assert np.abs(traj.final - w_star).max() <= 1e-6

    def test_extinction_in_competition(self):
        # u dominates when it holds strictly more resource everywhere
        g = two_cycle()
        sys = PatchSystem(g, np.array([2.0, 3.0]), np.array([1.0, 1.5]), 1, 1, 0.5, 0.5)
        traj = integrate(sys, (np.full(2, 0.5), np.full(2, 0.5)), 800.0, samples=3)
        assert traj.final[2:].max() <= 1e-6

    def test_requested_sample_times(self):
        sys, _ = shared_resource_system()
        times = [0.0, 1.5, 4.0]
        traj = integrate(sys, (np.full(2, 0.1), np.full(2, 0.1)), 4.0, sample_times=times)
        assert traj.times == pytest.approx(times)
        assert traj.states.shape == (3, 4)

    def test_rejects_negative_init(self):
        sys, _ = shared_resource_system()
        with pytest.raises(ValueError):
            integrate(sys, (np.array([-0.1, 0.2]), np.zeros(2)), 1.0)

    def test_giant_step_fails_without_refinement(self):
        sys, _ = shared_resource_system()
        init = (np.full(2, 2.5), np.full(2, 2.5))
        with pytest.raises(StepSizeTooLarge):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                integrate(sys, init, 400.0, dt=40.0, samples=2, max_refine=0)

    def test_refinement_warns_and_recovers(self):
        sys, _ = shared_resource_system()
        init = (np.full(2, 2.5), np.full(2, 2.5))
        with pytest.warns(StepSizeWarning):
            traj = integrate(sys, init, 400.0, dt=40.0, samples=2)
        assert traj.refinements > 0
        assert np.isfinite(traj.final).all()

    def test_truncated_trajectory_flagged(self):
        sys, _ = shared_resource_system()
        init = (np.full(2, 2.5), np.full(2, 2.5))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            traj = integrate(
                sys, init, 400.0, dt=40.0, samples=5, max_refine=0, truncate_on_failure=True
            )
        assert traj.aborted
        assert len(traj.times) < 5


class TestSingleEquilibrium:
    def test_zero_dispersal(self):
        r = np.array([1.0, 2.0])
        params = SinglePatchParams(two_cycle(), 0.0, r)
        assert np.array_equal(single_equilibrium(params), r)

    def test_null_profile_growth_is_fixed(self):
        g = two_cycle(2.0, 3.0)
        r = 2.5 * theta(connection_matrix(g))
        for mu in (0.3, 1.0, 4.0):
            w = single_equilibrium(SinglePatchParams(g, mu, r))
            assert w == pytest.approx(r, abs=1e-11)

    def test_mass_balance(self):
        rng = np.random.default_rng(1)
        for _ in range(15):
            g = random_strongly_connected(rng, int(rng.integers(2, 6)))
            r = rng.uniform(0.5, 2.5, g.n)
            mu = float(10.0 ** rng.uniform(-2, 1))
            w = single_equilibrium(SinglePatchParams(g, mu, r))
            assert (w > 0).all()
            assert abs(float(w @ (r - w))) <= 1e-10 * max(1.0, float(w.max()) ** 2)

    def test_unique_across_seeds(self):
        rng = np.random.default_rng(2)
        g = random_strongly_connected(rng, 4)
        r = rng.uniform(0.5, 2.0, 4)
        params = SinglePatchParams(g, 0.8, r)
        w_ref = single_equilibrium(params)
        L = params.L

        def f(w):
            return 0.8 * (L @ w) + w * (r - w)

        def jac(w):
            return 0.8 * L + np.diag(r - 2 * w)

        for _ in range(20):
            w, _ = _newton(f, jac, rng.uniform(0.2, 3.0, 4))
            if (w > 0).all():  # Newton may land on boundary fixed points
                assert np.abs(w - w_ref).max() <= 1e-8

    def test_residual_tolerance(self):
        rng = np.random.default_rng(3)
        g = random_strongly_connected(rng, 5)
        params = SinglePatchParams(g, 1.7, rng.uniform(0.5, 3.0, 5))
        w = single_equilibrium(params)
        assert np.abs(single_rhs(params, w)).max() <= 1e-12 * (1 + np.abs(w).max())


class TestEquilibriumReports:
    def test_trivial_unstable(self):
        sys, _ = shared_resource_system()
        rep = trivial_equilibrium(sys)
        assert rep.kind is EquilibriumKind.TRIVIAL
        assert rep.verdict is Stability.UNSTABLE

    def test_semitrivial_share_profile_when_symmetric(self):
        g = two_cycle()
        p = np.array([1.0, 2.0])
        sys = PatchSystem(g, p, p, 0.5, 0.5, 0.8, 0.8)
        e1, e2 = semitrivial_equilibria(sys)
        assert e1.u == pytest.approx(e2.v)
        assert e1.residual <= 1e-10 * (1 + np.abs(e1.u).max())

    def test_resource_dominance_stabilizes_winner(self):
        g = two_cycle()
        sys = PatchSystem(g, np.array([2.0, 3.0]), np.array([1.0, 1.5]), 1, 1, 0.5, 0.5)
        e1, e2 = semitrivial_equilibria(sys)
        assert e1.verdict is Stability.STABLE
        assert e2.verdict is Stability.UNSTABLE

    def test_shared_resource_boundary_case(self):
        sys, _ = shared_resource_system(b=1.2, c=0.5)
        e1, _ = semitrivial_equilibria(sys)
        assert e1.verdict is Stability.STABLE

    def test_report_json(self):
        sys, _ = shared_resource_system()
        rep = trivial_equilibrium(sys)
        obj = rep.to_json()
        assert obj["kind"] == "E0"
        assert obj["linearized_lambda"] == -obj["jacobian_spectral_bound"]


class TestCoexistence:
    def test_shared_resource_closed_form(self):
        sys, r = shared_resource_system(b=0.5, c=0.5)
        rep = coexistence_equilibrium(sys)
        assert rep is not None
        assert rep.u == pytest.approx((1 - 0.5) / (1 - 0.25) * r, abs=1e-9)
        assert rep.v == pytest.approx((1 - 0.5) / (1 - 0.25) * r, abs=1e-9)
        assert rep.verdict is Stability.STABLE

    def test_absent_under_exclusion(self):
        # strongly uneven resources with equal competition: u wins everywhere
        g = two_cycle()
        sys = PatchSystem(g, np.array([2.0, 3.0]), np.array([1.0, 1.5]), 1, 1, 0.5, 0.5)
        assert coexistence_equilibrium(sys) is None

    def test_degenerate_member_flagged(self):
        sys = degenerate_system(np.random.default_rng(4), 3)
        rep = coexistence_equilibrium(sys)
        assert rep is not None
        assert rep.degenerate
        assert rep.verdict is Stability.NEUTRALLY_STABLE
        assert abs(rep.jacobian_spectral_bound) <= 1e-6

    def test_explicit_seed_list(self):
        sys, r = shared_resource_system(b=0.5, c=0.5)
        seed = np.concatenate([0.4 * r, 0.4 * r])
        rep = coexistence_equilibrium(sys, seeds=[seed])
        assert rep is not None and rep.residual <= 1e-10 * (1 + np.abs(rep.u).max())


class TestContinuum:
    def test_family_residuals(self):
        sys = degenerate_system(np.random.default_rng(5), 3)
        fam = continuum_family(sys)
        assert len(fam.rho_grid) == 11
        assert fam.residuals.max() <= 1e-10
        u, v = fam.point(0.3)
        assert u == pytest.approx(0.3 * fam.base)
        assert v == pytest.approx(0.7 * fam.base / fam.c)


class TestJacobian:
    def test_block_structure_at_origin(self):
        sys, _ = shared_resource_system()
        J = jacobian(sys, np.zeros(2), np.zeros(2))
        expected_ul = sys.mu_u * sys.L + np.diag(sys.p)
        expected_lr = sys.mu_v * sys.L + np.diag(sys.q)
        assert J[:2, :2] == pytest.approx(expected_ul)
        assert J[2:, 2:] == pytest.approx(expected_lr)
        assert not J[:2, 2:].any() and not J[2:, :2].any()

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        sys = random_balanced_system(rng, 3)
        f = lambda x: np.concatenate(two_rhs(sys, x[:3], x[3:]))
        for _ in range(100):
            x = rng.uniform(0.1, 2.0, 6)
            J = jacobian(sys, x[:3], x[3:])
            d = rng.normal(size=6)
            d /= np.abs(d).max()
            h = 1e-6
            fd = (f(x + h * d) - f(x - h * d)) / (2 * h)
            assert np.abs(J @ d - fd).max() <= 1e-5 * max(1.0, np.abs(fd).max())

    def test_semitrivial_block_matches_invasion_rate(self):
        from patchlv import lambda1

        sys, _ = shared_resource_system(b=0.7, c=0.7)
        J = jacobian(sys, np.zeros(2), sys.v_star)
        upper = J[:2, :2]
        lam = lambda1(sys.mu_u, sys.p - sys.c * sys.v_star, sys.L)
        assert float(np.linalg.eigvals(upper).real.max()) == pytest.approx(-lam, abs=1e-9)

    def test_interior_routes_agree(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            sys = random_balanced_system(rng, 3)
            u = rng.uniform(0.2, 1.5, 3)
            v = rng.uniform(0.2, 1.5, 3)
            sig = jacobian_spectral_bound(sys, u, v)
            oracle = float(np.linalg.eigvals(jacobian(sys, u, v)).real.max())
            assert sig == pytest.approx(oracle, abs=1e-8)


class TestOrder:
    def test_cone_comparisons(self):
        u = np.array([1.0, 2.0])
        v = np.array([0.5, 0.5])
        assert order_compare((u, v), (u, v)) is OrderRelation.EQUAL_K
        assert order_compare((u, v), (u + 0.1, v)) is OrderRelation.LESS_K
        assert order_compare((u, v + 0.1), (u, v)) is OrderRelation.LESS_K
        assert order_compare((u + 0.1, v), (u, v)) is OrderRelation.GREATER_K
        mixed = (u + np.array([0.1, -0.1]), v)
        assert order_compare(mixed, (u, v)) is OrderRelation.INCOMPARABLE

    def test_flow_preserves_order(self):
        rng = np.random.default_rng(8)
        sys = random_balanced_system(rng, 3)
        u1 = rng.uniform(0.1, 1.0, 3)
        v1 = rng.uniform(0.1, 1.0, 3)
        lo = (u1, v1 + rng.uniform(0.0, 0.5, 3))
        hi = (u1 + rng.uniform(0.0, 0.5, 3), v1)
        t_lo = integrate(sys, lo, 60.0, samples=13)
        t_hi = integrate(sys, hi, 60.0, samples=13)
        for k in range(13):
            a = (t_lo.states[k][:3], t_lo.states[k][3:])
            b = (t_hi.states[k][:3], t_hi.states[k][3:])
            assert order_compare(a, b, tol=1e-9) in (
                OrderRelation.LESS_K,
                OrderRelation.EQUAL_K,
            )
