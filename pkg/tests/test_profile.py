"""Deterministic lattice-profile solver and its diagnostics."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stirringlab.model import ModelParams
from stirringlab import oracle, profile
from stirringlab.engine import SimulationPlan


def ramp(u):
    return 0.25 * (1 + u)


class TestBoundaryDrift:
    def test_all_ones_initial_derivative(self):
        p = ModelParams(n=8, k_window=2, j_rate=1.0)
        drift = profile.boundary_drift(np.ones(p.n_sites), p)
        assert drift[0] == pytest.approx(-0.5 * p.j_rate / p.epsilon)
        assert np.all(drift[1:] == 0.0)  # D- kills interior window sites, D+ = 0

    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_window_sum_identity_real_valued(self, k, seed):
        # sum D+rho = 1 - prod rho and sum D-rho = 1 - prod(1-rho), any profile
        p = ModelParams(n=8, k_window=k, j_rate=2.0)
        rho = np.random.default_rng(seed).uniform(0, 1, p.n_sites)
        d = profile.boundary_drift(rho, p)
        c = 0.5 * p.j_rate / p.epsilon
        assert d[p.n_sites - k :].sum() / c == pytest.approx(1 - np.prod(rho[p.n_sites - k :]), abs=1e-12)
        assert -d[:k].sum() / c == pytest.approx(1 - np.prod(1 - rho[:k]), abs=1e-12)


class TestSolver:
    def test_mass_conserved_without_reservoirs(self):
        p = ModelParams(n=16, k_window=2, j_rate=0.0)
        g = profile.solve_rho_eps(p, ramp, [0.0, 0.2, 0.5])
        masses = g.values.sum(axis=1)
        assert np.abs(masses - masses[0]).max() < 1e-8

    def test_initial_slice_exact(self):
        p = ModelParams(n=8, k_window=2, j_rate=1.0)
        g = profile.solve_rho_eps(p, ramp, [0.0, 0.1])
        assert np.array_equal(g.values[0], np.array([ramp(p.epsilon * x) for x in p.sites()]))

    def test_imex_matches_fine_rk4(self):
        p = ModelParams(n=2, k_window=2, j_rate=1.0)
        a = profile.solve_rho_eps(p, lambda u: 0.5, [0.0, 0.3], integrator="imex")
        b = profile.solve_rho_eps(p, lambda u: 0.5, [0.0, 0.3], integrator="rk4", dt_control=p.epsilon**2 / 40)
        assert np.abs(a.values - b.values).max() < 1e-6

    def test_golden_profile(self):
        p = ModelParams(n=2, k_window=2, j_rate=1.0)
        g = profile.solve_rho_eps(p, lambda u: 0.5, [0.0, 0.3])
        golden = [0.38441379647705, 0.42855043278173, 0.5, 0.57144956721827, 0.61558620352295]
        assert np.abs(g.values[1] - golden).max() < 5e-7

    def test_stays_in_unit_interval(self):
        p = ModelParams(n=16, k_window=3, j_rate=3.0)
        g = profile.solve_rho_eps(p, lambda u: 1.0 if u < 0 else 0.0, [0.0, 0.05, 0.5])
        assert g.values.min() >= -1e-8 and g.values.max() <= 1 + 1e-8

    def test_particle_hole_mirror_symmetry(self):
        # swapping particles<->holes and u -> -u maps injection onto removal
        p = ModelParams(n=8, k_window=2, j_rate=1.0)
        g = profile.solve_rho_eps(p, lambda u: 0.5, [0.0, 0.4])
        assert np.abs(g.values[1] + g.values[1][::-1] - 1.0).max() < 1e-9

    def test_bad_inputs(self):
        p = ModelParams(n=4, k_window=2, j_rate=1.0)
        with pytest.raises(ValueError):
            profile.solve_rho_eps(p, lambda u: 1.5, [0.0, 0.1])
        with pytest.raises(ValueError):
            profile.solve_rho_eps(p, ramp, [0.1, 0.2])
        with pytest.raises(ValueError):
            profile.solve_rho_eps(p, ramp, [0.0, 0.1], integrator="euler")


class TestGradientStats:
    def test_initial_gradient_bounded_by_profile_slope(self):
        p = ModelParams(n=32, k_window=2, j_rate=1.0)
        g = profile.solve_rho_eps(p, ramp, [0.0, 0.1])
        sup0 = profile.discrete_gradient_stats(g)[0]
        assert sup0 <= 0.25 * p.epsilon + 1e-12

    def test_constant_profile_zero_gradient(self):
        p = ModelParams(n=16, k_window=2, j_rate=0.0)
        g = profile.solve_rho_eps(p, lambda u: 0.4, [0.0, 0.3])
        assert profile.discrete_gradient_stats(g).max() < 1e-12

    def test_scaling_exponent_near_one(self):
        sups = []
        ns = (16, 32, 64, 128)
        for n in ns:
            p = ModelParams(n=n, k_window=2, j_rate=1.0)
            g = profile.solve_rho_eps(p, ramp, [0.0, 0.5])
            sups.append(profile.discrete_gradient_stats(g)[1])
        slope = np.polyfit(np.log([1 / n for n in ns]), np.log(sups), 1)[0]
        assert 0.6 <= slope <= 1.1


class TestMonteCarloProfile:
    def test_matches_oracle_single_site_means(self):
        p = ModelParams(n=3, k_window=2, j_rate=1.0)
        plan = SimulationPlan(p, 0.4, (0.0, 0.4), master_seed=21, n_replicates=60_000)
        mc = profile.mc_discrete_profile(plan, ramp, 0.4)
        gen = oracle.build_generator(p)
        pi0 = oracle.product_measure(p, [ramp(p.epsilon * x) for x in p.sites()])
        means, _ = oracle.two_point_matrix(gen, oracle.exact_distribution(gen, pi0, 0.4))
        zs = [abs(mc[i].mean - means[i]) / mc[i].stderr for i in range(p.n_sites)]
        assert max(zs) <= 3.5

    def test_t0_matches_initial_profile(self):
        p = ModelParams(n=6, k_window=2, j_rate=1.0)
        plan = SimulationPlan(p, 0.2, (0.0, 0.2), master_seed=22, n_replicates=30_000)
        mc = profile.mc_discrete_profile(plan, ramp, 0.0)
        for i, x in enumerate(p.sites()):
            assert abs(mc[i].mean - ramp(p.epsilon * x)) <= 3.5 * max(mc[i].stderr, 1e-9)

    def test_v1_boundary_gap_shrinks_with_n(self):
        # |MC rho_t^eps - rho_eps| at the right edge is the degree-1
        # v-function, O(eps); check it decreases from N=8 to N=32
        gaps = {}
        for n in (8, 32):
            p = ModelParams(n=n, k_window=2, j_rate=1.0)
            plan = SimulationPlan(p, 0.5, (0.5,), master_seed=23, n_replicates=150_000)
            mc = profile.mc_discrete_profile(plan, ramp, 0.5)
            grid = profile.solve_rho_eps(p, ramp, [0.0, 0.5])
            gaps[n] = abs(mc[p.idx(p.n)].mean - grid.value(p.n, 0.5))
        assert gaps[32] < gaps[8]
