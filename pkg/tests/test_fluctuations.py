"""Density fluctuation field, Dynkin pieces, empirical and limiting covariances."""

import math

import numpy as np
import pytest

from stirringlab.model import ModelParams
from stirringlab.engine import SimulationPlan, run_dynkin
from stirringlab import fluctuations as fl
from stirringlab import macro, oracle, profile


def ramp(u):
    return 0.25 * (1 + u)


MESH = np.linspace(-1, 1, 401)


class TestFieldValue:
    def test_zero_function(self):
        p = ModelParams(n=8, k_window=2, j_rate=1.0)
        occ = np.random.default_rng(0).integers(0, 2, p.n_sites)
        assert fl.field_value(occ, np.zeros(p.n_sites), np.full(p.n_sites, 0.3), p.epsilon) == 0.0

    def test_linearity_exact(self):
        p = ModelParams(n=8, k_window=2, j_rate=1.0)
        rng = np.random.default_rng(1)
        occ = rng.integers(0, 2, p.n_sites).astype(float)
        c = rng.uniform(0, 1, p.n_sites)
        h1, h2 = rng.normal(size=p.n_sites), rng.normal(size=p.n_sites)
        lhs = fl.field_value(occ, 2 * h1 - 3 * h2, c, p.epsilon)
        rhs = 2 * fl.field_value(occ, h1, c, p.epsilon) - 3 * fl.field_value(occ, h2, c, p.epsilon)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_magnitude_bound(self):
        p = ModelParams(n=8, k_window=2, j_rate=1.0)
        h = np.random.default_rng(2).normal(size=p.n_sites)
        occ = np.ones(p.n_sites)
        val = fl.field_value(occ, h, np.zeros(p.n_sites), p.epsilon)
        assert abs(val) <= math.sqrt(p.epsilon) * p.n_sites * np.abs(h).max() + 1e-12


class TestInitialFieldVariance:
    def test_var_y0_approaches_chi_integral(self):
        # exact at finite N: eps sum H^2 chi(u0); Riemann error to the
        # continuum integral shrinks with N
        h_cont = lambda u: np.cos(np.pi * (u + 1) / 2) ** 2
        w = macro._simpson_weights(401, MESH[1] - MESH[0])
        target = float((fl.chi(ramp(MESH)) * h_cont(MESH) ** 2) @ w)
        gaps = []
        for n in (16, 64):
            p = ModelParams(n=n, k_window=2, j_rate=1.0)
            u = p.epsilon * p.sites()
            exact_var = p.epsilon * float((fl.chi(ramp(u)) * h_cont(u) ** 2).sum())
            gaps.append(abs(exact_var - target))
            plan = SimulationPlan(p, 0.1, (0.0, 0.1), master_seed=41, n_replicates=20_000)
            grid = profile.solve_rho_eps(p, ramp, [0.0, 0.1])
            f = fl.FieldFunctional(h_cont(u), 0.0, plan, grid)
            y = fl.field_samples(plan, ramp, [f])[:, 0]
            var = y.var(ddof=1)
            assert abs(var - exact_var) < 3 * var * math.sqrt(2 / (len(y) - 1))
        assert gaps[1] < gaps[0]


class TestDynkin:
    def test_requires_dense_mode(self):
        with pytest.raises(ValueError):
            fl.dynkin_residual({"z": np.zeros((2, 2))}, 1)

    def test_martingale_and_qv_zero_mean(self):
        p = ModelParams(n=4, k_window=2, j_rate=1.0)
        u = p.epsilon * p.sites()
        h = 0.5 + 0.25 * u
        plan = SimulationPlan(p, 0.4, (0.0, 0.4), master_seed=42, n_replicates=8_000)
        res = run_dynkin(plan, ramp, h)
        m_t, pieces = fl.dynkin_residual(res, 1)
        assert abs(m_t.mean()) <= 3 * m_t.std(ddof=1) / math.sqrt(m_t.size)
        qv = m_t**2 - pieces["qv_integral"]
        assert abs(qv.mean()) <= 3 * qv.std(ddof=1) / math.sqrt(qv.size)

    def test_conserved_field_when_j_zero_and_h_constant(self):
        p = ModelParams(n=4, k_window=2, j_rate=0.0)
        plan = SimulationPlan(p, 0.3, (0.0, 0.3), master_seed=43, n_replicates=500)
        res = run_dynkin(plan, lambda u: 0.5, np.ones(p.n_sites))
        m_t, _ = fl.dynkin_residual(res, 1)
        assert np.abs(m_t).max() == 0.0

    def test_maximal_jump_bound(self):
        p = ModelParams(n=6, k_window=2, j_rate=1.0)
        u = p.epsilon * p.sites()
        h = np.cos(np.pi * (u + 1) / 2) ** 2
        plan = SimulationPlan(p, 0.3, (0.3,), master_seed=44, n_replicates=2_000)
        res = run_dynkin(plan, ramp, h)
        assert res["max_jump"].max() <= 2 * math.sqrt(p.epsilon) * np.abs(h).max() + 1e-12

    def test_centering_substitution_bias_bound(self):
        # field with rho_eps centering minus field with exact-mean centering
        # is deterministic: sqrt(eps) sum H v1; check the stated bound
        p = ModelParams(n=3, k_window=2, j_rate=1.0)
        gen = oracle.build_generator(p)
        pi0 = oracle.product_measure(p, [ramp(p.epsilon * x) for x in p.sites()])
        means, _ = oracle.two_point_matrix(gen, oracle.exact_distribution(gen, pi0, 0.4))
        grid = profile.solve_rho_eps(p, ramp, [0.0, 0.4])
        v1 = means - grid.values[1]
        u = p.epsilon * p.sites()
        h = 0.5 + 0.25 * u
        occ = np.ones(p.n_sites)
        shift = fl.field_value(occ, h, grid.values[1], p.epsilon) - fl.field_value(occ, h, means, p.epsilon)
        assert abs(shift) <= math.sqrt(p.epsilon) * p.n_sites * np.abs(h).max() * np.abs(v1).max() + 1e-12


class TestEmpiricalCovariance:
    def test_small_sample_refused(self):
        with pytest.raises(ValueError):
            fl.empirical_field_covariance(np.zeros((50, 2)), [("a", 0, "b", 0, 0, 1)])

    def test_matches_oracle_variance_tiny_n(self):
        p = ModelParams(n=3, k_window=2, j_rate=1.0)
        t = 0.4
        gen = oracle.build_generator(p)
        pi0 = oracle.product_measure(p, [ramp(p.epsilon * x) for x in p.sites()])
        pi_t = oracle.exact_distribution(gen, pi0, t)
        means, second = oracle.two_point_matrix(gen, pi_t)
        u = p.epsilon * p.sites()
        h = np.cos(np.pi * (u + 1) / 2) ** 2
        cov_matrix = second - np.outer(means, means)
        exact_var = p.epsilon * float(h @ cov_matrix @ h)
        grid = profile.solve_rho_eps(p, ramp, [0.0, t])
        plan = SimulationPlan(p, t, (t,), master_seed=45, n_replicates=40_000)
        f = fl.FieldFunctional(h, t, plan, grid)
        samples = fl.field_samples(plan, ramp, [f])
        rows = fl.empirical_field_covariance(samples, [("H", t, "H", t, 0, 0)], oracles=[exact_var])
        assert abs(rows[0].zscore) <= 3.0

    def test_symmetry_in_arguments(self):
        rng = np.random.default_rng(9)
        samples = rng.normal(size=(500, 2))
        a = fl.empirical_field_covariance(samples, [("x", 0, "y", 0, 0, 1)])[0]
        b = fl.empirical_field_covariance(samples, [("y", 0, "x", 0, 1, 0)])[0]
        assert a.empirical == pytest.approx(b.empirical, abs=1e-15)


class TestOUOracle:
    @pytest.fixture(scope="class")
    def macro_j0(self):
        return macro.solve_robin(lambda u: 0.5, 2, 0.0, t_grid=[0, 0.5])

    @pytest.fixture(scope="class")
    def macro_j1(self):
        return macro.solve_robin(ramp, 2, 1.0, t_grid=np.round(np.linspace(0, 0.5, 101), 12))

    def test_zero_function(self, macro_j0):
        v, _ = fl.ou_covariance_oracle(np.zeros(401), 0.3, np.zeros(401), 0.3, macro_j0, lambda u: 0.5)
        assert v == 0.0

    def test_j0_equilibrium_closed_form(self, macro_j0):
        # stationarity: Var(Y_t(H)) = chi(1/2) int H^2 for every t
        h = np.cos(np.pi * (MESH + 1) / 2) ** 2
        w = macro._simpson_weights(401, MESH[1] - MESH[0])
        closed = 0.25 * float((h * h) @ w)
        for t in (0.2, 0.5):
            v, rep = fl.ou_covariance_oracle(h, t, h, t, macro_j0, lambda u: 0.5)
            assert abs(v - closed) / closed < 1e-4
            assert rep["rel_change"] < 0.003

    def test_bilinear_symmetric_at_equal_times(self, macro_j1):
        from stirringlab.testfunctions import load_registry

        tfs = load_registry(["cos2plus", "bump"], macro_j1)
        h = tfs["cos2plus"].value(MESH, 0.4)
        g = tfs["bump"].value(MESH, 0.4)
        a, _ = fl.ou_covariance_oracle(h, 0.4, g, 0.4, macro_j1, ramp)
        b, _ = fl.ou_covariance_oracle(g, 0.4, h, 0.4, macro_j1, ramp)
        assert a == pytest.approx(b, rel=1e-10)

    def test_nonmember_rejected(self, macro_j1):
        with pytest.raises(ValueError):
            fl.ou_covariance_oracle(np.ones(401), 0.4, np.ones(401), 0.4, macro_j1, ramp)

    def test_unequal_times_covariance_smaller_than_variance(self, macro_j1):
        from stirringlab.testfunctions import load_registry

        tf = load_registry(["cos2plus"], macro_j1)["cos2plus"]
        var, _ = fl.ou_covariance_oracle(tf.value(MESH, 0.5), 0.5, tf.value(MESH, 0.5), 0.5, macro_j1, ramp)
        cov, _ = fl.ou_covariance_oracle(tf.value(MESH, 0.5), 0.5, tf.value(MESH, 0.2), 0.2, macro_j1, ramp)
        assert 0 < cov < var
