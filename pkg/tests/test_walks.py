"""Reflected walk kernels, reflection map, Gaussian bounds, Liggett product bound."""

import math

import numpy as np
import pytest
import scipy.linalg

from stirringlab import walks


class TestReflectionMap:
    @pytest.mark.parametrize("n", [1, 3, 7])
    def test_identity_inside(self, n):
        for x in range(-n, n + 1):
            assert walks.reflection_map(x, n) == x

    def test_first_fold(self):
        assert walks.reflection_map(4, 3) == 3
        assert walks.reflection_map(5, 3) == 2

    def test_odd_extension_left(self):
        for n in (2, 4):
            for x in range(-40, -n):
                assert walks.reflection_map(x, n) == -walks.reflection_map(-x, n)

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_periodicity(self, n):
        period = 2 * (2 * n + 1)
        for x in range(-5 * (2 * n + 1), 5 * (2 * n + 1) + 1):
            assert walks.reflection_map(x + period, n) == walks.reflection_map(x, n)

    def test_image_preimages_partition_z(self):
        # every window of one period maps onto the lattice exactly twice
        n = 3
        m = 2 * n + 1
        targets = [walks.reflection_map(x, n) for x in range(0, 2 * m)]
        for z in range(-n, n + 1):
            assert targets.count(z) == 2


class TestKernels:
    def test_rows_and_symmetry(self):
        tab = walks.reflected_kernel(0.2, 5)
        assert np.abs(tab.p.sum(axis=1) - 1).max() < 1e-12
        assert np.array_equal(tab.p, tab.p.T)

    def test_long_time_uniform(self):
        tab = walks.reflected_kernel(50.0, 3)
        assert np.abs(tab.p - 1.0 / 7).max() < 1e-8

    def test_images_match_spectral(self):
        for n, t in ((3, 0.05), (5, 0.3), (8, 1.0)):
            a = walks.reflected_kernel(t, n)
            b, tail = walks.reflected_kernel_images(t, n)
            assert np.abs(a.p - b.p).max() < 1e-8
            assert tail < 1e-10

    def test_matches_single_particle_expm(self):
        n, t = 3, 0.05
        p_expm = scipy.linalg.expm(walks.single_walk_generator(n) * t)
        assert np.abs(walks.reflected_kernel(t, n).p - p_expm).max() < 1e-10

    def test_chapman_kolmogorov(self):
        n = 4
        a = walks.reflected_kernel(0.07, n).p @ walks.reflected_kernel(0.11, n).p
        assert np.abs(a - walks.reflected_kernel(0.18, n).p).max() < 1e-9

    def test_invalid_time(self):
        with pytest.raises(ValueError):
            walks.reflected_kernel(0.0, 3)
        with pytest.raises(ValueError):
            walks.gaussian_kernel(-1.0, 0, 0)


class TestGaussian:
    def test_peak_value(self):
        assert walks.gaussian_kernel(1.0, 0, 0) == pytest.approx(0.3989422804, abs=1e-9)

    def test_symmetry(self):
        assert walks.gaussian_kernel(2.0, 1, 5) == walks.gaussian_kernel(2.0, 5, 1)

    def test_normalization_riemann(self):
        for t in (4.0, 25.0):
            ys = np.arange(-400, 401)
            assert abs(walks.gaussian_kernel(t, 0, ys).sum() - 1.0) < 1e-6


class TestBounds:
    def test_ratios_finite_and_bounded_on_ci_grid(self):
        reports, ok = walks.check_kernel_bounds([8, 16, 25, 50], [0.05, 0.1, 0.5, 1.0])
        assert ok
        in_window = [r for r in reports if r.in_window]
        assert all(math.isfinite(r.max_ratio) for r in in_window)

    def test_stability_under_doubling_n(self):
        reports, _ = walks.check_kernel_bounds([25, 50], [0.5])
        m25 = max(r.max_ratio for r in reports if r.in_window and r.n == 25)
        m50 = max(r.max_ratio for r in reports if r.in_window and r.n == 50)
        assert m50 / m25 < 1.2 and m25 / m50 < 1.2

    def test_gradient_ratio_decreases_with_time_at_fixed_pair(self):
        # pre-wall diffusion regime: the standardized gradient ratio tracks
        # |x-y|/sqrt(eps^-2 t) and falls as t grows (wall images later add a
        # small non-monotone correction, outside the comparison's regime)
        n, x, y = 25, 0, 5
        vals = []
        for t in (0.05, 0.1, 0.2, 0.4):
            lam = n * n * t
            tab = walks.reflected_kernel(t, n)
            g = walks.gaussian_kernel(lam, x, y)
            vals.append(abs(tab.value(x, y) - tab.value(x + 1, y)) * math.sqrt(lam) / g)
        assert all(vals[i + 1] < vals[i] for i in range(len(vals) - 1))


class TestLiggett:
    def test_single_particle_equality(self):
        rep = walks.check_liggett(3, 0.1, 1)
        assert rep.holds and abs(rep.min_slack) < 1e-12

    def test_pairs_and_triples(self):
        assert walks.check_liggett(3, 0.2, 2).holds
        assert walks.check_liggett(4, 0.1, 3).holds

    def test_capacity_guard(self):
        with pytest.raises(ValueError):
            walks.sector_transition_matrix(6, 2, 0.1)

    def test_sector_matrix_stochastic(self):
        _states, p = walks.sector_transition_matrix(3, 2, 0.3)
        assert np.abs(p.sum(axis=1) - 1).max() < 1e-10
