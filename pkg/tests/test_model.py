"""Core model: boundary operators, event catalog, configuration algebra."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stirringlab.model import (
    BirthRight,
    Configuration,
    DeathLeft,
    Exchange,
    ModelParams,
    apply_event,
    birth_site,
    d_minus,
    d_plus,
    death_site,
    event_rates,
)


def make_config(params, window_plus=None, window_minus=None, fill=0):
    occ = np.full(params.n_sites, fill, dtype=np.int8)
    if window_plus is not None:
        occ[params.n_sites - params.k_window :] = window_plus
    if window_minus is not None:
        occ[: params.k_window] = window_minus
    return Configuration(occ)


class TestParams:
    def test_window_geometry(self):
        p = ModelParams(n=5, k_window=3, j_rate=1.0)
        assert list(p.i_plus) == [3, 4, 5]
        assert list(p.i_minus) == [-5, -4, -3]
        assert p.epsilon * p.n == 1.0

    def test_overlapping_windows_rejected(self):
        with pytest.raises(ValueError):
            ModelParams(n=2, k_window=3, j_rate=1.0)

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            ModelParams(n=4, k_window=0, j_rate=1.0)
        with pytest.raises(ValueError):
            ModelParams(n=4, k_window=5, j_rate=1.0)


class TestBoundaryOperators:
    def test_d_plus_edge_site(self):
        # K=2: eta(N-1)=1, eta(N)=0 -> D+ at N is 1 (empty product convention)
        p = ModelParams(n=4, k_window=2, j_rate=1.0)
        c = make_config(p, window_plus=[1, 0])
        assert d_plus(c, p, 4) == 1
        assert d_plus(c, p, 3) == 0

    def test_d_plus_first_empty_from_right(self):
        p = ModelParams(n=4, k_window=2, j_rate=1.0)
        c = make_config(p, window_plus=[0, 1])
        assert d_plus(c, p, 3) == 1
        assert d_plus(c, p, 4) == 0

    def test_d_plus_full_window_zero(self):
        for k in (1, 2, 3):
            p = ModelParams(n=4, k_window=k, j_rate=1.0)
            c = make_config(p, window_plus=[1] * k)
            assert all(d_plus(c, p, x) == 0 for x in p.i_plus)

    def test_d_minus_edge_site(self):
        p = ModelParams(n=4, k_window=2, j_rate=1.0)
        c = make_config(p, window_minus=[1, 0])
        assert d_minus(c, p, -4) == 1

    def test_d_minus_first_occupied_from_left(self):
        p = ModelParams(n=4, k_window=2, j_rate=1.0)
        c = make_config(p, window_minus=[0, 1])
        assert d_minus(c, p, -3) == 1
        assert d_minus(c, p, -4) == 0

    def test_d_minus_empty_window_zero(self):
        p = ModelParams(n=4, k_window=3, j_rate=1.0)
        c = make_config(p, window_minus=[0, 0, 0])
        assert all(d_minus(c, p, x) == 0 for x in p.i_minus)

    def test_domain_errors(self):
        p = ModelParams(n=4, k_window=2, j_rate=1.0)
        c = make_config(p)
        with pytest.raises(ValueError):
            d_plus(c, p, 0)
        with pytest.raises(ValueError):
            d_minus(c, p, 4)

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
    def test_window_sum_identity(self, k):
        # sum_{x in I+} D+eta(x) = 1 - prod_{x in I+} eta(x), all 2^K patterns
        p = ModelParams(n=6, k_window=k, j_rate=1.0)
        for pattern in itertools.product((0, 1), repeat=k):
            c = make_config(p, window_plus=list(pattern))
            total = sum(d_plus(c, p, x) for x in p.i_plus)
            assert total == 1 - int(np.prod(pattern))
            assert total in (0, 1)
            cm = make_config(p, window_minus=list(pattern), fill=1)
            total_m = sum(d_minus(cm, p, x) for x in p.i_minus)
            assert total_m == 1 - int(np.prod([1 - b for b in pattern]))


class TestEventCatalog:
    def test_alternating_all_bonds_discordant(self):
        p = ModelParams(n=4, k_window=2, j_rate=0.0)
        c = Configuration(np.arange(p.n_sites) % 2)
        events = event_rates(c, p)
        assert len(events) == 2 * p.n
        assert all(isinstance(e, Exchange) and r == p.n**2 / 2 for e, r in events)
        assert sum(r for _, r in events) == p.n**3

    def test_all_ones_only_death_at_left_edge(self):
        p = ModelParams(n=4, k_window=2, j_rate=1.0)
        c = make_config(p, fill=1)
        events = event_rates(c, p)
        assert len(events) == 1
        ev, rate = events[0]
        assert ev == DeathLeft(-4) and rate == p.n / 2

    def test_concordant_opt_out(self):
        p = ModelParams(n=3, k_window=2, j_rate=0.0)
        c = make_config(p, fill=1)
        assert event_rates(c, p) == []
        full = event_rates(c, p, skip_concordant=False)
        assert len(full) == 2 * p.n

    def test_birth_death_site_scan(self):
        p = ModelParams(n=4, k_window=3, j_rate=1.0)
        c = make_config(p, window_plus=[1, 0, 1], window_minus=[0, 0, 1])
        assert birth_site(c, p) == 3  # first empty scanning from N leftwards
        assert death_site(c, p) == -2  # first occupied scanning from -N rightwards


class TestApplyEvent:
    def test_exchange_swaps(self):
        p = ModelParams(n=2, k_window=2, j_rate=1.0)
        c = Configuration([1, 0, 0, 0, 0])
        c2 = apply_event(c, Exchange(-2), p)
        assert c2.to_string() == "01000"
        assert c.to_string() == "10000"  # value semantics

    def test_exchange_involution_birth_death_idempotent(self):
        p = ModelParams(n=3, k_window=2, j_rate=1.0)
        rng = np.random.default_rng(0)
        for _ in range(50):
            c = Configuration(rng.integers(0, 2, p.n_sites))
            for x in range(-p.n, p.n):
                twice = apply_event(apply_event(c, Exchange(x), p), Exchange(x), p)
                assert np.array_equal(twice.occ, c.occ)
            y = birth_site(c, p)
            if y is not None:
                once = apply_event(c, BirthRight(y), p)
                again = apply_event(once, BirthRight(y), p, check=False)
                assert np.array_equal(once.occ, again.occ)
            z = death_site(c, p)
            if z is not None:
                once = apply_event(c, DeathLeft(z), p)
                again = apply_event(once, DeathLeft(z), p, check=False)
                assert np.array_equal(once.occ, again.occ)

    def test_birth_then_d_plus_zero(self):
        p = ModelParams(n=4, k_window=2, j_rate=1.0)
        c = make_config(p, window_plus=[1, 0])
        y = birth_site(c, p)
        c2 = apply_event(c, BirthRight(y), p)
        assert d_plus(c2, p, y) == 0

    def test_illegal_events_rejected(self):
        p = ModelParams(n=4, k_window=2, j_rate=1.0)
        c = make_config(p, window_plus=[1, 0])
        with pytest.raises(ValueError):
            apply_event(c, BirthRight(3), p)  # D+ is 1 at N=4, not at 3
        with pytest.raises(ValueError):
            apply_event(c, DeathLeft(-4), p)  # site empty
        with pytest.raises(ValueError):
            apply_event(c, Exchange(4), p)  # bond out of range

    @given(st.integers(0, 2**9 - 1))
    @settings(max_examples=64, deadline=None)
    def test_conservation_laws(self, bits):
        p = ModelParams(n=4, k_window=2, j_rate=1.0)
        occ = (bits >> np.arange(9)) & 1
        c = Configuration(occ)
        n0 = c.particle_count()
        for ev, _rate in event_rates(c, p):
            c2 = apply_event(c, ev, p)
            if isinstance(ev, Exchange):
                assert c2.particle_count() == n0
            elif isinstance(ev, BirthRight):
                assert c2.particle_count() == n0 + 1
            else:
                assert c2.particle_count() == n0 - 1


class TestTextForm:
    def test_round_trip(self):
        c = Configuration([0, 1, 1, 0, 1])
        assert c.to_string() == "01101"
        assert np.array_equal(Configuration.from_string("01101").occ, c.occ)

    def test_leftmost_is_minus_n(self):
        c = Configuration([1, 0, 0, 0, 0])
        assert c.value(-2) == 1 and c.value(2) == 0
        assert c.to_string()[0] == "1"

    def test_bad_strings(self):
        with pytest.raises(ValueError):
            Configuration.from_string("01a01")
