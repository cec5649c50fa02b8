"""Closed-form bound arithmetic and event-model dominance tests."""

import numpy as np
import pytest

from npvo.bounds import (
    BoundKind,
    BoundQuery,
    RateEstimate,
    collision_bound,
    empirical_collision_rate,
    valid_queries,
)


class TestClosedForm:
    def test_single_agent_arithmetic(self):
        assert collision_bound(
            BoundQuery(BoundKind.SINGLE_AGENT, 0.8, 1)
        ) == pytest.approx(0.2, abs=1e-15)

    def test_dual_reciprocal_arithmetic(self):
        assert collision_bound(
            BoundQuery(BoundKind.DUAL_RECIPROCAL, 0.8, 2)
        ) == pytest.approx(0.04, abs=1e-15)

    def test_multi_obstacle_arithmetic(self):
        got = collision_bound(BoundQuery(BoundKind.MULTI_OBSTACLE, 0.8, 3))
        assert got == pytest.approx(1.0 - 0.512, abs=1e-15)

    def test_n_reciprocal_two_agents_equals_dual_exactly(self):
        for theta in (0.5, 0.7, 0.8, 0.9, 0.95, 0.99, 0.123456789):
            dual = collision_bound(BoundQuery(BoundKind.DUAL_RECIPROCAL, theta, 2))
            recip = collision_bound(BoundQuery(BoundKind.N_RECIPROCAL, theta, 2))
            assert recip == dual

    def test_n_reciprocal_pair_exponent(self):
        theta = 0.8
        got = collision_bound(BoundQuery(BoundKind.N_RECIPROCAL, theta, 4))
        assert got == pytest.approx(1.0 - (2 * theta - theta**2) ** 6, abs=1e-15)

    def test_bounds_strictly_decreasing_in_theta(self):
        thetas = np.linspace(0.05, 0.95, 19)
        for kind, n in [
            (BoundKind.SINGLE_AGENT, 1),
            (BoundKind.DUAL_RECIPROCAL, 2),
            (BoundKind.MULTI_OBSTACLE, 4),
            (BoundKind.N_RECIPROCAL, 5),
        ]:
            vals = [collision_bound(BoundQuery(kind, t, n)) for t in thetas]
            assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_bounds_nondecreasing_in_n(self):
        for theta in (0.5, 0.9):
            multi = [
                collision_bound(BoundQuery(BoundKind.MULTI_OBSTACLE, theta, n))
                for n in range(1, 7)
            ]
            recip = [
                collision_bound(BoundQuery(BoundKind.N_RECIPROCAL, theta, n))
                for n in range(2, 7)
            ]
            assert all(a <= b for a, b in zip(multi, multi[1:]))
            assert all(a <= b for a, b in zip(recip, recip[1:]))

    def test_query_validation(self):
        with pytest.raises(ValueError):
            BoundQuery(BoundKind.SINGLE_AGENT, 0.0, 1)
        with pytest.raises(ValueError):
            BoundQuery(BoundKind.SINGLE_AGENT, 1.0, 1)
        with pytest.raises(ValueError):
            BoundQuery(BoundKind.SINGLE_AGENT, 0.8, 2)
        with pytest.raises(ValueError):
            BoundQuery(BoundKind.DUAL_RECIPROCAL, 0.8, 3)
        with pytest.raises(ValueError):
            BoundQuery(BoundKind.N_RECIPROCAL, 0.8, 1)
        with pytest.raises(ValueError):
            BoundQuery(BoundKind.MULTI_OBSTACLE, 0.8, 0)


class TestEventModel:
    def test_theta_one_like_never_collides(self):
        # theta -> 1 admits no failures up to float resolution of the draw.
        rng = np.random.default_rng(0)
        for kind, n in [
            (BoundKind.SINGLE_AGENT, 1),
            (BoundKind.DUAL_RECIPROCAL, 2),
            (BoundKind.MULTI_OBSTACLE, 4),
            (BoundKind.N_RECIPROCAL, 3),
        ]:
            est = empirical_collision_rate(kind, 1.0 - 1e-12, n, 2000, rng)
            assert est.rate == 0.0

    def test_single_agent_rate_matches_formula(self):
        rng = np.random.default_rng(21)
        est = empirical_collision_rate(
            BoundKind.SINGLE_AGENT, 0.8, 1, 100_000, rng
        )
        assert abs(est.rate - 0.2) <= 0.004
        assert est.std_error == pytest.approx(
            np.sqrt(est.rate * (1 - est.rate) / 100_000), abs=1e-12
        )

    def test_n_reciprocal_rate_below_ceiling(self):
        rng = np.random.default_rng(22)
        est = empirical_collision_rate(
            BoundKind.N_RECIPROCAL, 0.8, 4, 100_000, rng
        )
        bound = collision_bound(BoundQuery(BoundKind.N_RECIPROCAL, 0.8, 4))
        assert bound == pytest.approx(1.0 - 0.96**6, abs=1e-15)
        assert est.rate <= bound + 3.0 * est.std_error

    def test_dominance_over_full_grid(self):
        # Acceptance-scale sweep at reduced trial count; the acceptance
        # suite repeats this at 100 000 trials per cell.
        rng = np.random.default_rng(23)
        for q in valid_queries():
            est = empirical_collision_rate(q.kind, q.theta, q.n, 20_000, rng)
            bound = collision_bound(q)
            assert est.rate <= bound + 3.0 * est.std_error, (q, est.rate, bound)

    def test_rate_estimate_upper_helper(self):
        est = RateEstimate(rate=0.1, std_error=0.01, trials=100)
        assert est.upper() == pytest.approx(0.13, abs=1e-15)
        assert est.upper(2.0) == pytest.approx(0.12, abs=1e-15)

    def test_trials_validation(self):
        with pytest.raises(ValueError):
            empirical_collision_rate(
                BoundKind.SINGLE_AGENT, 0.8, 1, 0, np.random.default_rng(0)
            )

    def test_valid_queries_cover_kinds_and_ranges(self):
        queries = valid_queries()
        kinds = {q.kind for q in queries}
        assert kinds == set(BoundKind)
        multi_ns = {q.n for q in queries if q.kind is BoundKind.MULTI_OBSTACLE}
        recip_ns = {q.n for q in queries if q.kind is BoundKind.N_RECIPROCAL}
        assert multi_ns == {1, 2, 3, 4, 5, 6}
        assert recip_ns == {2, 3, 4, 5, 6}
