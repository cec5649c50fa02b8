"""Velocity-obstacle membership and safe-velocity solver tests."""

import numpy as np
import pytest

from npvo.geometry import Ellipsoid, chi2_threshold
from npvo.velocity_obstacles import (
    Npvo,
    SafeVelocityResult,
    SolverParams,
    build_multi_agent_npvo,
    dump_velocity_grid,
    find_safe_velocity,
    npvo_membership,
)

THR95 = 5.991464547107979


def point_obstacle_npvo(floor: float = 1e-6) -> Npvo:
    """Obstacle glued to (5, 0) with point-like (floored) ellipsoids."""
    ells = [
        Ellipsoid(
            center=np.array([5.0, 0.0]),
            sigma=np.eye(2) * floor,
            threshold=THR95,
        )
        for _ in range(5)
    ]
    return Npvo(
        agent_position=np.zeros(2),
        ellipsoids=[ells],
        safety_radius=1.0,
        dt=1.0,
    )


class TestMembership:
    def test_zero_velocity_far_from_point_obstacle_is_safe(self):
        npvo = point_obstacle_npvo()
        assert npvo_membership(np.zeros(2), npvo) is False

    def test_unit_velocity_hits_point_obstacle_at_step_five(self):
        npvo = point_obstacle_npvo()
        assert npvo_membership(np.array([1.0, 0.0]), npvo) is True

    def test_slower_approach_stays_clear_within_horizon(self):
        # At k=5 the agent reaches (3.75, 0), 1.25 m from the obstacle;
        # the inflated point ellipsoid only reaches out ~1.0025 m.
        npvo = point_obstacle_npvo()
        assert npvo_membership(np.array([0.75, 0.0]), npvo) is False

    def test_membership_is_closed_at_inflated_boundary(self):
        # Unit circle (sigma=I, threshold=1) at (5,0) inflated by r_s=1
        # has radius exactly 2; v=(3,0) with dt=1 grazes it at k=1.
        e = Ellipsoid(center=np.array([5.0, 0.0]), sigma=np.eye(2), threshold=1.0)
        npvo = Npvo(
            agent_position=np.zeros(2), ellipsoids=[[e]],
            safety_radius=1.0, dt=1.0,
        )
        assert npvo_membership(np.array([3.0, 0.0]), npvo) is True
        assert npvo_membership(np.array([3.0 - 1e-9, 0.0]), npvo) is False

    def test_vectorized_membership_matches_scalar_loop(self):
        rng = np.random.default_rng(7)
        ells = [
            Ellipsoid(
                center=rng.normal(size=2) * 3.0,
                sigma=np.eye(2) * rng.uniform(0.05, 0.5),
                threshold=THR95,
            )
            for _ in range(4)
        ]
        npvo = Npvo(
            agent_position=rng.normal(size=2), ellipsoids=[ells[:2], ells[2:]],
            safety_radius=0.4, dt=0.5,
        )
        vels = rng.uniform(-2.0, 2.0, size=(64, 2))
        batch = npvo.membership(vels)
        single = np.array([npvo.membership(v) for v in vels])
        assert batch.shape == (64,)
        assert np.array_equal(batch, single)

    def test_union_over_obstacles(self):
        rng = np.random.default_rng(11)
        preds = []
        for _ in range(3):
            center = rng.normal(size=2) * 2.0
            preds.append(
                [
                    Ellipsoid(
                        center=center + rng.normal(size=2) * 0.2,
                        sigma=np.eye(2) * 0.1,
                        threshold=THR95,
                    )
                    for _ in range(4)
                ]
            )
        union = Npvo(
            agent_position=np.zeros(2), ellipsoids=preds,
            safety_radius=0.3, dt=0.5,
        )
        singles = [
            Npvo(
                agent_position=np.zeros(2), ellipsoids=[p],
                safety_radius=0.3, dt=0.5,
            )
            for p in preds
        ]
        vels = rng.uniform(-2.0, 2.0, size=(200, 2))
        got = union.membership(vels)
        want = np.any([s.membership(vels) for s in singles], axis=0)
        assert np.array_equal(got, want)

    def test_membership_monotone_in_safety_radius(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            a = rng.normal(size=(2, 2))
            sigma = a @ a.T + 0.05 * np.eye(2)
            ells = [
                Ellipsoid(
                    center=rng.normal(size=2) * 2.0, sigma=sigma,
                    threshold=THR95,
                )
            ]
            kw = dict(agent_position=np.zeros(2), ellipsoids=[ells], dt=0.5)
            small = Npvo(safety_radius=0.2, **kw)
            large = Npvo(safety_radius=0.8, **kw)
            vels = rng.uniform(-3.0, 3.0, size=(100, 2))
            m_small = small.membership(vels)
            m_large = large.membership(vels)
            # Larger safety radius can only add members.
            assert np.all(m_large[m_small])

    def test_translation_equivariance(self):
        rng = np.random.default_rng(23)
        shift = np.array([13.5, -7.25])
        ells = [
            Ellipsoid(
                center=np.array([2.0, 1.0]) + 0.1 * k,
                sigma=np.eye(2) * 0.2,
                threshold=THR95,
            )
            for k in range(5)
        ]
        moved = [
            Ellipsoid(center=e.center + shift, sigma=e.sigma, threshold=e.threshold)
            for e in ells
        ]
        base = Npvo(
            agent_position=np.zeros(2), ellipsoids=[ells],
            safety_radius=0.5, dt=0.5,
        )
        shifted = Npvo(
            agent_position=shift, ellipsoids=[moved],
            safety_radius=0.5, dt=0.5,
        )
        vels = rng.uniform(-2.0, 2.0, size=(150, 2))
        assert np.array_equal(base.membership(vels), shifted.membership(vels))

    def test_penetration_positive_iff_member_off_boundary(self):
        rng = np.random.default_rng(29)
        ells = [
            Ellipsoid(
                center=np.array([1.0, 0.5]), sigma=np.eye(2) * 0.3,
                threshold=THR95,
            )
        ]
        npvo = Npvo(
            agent_position=np.zeros(2), ellipsoids=[ells],
            safety_radius=0.4, dt=1.0,
        )
        vels = rng.uniform(-3.0, 3.0, size=(300, 2))
        member = npvo.membership(vels)
        depth = npvo.penetration(vels)
        assert np.all((depth > 0.0) == member)
        assert np.all(depth <= 1.0)


class TestValidation:
    def test_rejects_bad_construction(self):
        e = Ellipsoid(center=np.zeros(2), sigma=np.eye(2), threshold=1.0)
        with pytest.raises(ValueError):
            Npvo(agent_position=np.zeros(2), ellipsoids=[[e]], safety_radius=-0.1, dt=1.0)
        with pytest.raises(ValueError):
            Npvo(agent_position=np.zeros(2), ellipsoids=[[e]], safety_radius=0.5, dt=0.0)
        with pytest.raises(ValueError):
            Npvo(agent_position=np.zeros(2), ellipsoids=[], safety_radius=0.5, dt=1.0)
        with pytest.raises(ValueError):
            Npvo(agent_position=np.zeros(2), ellipsoids=[[]], safety_radius=0.5, dt=1.0)
        with pytest.raises(ValueError):
            Npvo(agent_position=np.zeros(3), ellipsoids=[[e]], safety_radius=0.5, dt=1.0)

    def test_build_multi_agent_requires_predictions(self):
        with pytest.raises(ValueError):
            build_multi_agent_npvo(np.zeros(2), [], safety_radius=0.5, dt=1.0)

    def test_solver_rejects_bad_inputs(self):
        npvo = point_obstacle_npvo()
        with pytest.raises(ValueError):
            find_safe_velocity(npvo, np.array([1.0, 0.0]), v_max=0.0)
        with pytest.raises(ValueError):
            find_safe_velocity(npvo, np.array([2.0, 0.0]), v_max=1.0)
        with pytest.raises(ValueError):
            find_safe_velocity(npvo, np.array([np.nan, 0.0]), v_max=1.0)
        with pytest.raises(ValueError):
            SolverParams(n_angles=2)


def dead_ahead_npvo() -> Npvo:
    """Obstacle parked at (2, 0) with tight predictions; agent wants (1, 0)."""
    ells = [
        Ellipsoid(
            center=np.array([2.0, 0.0]), sigma=np.eye(2) * 0.01,
            threshold=THR95,
        )
        for _ in range(10)
    ]
    return Npvo(
        agent_position=np.zeros(2), ellipsoids=[ells],
        safety_radius=0.5, dt=0.5,
    )


class TestSolver:
    def test_desired_velocity_returned_exactly_when_free(self):
        npvo = point_obstacle_npvo()
        desired = np.array([0.3, -0.4])
        res = find_safe_velocity(npvo, desired, v_max=1.0)
        assert res.feasible
        assert np.array_equal(res.velocity, desired)
        assert res.distance_to_desired == 0.0
        assert res.penetration_depth == 0.0

    def test_solver_matches_dense_grid_oracle(self):
        npvo = dead_ahead_npvo()
        desired = np.array([1.0, 0.0])
        res = find_safe_velocity(npvo, desired, v_max=1.0)
        assert res.feasible
        assert not npvo.membership(res.velocity)
        assert np.hypot(*res.velocity) <= 1.0 + 1e-9

        # Independent dense search: 0.01-spaced cartesian grid over the disk.
        axis = np.arange(-1.0, 1.0 + 1e-9, 0.01)
        vx, vy = np.meshgrid(axis, axis)
        pts = np.stack([vx.ravel(), vy.ravel()], axis=1)
        pts = pts[np.sum(pts**2, axis=1) <= 1.0 + 1e-12]
        free = pts[~npvo.membership(pts)]
        oracle = float(np.min(np.sqrt(np.sum((free - desired) ** 2, axis=1))))
        # Frozen from a dense-grid run of this exact configuration.
        assert abs(oracle - 0.3733630940518883) < 1e-12
        # Solver within one oracle cell diagonal of the dense optimum.
        assert res.distance_to_desired <= oracle + 0.01 * np.sqrt(2.0)
        assert res.distance_to_desired >= oracle - 0.01 * np.sqrt(2.0)

    def test_refinement_never_worse_than_coarse_grid(self):
        npvo = dead_ahead_npvo()
        desired = np.array([1.0, 0.0])
        coarse = find_safe_velocity(
            npvo, desired, v_max=1.0,
            params=SolverParams(n_refinements=0),
        )
        fine = find_safe_velocity(
            npvo, desired, v_max=1.0,
            params=SolverParams(n_refinements=3),
        )
        assert fine.distance_to_desired <= coarse.distance_to_desired

    def test_solver_is_deterministic(self):
        npvo = dead_ahead_npvo()
        desired = np.array([1.0, 0.0])
        a = find_safe_velocity(npvo, desired, v_max=1.0)
        b = find_safe_velocity(npvo, desired, v_max=1.0)
        assert np.array_equal(a.velocity, b.velocity)
        assert a.distance_to_desired == b.distance_to_desired

    def test_covered_disk_reports_infeasible_min_penetration(self):
        big = Ellipsoid(
            center=np.zeros(2), sigma=np.eye(2) * 100.0, threshold=THR95,
        )
        npvo = Npvo(
            agent_position=np.zeros(2), ellipsoids=[[big]],
            safety_radius=0.5, dt=0.5,
        )
        desired = np.array([0.5, 0.0])
        res = find_safe_velocity(npvo, desired, v_max=1.0)
        assert not res.feasible
        assert 0.0 < res.penetration_depth < 1.0
        # Least penetration pushes outward at full speed along the desired
        # heading (the depth field is radially symmetric here).
        assert np.hypot(*res.velocity) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(res.velocity, [1.0, 0.0], atol=1e-12)
        assert res.penetration_depth == pytest.approx(
            float(npvo.penetration(res.velocity)[0]), abs=1e-15,
        )

    def test_solver_soundness_across_random_scenes(self):
        rng = np.random.default_rng(37)
        for _ in range(15):
            ells = [
                [
                    Ellipsoid(
                        center=rng.normal(size=2) * 1.5,
                        sigma=np.eye(2) * rng.uniform(0.02, 0.3),
                        threshold=THR95,
                    )
                    for _ in range(6)
                ]
                for _ in range(2)
            ]
            npvo = Npvo(
                agent_position=np.zeros(2), ellipsoids=ells,
                safety_radius=0.3, dt=0.5,
            )
            angle = rng.uniform(0.0, 2.0 * np.pi)
            desired = np.array([np.cos(angle), np.sin(angle)])
            res = find_safe_velocity(npvo, desired, v_max=1.0)
            if res.feasible:
                assert not npvo.membership(res.velocity)
            else:
                assert res.penetration_depth > 0.0

    def test_solver_translation_equivariance(self):
        shift = np.array([40.0, -12.0])
        base = dead_ahead_npvo()
        moved = Npvo(
            agent_position=base.agent_position + shift,
            ellipsoids=[
                [
                    Ellipsoid(
                        center=e.center + shift, sigma=e.sigma,
                        threshold=e.threshold,
                    )
                    for e in per
                ]
                for per in base.ellipsoids
            ],
            safety_radius=base.safety_radius,
            dt=base.dt,
        )
        desired = np.array([1.0, 0.0])
        a = find_safe_velocity(base, desired, v_max=1.0)
        b = find_safe_velocity(moved, desired, v_max=1.0)
        assert np.array_equal(a.velocity, b.velocity)
        assert a.feasible == b.feasible


class TestGridDump:
    def test_dump_velocity_grid_matches_membership(self):
        npvo = dead_ahead_npvo()
        grid = dump_velocity_grid(npvo, v_max=1.0, resolution=41)
        assert grid.shape[1] == 3
        speeds = np.sqrt(np.sum(grid[:, :2] ** 2, axis=1))
        assert np.all(speeds <= 1.0 + 1e-9)
        flags = grid[:, 2]
        assert set(np.unique(flags)).issubset({0.0, 1.0})
        recheck = npvo.membership(grid[:, :2]).astype(np.float64)
        assert np.array_equal(flags, recheck)
        assert 0 < int(flags.sum()) < grid.shape[0]
