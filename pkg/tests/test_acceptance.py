"""Acceptance suite: one test per criterion, each printing PASS/FAIL.

Run with `pytest tests/test_acceptance.py -s` to watch the lines appear;
the full suite takes on the order of ten minutes, dominated by the
end-to-end navigation runs.
"""
import math
import time

import numpy as np
import pytest
import sympy

from gennav.control import BatteryCompensator
from gennav.costmap import Costmap, CostmapConfig, INSCRIBED, LETHAL
from gennav.errors import LocalMinimumError, NoPathError
from gennav.geometry import LaserScan, Pose2D, Twist2D, integrate_twist
from gennav.localization import MclConfig
from gennav.map_io import load_map, save_map
from gennav.mapping import map_iou
from gennav.planning import DwaConfig, GlobalPath, plan_global, plan_local
from gennav.rangeflow import estimate_twist
from gennav.runner import (
    fig5_mapping_script,
    run_battery_experiment,
    run_localization_eval,
    run_mapping_script,
    run_navigation,
)
from gennav.sim import PlantConfig, QUADPLANAR, raycast_scan
from gennav.world import grid_geometry_for

from oracles import bellman_optimal_cost, exhaustive_dwa

GOALS = [
    Pose2D(8.0, 8.0, 0.0),
    Pose2D(2.0, 8.0, 1.57),
    Pose2D(8.5, 2.0, 3.1),
    Pose2D(5.0, 7.5, -1.0),
]
SEEDS_PER_GOAL = 5
MAX_WALL_SECONDS = 60.0

_nav_results: dict = {}


def report(criterion: int, passed: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")


def _run_goal_suite(world, world_map, kind: str):
    plant = PlantConfig(kind=kind)
    start = world.spawn("start")
    results = []
    for gi, goal in enumerate(GOALS):
        for s in range(SEEDS_PER_GOAL):
            seed = 100 + gi * 10 + s
            t0 = time.monotonic()
            run = run_navigation(world, world_map, start, goal, plant=plant,
                                 seed=seed)
            wall = time.monotonic() - t0
            results.append((run, wall))
    return results


def _suite_ok(results):
    return all(
        run.reached and run.d_e <= 0.10 and run.alpha <= 20.0
        and run.contacts_while_executing == 0 and wall < MAX_WALL_SECONDS
        for run, wall in results
    )


class TestCriterion1EndToEnd:
    def test_navigation_accuracy_diffdrive(self, world, world_map):
        results = _run_goal_suite(world, world_map, "diffdrive")
        _nav_results["diffdrive"] = results
        reached = sum(r.reached for r, _ in results)
        worst_d = max(r.d_e for r, _ in results)
        worst_a = max(r.alpha for r, _ in results)
        worst_w = max(w for _, w in results)
        ok = _suite_ok(results)
        report(1, ok, f"diffdrive {reached}/20 reached, worst d_e={worst_d:.3f} m, "
                      f"alpha={worst_a:.1f} deg, wall={worst_w:.1f} s")
        assert reached == 20
        assert worst_d <= 0.10
        assert worst_a <= 20.0
        assert worst_w < MAX_WALL_SECONDS
        assert all(r.contacts_while_executing == 0 for r, _ in results)


class TestCriterion2BatteryOracle:
    def test_correction_matches_symbolic_evaluation(self):
        k_s, v_s, vp_s = sympy.symbols("k V Vp")
        symbolic = sympy.lambdify((k_s, v_s, vp_s),
                                  k_s * (2 * v_s - vp_s) / v_s, "math")
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(1000):
            k = float(rng.uniform(-1.0, 1.0))
            v = float(rng.uniform(6.0, 25.0))
            vp = float(rng.uniform(0.4 * v, 1.1 * v))
            comp = BatteryCompensator(v_nominal=v)
            got = comp.correct(k, vp)
            expected = symbolic(k, v, vp)
            if abs(expected) > 1.0:
                assert got == math.copysign(1.0, expected)
            else:
                worst = max(worst, abs(got - expected))
                assert abs(got - expected) <= 1e-12
        report(2, True, f"1000 triples, worst pre-clamp deviation {worst:.2e}")


class TestCriterion3BatteryExperiment:
    def test_droop_compensation(self):
        uncorrected = run_battery_experiment(correction_on=False)
        corrected = run_battery_experiment(correction_on=True)
        droop_u = (uncorrected.v_nominal - uncorrected.v_final) / uncorrected.v_nominal
        droop_c = (corrected.v_nominal - corrected.v_final) / corrected.v_nominal
        ok = (abs(uncorrected.relative_error - droop_u) <= 1e-6
              and corrected.relative_error <= droop_c**2 + 1e-9
              and droop_u <= 0.15)
        report(3, ok, f"uncorrected err {uncorrected.relative_error:.6f} "
                      f"(dV/V {droop_u:.6f}); corrected {corrected.relative_error:.6f} "
                      f"<= (dV/V)^2 {droop_c**2:.6f}")
        assert abs(uncorrected.relative_error - droop_u) <= 1e-6
        assert corrected.relative_error <= droop_c**2 + 1e-9
        assert droop_u <= 0.15


class TestCriterion4DijkstraOptimality:
    def test_hundred_random_costmaps(self):
        rng = np.random.default_rng(7)
        cfg = CostmapConfig(inscribed_radius=0.05, inflation_radius=0.15)
        exact = 0
        total = 0
        while total < 100:
            cost = rng.integers(0, 120, size=(20, 20)).astype(np.uint8)
            cost[rng.random((20, 20)) < 0.2] = LETHAL
            cm = Costmap(0.1, Pose2D(), 20, 20, cost, cfg)
            free = np.argwhere(cm.cost < INSCRIBED)
            if len(free) < 2:
                continue
            (sy, sx), (gy, gx) = free[rng.integers(0, len(free), 2)]
            optimum = bellman_optimal_cost(cm, (sx, sy), (gx, gy))
            start = Pose2D(*cm.cell_center(sx, sy), 0.0)
            goal = Pose2D(*cm.cell_center(gx, gy), 0.0)
            total += 1
            try:
                path = plan_global(cm, start, goal)
            except NoPathError:
                if math.isinf(optimum):
                    exact += 1
                continue
            # the goal may snap to a nearby traversable cell; recompute the
            # oracle for the snapped cell when they differ
            snapped = path.cells[-1]
            if snapped != (gx, gy):
                optimum = bellman_optimal_cost(cm, (sx, sy), snapped)
            if path.total_cost == optimum:
                exact += 1
        report(4, exact == 100, f"{exact}/100 exact matches with Bellman relaxation")
        assert exact == 100


def _random_local_costmap(rng):
    from gennav.costmap import inflate

    lethal = np.zeros((80, 80), dtype=bool)
    for _ in range(int(rng.integers(0, 14))):
        lethal[int(rng.integers(10, 70)), int(rng.integers(10, 70))] = True
    cfg = CostmapConfig()
    return Costmap(0.05, Pose2D(), 80, 80, inflate(lethal, 0.05, cfg), cfg)


class TestCriterion5DwaOracle:
    def test_two_hundred_randomized_instances(self):
        rng = np.random.default_rng(11)
        cfg = DwaConfig()
        cfg_h = DwaConfig(n_vy=5)
        matches = 0
        total = 0
        while total < 200:
            cm = _random_local_costmap(rng)
            pose = Pose2D(float(rng.uniform(1.0, 3.0)), float(rng.uniform(1.0, 3.0)),
                          float(rng.uniform(-math.pi, math.pi)))
            current = Twist2D(float(rng.uniform(0.0, 0.5)),
                              float(rng.uniform(-0.2, 0.2)),
                              float(rng.uniform(-1.2, 1.2)))
            n = int(rng.integers(2, 40))
            waypoints = np.column_stack((
                np.linspace(pose.x, float(rng.uniform(0.5, 3.5)), n),
                np.linspace(pose.y, float(rng.uniform(0.5, 3.5)), n)))
            path = GlobalPath(waypoints=waypoints, total_cost=0.0)
            use = cfg_h if total % 3 == 0 else cfg
            if use is cfg:
                current = Twist2D(current.vx, 0.0, current.omega)
            total += 1
            expected = exhaustive_dwa(use, current, pose, cm, path)
            if expected is None:
                with pytest.raises(LocalMinimumError):
                    plan_local(use, current, pose, cm, path)
                matches += 1
                continue
            choice = plan_local(use, current, pose, cm, path)
            ev, evy, ew, escore, ecount = expected
            twist_ok = (choice.twist.vx == ev and choice.twist.vy == evy
                        and choice.twist.omega == ew and choice.score == escore
                        and choice.admissible_count == ecount)
            # window membership and collision-free trajectory
            dv = use.accel_v * use.command_dt
            dw = use.accel_omega * use.command_dt
            window_ok = (
                max(use.v_min, current.vx - dv) - 1e-12 <= choice.twist.vx
                <= min(use.v_max, current.vx + dv) + 1e-12
                and abs(choice.twist.omega - current.omega) <= dw + 1e-12)
            costs = cm.costs_of_points(choice.trajectory[1:, :2])
            if twist_ok and window_ok and costs.max() < INSCRIBED:
                matches += 1
        report(5, matches == 200, f"{matches}/200 exact argmax matches, all in-window "
                                  f"and collision-free")
        assert matches == 200


class TestCriterion6RangeFlowAccuracy:
    def test_fifty_seeded_constant_twist_pairs(self, world):
        rng = np.random.default_rng(21)
        dt = 0.05
        checked = 0
        worst_rel = 0.0
        while checked < 50:
            pose = Pose2D(float(rng.uniform(1.0, 9.0)), float(rng.uniform(1.0, 9.0)),
                          float(rng.uniform(-math.pi, math.pi)))
            if (2.6 < pose.x < 4.4 and 2.6 < pose.y < 4.4) or \
                    (6.1 < pose.x < 7.9 and 5.1 < pose.y < 6.9):
                continue
            twist = Twist2D(float(rng.uniform(-0.4, 0.4)),
                            float(rng.uniform(-0.3, 0.3)),
                            float(rng.uniform(-0.6, 0.6)))
            prev = raycast_scan(world, pose, 360, 12.0, 0.0, None, timestamp=0.0)
            curr = raycast_scan(world, pose.compose(integrate_twist(twist, dt)),
                                360, 12.0, 0.0, None, timestamp=dt)
            est = estimate_twist(prev, curr)
            checked += 1
            for got, want in zip(est.twist.as_array(), twist.as_array()):
                tol = max(0.10 * abs(want), 0.02)
                assert abs(got - want) <= tol
                if abs(want) > 1e-6:
                    worst_rel = max(worst_rel, abs(got - want) / abs(want))
        # identical scans give exactly zero
        ranges = np.full(360, 4.0)
        a = LaserScan(0.0, -math.pi, 2 * math.pi / 360, 12.0, ranges)
        b = LaserScan(dt, -math.pi, 2 * math.pi / 360, 12.0, ranges.copy())
        zero = estimate_twist(a, b)
        assert zero.twist == Twist2D(0.0, 0.0, 0.0)
        assert zero.residual_rms == 0.0
        report(6, True, f"50 seeded pairs within max(10%, 0.02); worst relative "
                        f"error {worst_rel:.3f}; identical scans -> exact zero")


class TestCriterion7MclConvergence:
    def test_global_convergence_twenty_seeds(self, world, world_map):
        start = world.spawn("survey")
        good = 0
        details = []
        for seed in range(20):
            r = run_localization_eval(world, world_map, start, seed=seed,
                                      n_updates=30)
            ok = r.position_error < 0.15 and r.heading_error < 10.0
            good += ok
            details.append(round(r.position_error, 3))
        report(7, good >= 18, f"{good}/20 runs under 0.15 m and 10 deg "
                              f"(pos errors: {details})")
        assert good >= 18


class TestCriterion8MappingQuality:
    def test_scripted_lap_iou_and_round_trip(self, world, world_map, tmp_path):
        grid, mapper = run_mapping_script(world, fig5_mapping_script(),
                                          start=Pose2D(1.5, 1.5, 0.0), seed=42)
        origin, w, h = grid_geometry_for(world, grid.resolution)
        truth = world.rasterize(grid.resolution, origin, w, h)
        iou = map_iou(grid, truth)
        pgm1, _ = save_map(grid, tmp_path / "acc_map")
        reloaded = load_map(tmp_path / "acc_map")
        pgm2, _ = save_map(reloaded, tmp_path / "acc_map2")
        round_trip = pgm1.read_bytes() == pgm2.read_bytes()
        report(8, iou >= 0.85 and round_trip,
               f"IoU {iou:.3f} (>= 0.85), PGM round trip bit-exact: {round_trip}")
        assert iou >= 0.85
        assert round_trip


class TestCriterion9Genericity:
    def test_quadplanar_runs_same_suite(self, world, world_map):
        results = _run_goal_suite(world, world_map, QUADPLANAR)
        reached = sum(r.reached for r, _ in results)
        worst_d = max(r.d_e for r, _ in results)
        worst_a = max(r.alpha for r, _ in results)
        quad_ok = _suite_ok(results)
        diff = _nav_results.get("diffdrive")
        diff_ok = diff is not None and _suite_ok(diff)
        report(9, quad_ok and diff_ok,
               f"quadplanar {reached}/20 reached, worst d_e={worst_d:.3f} m, "
               f"alpha={worst_a:.1f} deg; diffdrive suite {'PASS' if diff_ok else 'FAIL'}; "
               f"only PlantConfig and the low-level controller differ")
        assert quad_ok
        assert diff_ok
