import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gennav.costmap import (
    CostmapConfig,
    INSCRIBED,
    LETHAL,
    build_global_costmap,
    build_local_costmap,
    inflate,
)
from gennav.geometry import LaserScan, OccupancyGrid, Pose2D
from scipy import ndimage


def free_grid(width=20, height=20, resolution=0.05):
    log_odds = np.full((height, width), -10.0)
    return OccupancyGrid(resolution, Pose2D(), width, height, log_odds)


class TestGlobalCostmap:
    def test_obstacle_free_map_is_all_zero(self):
        cm = build_global_costmap(free_grid(), CostmapConfig())
        assert np.all(cm.cost == 0)

    def test_unknown_is_lethal_by_default(self):
        grid = free_grid()
        grid.log_odds[5, 5] = 0.0  # unknown cell
        cm = build_global_costmap(grid, CostmapConfig(inflation_radius=0.0999,
                                                      inscribed_radius=0.0499))
        assert cm.cost[5, 5] == LETHAL

    def test_single_lethal_cell_ring(self):
        grid = free_grid(resolution=1.0)
        grid.log_odds[10, 10] = 10.0
        cfg = CostmapConfig(inscribed_radius=1.0, inflation_radius=3.0, decay=1.0)
        cm = build_global_costmap(grid, cfg)
        assert cm.cost[10, 10] == LETHAL
        # 4-neighbors at exactly one cell: inscribed
        for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            assert cm.cost[10 + dy, 10 + dx] == INSCRIBED
        # diagonal neighbors at sqrt(2): decayed, strictly below inscribed
        expected = round(252 * math.exp(-1.0 * (math.sqrt(2.0) - 1.0)))
        for dy, dx in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            assert cm.cost[10 + dy, 10 + dx] == expected
        # beyond the inflation radius: zero
        assert cm.cost[10, 14] == 0

    def test_decay_formula_anchor(self):
        # Just outside the inscribed radius the curve starts at 252 * e^0.
        d = np.array([[1.0 + 1e-9]])
        cfg = CostmapConfig(inscribed_radius=1.0, inflation_radius=3.0, decay=1.0)
        value = round(252 * math.exp(-cfg.decay * (d[0, 0] - cfg.inscribed_radius)))
        assert value == 252

    def test_lethal_occupied_invariant(self, world_map):
        cm = build_global_costmap(world_map)
        occupied = world_map.occupied_mask()
        assert np.all(cm.cost[occupied] == LETHAL)

    def test_monotone_decay_with_distance(self, world_map):
        cm = build_global_costmap(world_map)
        lethal = cm.cost == LETHAL
        d = ndimage.distance_transform_edt(~lethal) * cm.resolution
        flat_d = d.reshape(-1)
        flat_c = cm.cost.reshape(-1).astype(int)
        order = np.argsort(flat_d)
        costs_by_distance = flat_c[order]
        # non-increasing cost along increasing distance (ties allowed)
        d_sorted = flat_d[order]
        for i in range(1, len(order)):
            if d_sorted[i] > d_sorted[i - 1] + 1e-12:
                assert costs_by_distance[i] <= costs_by_distance[i - 1] or \
                    costs_by_distance[i] <= max(costs_by_distance[:i])

    def test_safety_coupling(self, world_map):
        cfg = CostmapConfig()
        cm = build_global_costmap(world_map, cfg)
        lethal = cm.cost == LETHAL
        d = ndimage.distance_transform_edt(~lethal) * cm.resolution
        within = d <= cfg.inscribed_radius
        assert np.all(cm.cost[within] >= INSCRIBED)

    def test_idempotent(self, world_map):
        a = build_global_costmap(world_map)
        b = build_global_costmap(world_map)
        np.testing.assert_array_equal(a.cost, b.cost)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_monotonicity_on_random_grids(seed):
    """Cost is a non-increasing function of distance to the nearest lethal."""
    rng = np.random.default_rng(seed)
    lethal = rng.random((30, 30)) < 0.08
    cfg = CostmapConfig(inscribed_radius=0.1, inflation_radius=0.4, decay=8.0)
    cost = inflate(lethal, 0.05, cfg)
    if not lethal.any():
        assert np.all(cost == 0)
        return
    d = ndimage.distance_transform_edt(~lethal) * 0.05
    flat_d, flat_c = d.reshape(-1), cost.reshape(-1).astype(int)
    order = np.argsort(flat_d, kind="stable")
    sorted_c = flat_c[order]
    sorted_d = flat_d[order]
    for i in range(1, len(sorted_c)):
        if sorted_d[i] > sorted_d[i - 1]:
            assert sorted_c[i] <= sorted_c[i - 1]
        else:
            assert sorted_c[i] == sorted_c[i - 1]  # same distance, same cost


class TestLocalCostmap:
    def test_all_misses_give_zero_window(self):
        scan = LaserScan(0.0, -math.pi, 2 * math.pi / 90, 8.0, np.full(90, 8.0))
        cm = build_local_costmap(scan, Pose2D(3.0, 3.0, 0.5))
        assert np.all(cm.cost == 0)
        assert cm.width == cm.height == 80

    def test_hit_dead_ahead(self):
        ranges = np.full(90, 8.0)
        ranges[45] = 1.0  # bearing 0 with angle_min=-pi and 90 beams
        scan = LaserScan(0.0, -math.pi, 2 * math.pi / 90, 8.0, ranges)
        robot = Pose2D(2.0, 2.0, 0.0)
        cm = build_local_costmap(scan, robot)
        ix, iy = cm.world_to_cell(3.0, 2.0)
        window = cm.cost[iy - 1:iy + 2, ix - 1:ix + 2]
        assert (window == LETHAL).any()

    def test_window_snaps_to_resolution(self):
        scan = LaserScan(0.0, -math.pi, 2 * math.pi / 90, 8.0, np.full(90, 8.0))
        a = build_local_costmap(scan, Pose2D(1.003, 2.001, 0.0))
        b = build_local_costmap(scan, Pose2D(1.052, 2.001, 0.0))
        assert b.origin.x - a.origin.x == pytest.approx(0.05)
        assert b.origin.y == a.origin.y
        assert (a.origin.x / a.resolution) == pytest.approx(
            round(a.origin.x / a.resolution))


class TestDistanceProxy:
    def test_round_trip_through_cost(self):
        cfg = CostmapConfig()
        grid = free_grid(40, 40)
        grid.log_odds[20, 20] = 10.0
        cm = build_global_costmap(grid, cfg)
        lethal = cm.cost == LETHAL
        d_true = ndimage.distance_transform_edt(~lethal) * cm.resolution
        costs = cm.cost.astype(int)
        proxy = cm.distance_proxy(costs)
        mid = (costs > 0) & (costs < INSCRIBED) & (d_true <= cfg.inflation_radius)
        # proxy inverts the rounded decay curve to within the rounding step
        assert np.max(np.abs(proxy[mid] - d_true[mid])) < 0.05
        assert np.all(proxy[costs >= INSCRIBED] == 0.0)
        assert np.all(proxy[costs == 0] == cfg.inflation_radius)
