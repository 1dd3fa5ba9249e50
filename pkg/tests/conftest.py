import numpy as np
import pytest

from gennav.world import grid_geometry_for, load_builtin_world

MAP_RESOLUTION = 0.05


@pytest.fixture(scope="session")
def world():
    return load_builtin_world()


@pytest.fixture(scope="session")
def world_map(world):
    """Ground-truth rasterization of the bundled world."""
    origin, width, height = grid_geometry_for(world, MAP_RESOLUTION)
    return world.rasterize(MAP_RESOLUTION, origin, width, height)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
