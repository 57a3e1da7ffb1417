import numpy as np
import pytest

from blindaug.harness import default_scene, generate_scene


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_scene():
    """Three checker planes, 96x96, two frames."""
    return generate_scene(default_scene(size=96, frames=2, seed=3))


def checkerboard(h, w, cell=8, channels=3):
    yy, xx = np.mgrid[0:h, 0:w]
    board = ((yy // cell + xx // cell) % 2).astype(np.float64)
    return np.repeat(board[..., None], channels, axis=2) if channels else board
