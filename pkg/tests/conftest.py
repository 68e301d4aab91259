import numpy as np
import pytest

from polydeform import fixtures as fx
from polydeform.deform import DeformConfig, deform
from polydeform.labeling import nearest_axis_label


class Run:
    """A deformation run with its iterates kept, shared across test modules."""

    def __init__(self, mesh, labels, config=None):
        self.mesh = mesh
        self.labels = labels
        self.iterates = []
        self.output, self.trace = deform(
            mesh, labels, config, on_iteration=lambda rec, x: self.iterates.append(np.array(x))
        )


def _sphere():
    m = fx.sphere()
    return m, nearest_axis_label(m)


def _cylinder():
    m = fx.open_cylinder()
    return m, nearest_axis_label(m)


@pytest.fixture(scope="session")
def sphere_run():
    return Run(*_sphere())


@pytest.fixture(scope="session")
def sphere_flat_run():
    return Run(*_sphere(), DeformConfig(flatten=True))


@pytest.fixture(scope="session")
def torus_run():
    return Run(fx.torus(), fx.torus_frame_labels())


@pytest.fixture(scope="session")
def torus_flat_run():
    return Run(fx.torus(), fx.torus_frame_labels(), DeformConfig(flatten=True))


@pytest.fixture(scope="session")
def cylinder_run():
    return Run(*_cylinder())


@pytest.fixture(scope="session")
def rotated_cube_run():
    return Run(*fx.rotated_cube())


@pytest.fixture(scope="session")
def mobius_run():
    return Run(*fx.polycube_mobius())


@pytest.fixture(scope="session")
def defect_run():
    return Run(*fx.tilted_island_cube())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
