import numpy as np
import pytest

from kaczplan.constraints import ManifoldSpec, Structure, assemble_system
from kaczplan.kinematics import RobotModel


@pytest.fixture
def model():
    return RobotModel()


@pytest.fixture
def bar3():
    """Three collinear contacts 0.5 m apart on the x axis."""
    return Structure([[-0.5, 0.0, 0.0], [0.0, 0.0, 0.0], [0.5, 0.0, 0.0]])


@pytest.fixture
def lshape():
    """Non-collinear 3-contact structure (right angle at the middle)."""
    return Structure([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.5, 0.5, 0.0]])


def random_configs(rng, model, n, count):
    lo = model.joint_limits[:, 0]
    hi = model.joint_limits[:, 1]
    return rng.uniform(lo, hi, (count, n, model.dof)).reshape(count, -1)


@pytest.fixture
def m1_system(model, bar3):
    return assemble_system(model, 3,
                           [ManifoldSpec("StructureFixedDistance")], bar3)
