"""Shared fixtures: the metric families exercised across the suite.

The five named families cover the classification matrix end to end:
two Riemannian metrics (flat and conformal), an x-independent Randers norm,
a frame-induced Minkowski metric with a closed-form compatible connection,
and a Randers metric with an exact 1-form obstruction.
"""

import numpy as np
import pytest

from gberwald import (
    FrameMinkowskiFamily,
    RandersFamily,
    RiemannianFamily,
    circle_quadrature,
    sphere2_quadrature,
)


@pytest.fixture(scope="session")
def quad2():
    return circle_quadrature(256)


@pytest.fixture(scope="session")
def quad3():
    return sphere2_quadrature(24, 48)


@pytest.fixture(scope="session")
def euclidean():
    return RiemannianFamily([[1, 0], [0, 1]])


@pytest.fixture(scope="session")
def riem_diag41():
    return RiemannianFamily([[4, 0], [0, 1]])


@pytest.fixture(scope="session")
def conformal():
    c = "exp(2*sin(x1))"
    return RiemannianFamily([[c, 0], [0, c]])


@pytest.fixture(scope="session")
def randers_flat():
    return RandersFamily([[1, 0], [0, 1]], [0.3, 0])


@pytest.fixture(scope="session")
def frame_exp():
    # frame E1 = d/dx1, E2 = exp(x1) d/dx2; chart torsion T^2_12 = -1
    return FrameMinkowskiFamily([[1, 0], [0, "exp(x1)"]], [0.3, 0])


@pytest.fixture(scope="session")
def randers_sine():
    return RandersFamily([[1, 0], [0, 1]], ["0.3 + 0.2*sin(x1)", 0])


@pytest.fixture(scope="session")
def randers_axis3():
    # x-independent Randers norm in dimension 3, 1-form along the first axis
    return RandersFamily(np.eye(3), [0.3, 0, 0])
