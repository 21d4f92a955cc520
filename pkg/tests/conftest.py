"""Shared fixtures built on the bundled synthetic model."""

import numpy as np
import pytest

from uvface.core.mesh_core import uv_lookup
from uvface.core.rasterizer import Renderer
from uvface.fitting.fitter import decode_albedo
from uvface.models.mesh import Topology, VertexShape
from uvface.utils.synthetic import (
    build_synthetic_model,
    default_light,
    default_projection,
)


@pytest.fixture(scope="session")
def model():
    return build_synthetic_model()


@pytest.fixture(scope="session")
def topo(model):
    return model.topology


@pytest.fixture(scope="session")
def lookup(topo):
    return uv_lookup(topo)


@pytest.fixture(scope="session")
def renderer(topo, lookup):
    return Renderer(topo, 64, 64, lookup=lookup)


@pytest.fixture(scope="session")
def mean_shape(model):
    return VertexShape.from_flat(model.shape_model.mean)


@pytest.fixture(scope="session")
def mean_albedo(model, topo, lookup):
    return decode_albedo(
        model.albedo_model, np.zeros(model.albedo_model.param_dim), topo, lookup
    )


@pytest.fixture
def projection():
    return default_projection()


@pytest.fixture
def light():
    return default_light()


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def square_topology():
    """Two triangles covering a unit square on a 5 x 5 UV grid."""
    return Topology(
        triangles=np.array([[0, 1, 2], [1, 3, 2]]),
        landmark_indices=np.zeros(68, dtype=np.int64),
        uv_coords=np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [4.0, 4.0]]),
        num_vertices=4,
        uv_shape=(5, 5),
    )
