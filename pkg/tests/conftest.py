import collections

import pytest

from morseflow import (
    FlowConfig,
    find_critical_points,
    geometric_constants,
    load_scenario,
)

Setup = collections.namedtuple(
    "Setup", "scenario manifold function crits consts cfg"
)


def build_setup(name):
    scenario = load_scenario(name)
    manifold = scenario.build_manifold()
    function = scenario.build_function()
    crits = find_critical_points(manifold, function, 200, seed=0)
    consts = geometric_constants(manifold, function, crits)
    cfg = FlowConfig.from_constants(consts, **scenario.config.integrator)
    return Setup(scenario, manifold, function, crits, consts, cfg)


@pytest.fixture(scope="session")
def sphere():
    return build_setup("sphere2")


@pytest.fixture(scope="session")
def torus():
    return build_setup("torus_upright")


@pytest.fixture(scope="session")
def clifford():
    return build_setup("clifford")


@pytest.fixture(scope="session")
def sphere_m():
    return build_setup("sphereM")
