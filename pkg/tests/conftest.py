import numpy as np
import pytest

from stlt.cbf import build_cbfs
from stlt.dynamics import single_integrator
from stlt.reach import ReachEngine
from stlt.regions import GridAxis
from stlt.scenario import load_scenario
from stlt.tree import build_tree


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory) -> str:
    """Shared on-disk cache so each grid scenario is solved once per
    test session."""
    return str(tmp_path_factory.mktemp("reach_cache"))


@pytest.fixture(scope="session")
def grid_engine_small():
    """Grid engine for a single integrator on an 81 x 81 patch, shared
    because its solves are memoized in process."""
    axes = (GridAxis(-4.0, 4.0, 81), GridAxis(-4.0, 4.0, 81))
    return ReachEngine("grid", single_integrator(1.0), axes=axes, step=0.05)


@pytest.fixture(scope="session")
def e1_int():
    return load_scenario("example1_integrator")


@pytest.fixture(scope="session")
def e1_int_engine(e1_int):
    return e1_int.engine(None)


@pytest.fixture
def e1_int_fresh(e1_int, e1_int_engine):
    """Factory for a fresh tree and barrier set; controller runs mutate
    both, so tests must not share instances."""

    def make():
        tree = build_tree(e1_int.phi_desired, e1_int.predicates, e1_int_engine)
        return tree, build_cbfs(tree, e1_int_engine)

    return make


@pytest.fixture(scope="session")
def e1_uni(cache_dir):
    sc = load_scenario("example1_unicycle")
    return sc, sc.engine(cache_dir)


@pytest.fixture
def e1_uni_fresh(e1_uni):
    sc, engine = e1_uni

    def make():
        tree = build_tree(sc.phi_desired, sc.predicates, engine)
        return tree, build_cbfs(tree, engine)

    return make


@pytest.fixture(scope="session")
def cx_int():
    return load_scenario("complex_integrator")


@pytest.fixture(scope="session")
def cx_uni(cache_dir):
    sc = load_scenario("complex_unicycle")
    return sc, sc.engine(cache_dir)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
