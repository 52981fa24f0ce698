import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from clscopt.instances import oracle_tiny, tabletop  # noqa: E402
from clscopt.model import (  # noqa: E402
    CollectionCenter,
    DisposalSite,
    NetworkInstance,
    Plant,
    Warehouse,
)
from clscopt.uncertainty import DemandScenario, ScenarioSet  # noqa: E402
from oracles import canonical, enumerate_objectives, nondominated_quadratic  # noqa: E402


def single_chain(d=10.0, reliability=1.0, alpha=0.0, beta=0.0, fixed=(100.0, 50.0)):
    """One plant, one warehouse, one customer; reverse layers present but unused when alpha=0."""
    arcs = {
        "plant_warehouse": [[[2.0, 0.1]]],
        "warehouse_customer": [[[3.0, 0.2]]],
        "customer_collection": [[[1.0, 0.1]]],
        "collection_plant": [[[1.0, 0.1]]],
        "collection_disposal": [[[1.0, 0.1]]],
    }
    return NetworkInstance(
        plants=(Plant("P1", fixed[0], 1000.0, 5.0, 2.0, 1.0, 0.5),),
        warehouses=(Warehouse("W1", fixed[1], 1000.0, 1.0, 0.5, reliability),),
        collection_centers=(CollectionCenter("L1", 0.0, 1000.0, 1.0, 0.1),),
        disposal_sites=(DisposalSite("D1", 1.0, 1.0, 1000.0),),
        customers=("K1",),
        arcs={k: np.array(v) for k, v in arcs.items()},
        scenarios=ScenarioSet((DemandScenario(1.0, {"K1": d}),)),
        alpha=alpha,
        beta=beta,
    )


@pytest.fixture(scope="session")
def tiny():
    return oracle_tiny()


@pytest.fixture(scope="session")
def desk():
    return tabletop()


@pytest.fixture(scope="session")
def tiny_enumeration(tiny):
    """(native objective vectors, canonical matrix, true-front mask)."""
    objs = enumerate_objectives(tiny)
    F = canonical(objs)
    return objs, F, nondominated_quadratic(F)


def wide_instance(n: int) -> NetworkInstance:
    """n facilities in each of the three decision layers, one customer."""
    arc = lambda a, b: np.ones((a, b, 2))  # noqa: E731
    return NetworkInstance(
        plants=tuple(Plant(f"P{i}", 1.0, 10.0, 1.0, 1.0, 1.0, 1.0) for i in range(n)),
        warehouses=tuple(Warehouse(f"W{i}", 1.0, 10.0, 1.0, 1.0, 0.9) for i in range(n)),
        collection_centers=tuple(CollectionCenter(f"L{i}", 1.0, 10.0, 1.0, 1.0) for i in range(n)),
        disposal_sites=(DisposalSite("D1", 1.0, 1.0, 10.0),),
        customers=("K1",),
        arcs={
            "plant_warehouse": arc(n, n),
            "warehouse_customer": arc(n, 1),
            "customer_collection": arc(1, n),
            "collection_plant": arc(n, n),
            "collection_disposal": arc(n, 1),
        },
        scenarios=ScenarioSet((DemandScenario(1.0, {"K1": 1.0}),)),
        alpha=0.5,
        beta=0.5,
    )


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
