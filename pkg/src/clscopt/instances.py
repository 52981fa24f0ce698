"""Bundled instance templates.

``tabletop`` is a 2-plant, 2-warehouse, 2-customer, 2-collection-center,
1-disposal-site network with three demand scenarios, 20% returns and 10% of
returns sent to disposal. Its coefficients are drawn from a seeded generator
inside the ranges below, with cost and emission anti-correlated per facility
and fixed cost rising with operating cost (cheap facilities pollute more,
cheap warehouses are less reliable) so the three objectives conflict.

``oracle-tiny`` is a fixed, integer-friendly 2x2x2 network with one scenario
and total demand 6, small enough for exhaustive enumeration of flows.
"""

from __future__ import annotations

import numpy as np

from .model import (
    ARC_FAMILIES,
    CollectionCenter,
    DisposalSite,
    NetworkInstance,
    Plant,
    Warehouse,
)
from .uncertainty import DemandScenario, ScenarioSet, generate_scenarios

DEFAULT_SEED = 2021

TABLETOP_DEMAND = {"K1": 1630.0, "K2": 950.0}
TABLETOP_SPREAD = 0.2
TABLETOP_ALPHA = 0.2
TABLETOP_BETA = 0.1

# (low, high) ranges for the tabletop generator
RANGES = {
    "plant_fixed": (40_000.0, 60_000.0),
    "production_cost": (18.0, 26.0),
    "production_emission": (4.0, 8.0),
    "remanufacturing_cost": (6.0, 10.0),
    "remanufacturing_emission": (1.0, 3.0),
    "warehouse_fixed": (15_000.0, 25_000.0),
    "handling_cost": (2.0, 4.0),
    "handling_emission": (0.5, 1.5),
    "reliability": (0.85, 0.99),
    "collection_fixed": (8_000.0, 12_000.0),
    "disassembly_cost": (3.0, 5.0),
    "disassembly_emission": (0.5, 1.5),
    "disposal_cost": (4.0, 6.0),
    "disposal_emission": (2.0, 4.0),
    "transport_cost": (1.0, 6.0),
    "transport_emission": (0.2, 1.2),
}

# every single facility can carry the high scenario on its own
TABLETOP_CAPACITY = {"plants": 3200.0, "warehouses": 3200.0, "collection": 700.0, "disposal": 1000.0}

TEMPLATES = ("tabletop", "oracle-tiny")


def _stratified(rng: np.random.Generator, key: str, n: int, digits: int = 2) -> np.ndarray:
    """One draw from each of ``n`` equal sub-ranges of ``key``, ascending."""
    lo, hi = RANGES[key]
    edges = np.linspace(lo, hi, n + 1)
    return np.round(rng.uniform(edges[:-1], edges[1:]), digits)


def _paired(rng: np.random.Generator, n: int, key_up: str, key_down: str
            ) -> tuple[list[float], list[float]]:
    """Draw ``n`` values for two attributes, the second falling as the first rises."""
    a = _stratified(rng, key_up, n)
    b = _stratified(rng, key_down, n)[::-1]
    order = rng.permutation(n)
    return [float(x) for x in a[order]], [float(x) for x in b[order]]


def _uniform(rng: np.random.Generator, key: str, size, digits: int = 2) -> np.ndarray:
    lo, hi = RANGES[key]
    return np.round(rng.uniform(lo, hi, size), digits)


def _ranked(rng: np.random.Generator, key: str, like: list[float], digits: int = 0) -> np.ndarray:
    """Draw values for ``key`` ordered the same way as ``like``."""
    vals = _stratified(rng, key, len(like), digits)
    out = np.empty(len(like))
    out[np.argsort(like, kind="stable")] = vals
    return out


def tabletop(seed: int = DEFAULT_SEED) -> NetworkInstance:
    rng = np.random.default_rng(seed)
    P = W = K = C = 2
    M = 1

    prod_cost, prod_em = _paired(rng, P, "production_cost", "production_emission")
    reman_cost, reman_em = _paired(rng, P, "remanufacturing_cost", "remanufacturing_emission")
    plant_fixed = _ranked(rng, "plant_fixed", prod_cost)
    plants = tuple(
        Plant(f"P{i + 1}", float(plant_fixed[i]), TABLETOP_CAPACITY["plants"],
              prod_cost[i], prod_em[i], reman_cost[i], reman_em[i])
        for i in range(P)
    )

    hand_cost, hand_em = _paired(rng, W, "handling_cost", "handling_emission")
    # pricier handling buys reliability
    rel_by_cost = _ranked(rng, "reliability", hand_cost, 3)
    wh_fixed = _ranked(rng, "warehouse_fixed", hand_cost)
    warehouses = tuple(
        Warehouse(f"W{j + 1}", float(wh_fixed[j]), TABLETOP_CAPACITY["warehouses"],
                  hand_cost[j], hand_em[j], float(rel_by_cost[j]))
        for j in range(W)
    )

    dis_cost, dis_em = _paired(rng, C, "disassembly_cost", "disassembly_emission")
    col_fixed = _ranked(rng, "collection_fixed", dis_cost)
    collection = tuple(
        CollectionCenter(f"L{l + 1}", float(col_fixed[l]), TABLETOP_CAPACITY["collection"],
                         dis_cost[l], dis_em[l])
        for l in range(C)
    )

    disposal = (
        DisposalSite("D1", float(_uniform(rng, "disposal_cost", 1)[0]),
                     float(_uniform(rng, "disposal_emission", 1)[0]),
                     TABLETOP_CAPACITY["disposal"]),
    )

    sizes = {"plants": P, "warehouses": W, "customers": K, "collection_centers": C,
             "disposal_sites": M}
    arcs = {}
    for name, src, dst in ARC_FAMILIES:
        shape = (sizes[src], sizes[dst])
        arcs[name] = np.stack(
            [_uniform(rng, "transport_cost", shape), _uniform(rng, "transport_emission", shape)],
            axis=-1,
        )

    return NetworkInstance(
        plants=plants,
        warehouses=warehouses,
        collection_centers=collection,
        disposal_sites=disposal,
        customers=tuple(TABLETOP_DEMAND),
        arcs=arcs,
        scenarios=generate_scenarios(TABLETOP_DEMAND, TABLETOP_SPREAD, count=3),
        alpha=TABLETOP_ALPHA,
        beta=TABLETOP_BETA,
    )


def oracle_tiny() -> NetworkInstance:
    """Hand-set instance: facility 1 of each layer is cheap and dirty, facility 2 clean and dear."""
    plants = (
        Plant("P1", 100.0, 10.0, 5.0, 4.0, 2.0, 1.0),
        Plant("P2", 130.0, 10.0, 8.0, 2.0, 3.0, 0.5),
    )
    warehouses = (
        Warehouse("W1", 60.0, 10.0, 1.0, 1.0, 0.8),
        Warehouse("W2", 80.0, 10.0, 2.0, 0.5, 0.95),
    )
    collection = (
        CollectionCenter("L1", 40.0, 10.0, 1.0, 1.0),
        CollectionCenter("L2", 50.0, 10.0, 2.0, 0.5),
    )
    disposal = (DisposalSite("D1", 2.0, 2.0, 10.0),)

    def arc(cost, em):
        return np.stack([np.asarray(cost, dtype=float), np.asarray(em, dtype=float)], axis=-1)

    arcs = {
        "plant_warehouse": arc([[1, 2], [2, 1]], [[1, 2], [2, 1]]),
        "warehouse_customer": arc([[1, 2], [2, 1]], [[2, 1], [1, 2]]),
        "customer_collection": arc([[1, 2], [2, 1]], [[1, 1], [1, 1]]),
        "collection_plant": arc([[1, 2], [2, 1]], [[1, 2], [2, 1]]),
        "collection_disposal": arc([[1], [2]], [[1], [1]]),
    }
    scenarios = ScenarioSet((DemandScenario(1.0, {"K1": 2.0, "K2": 4.0}),))
    return NetworkInstance(
        plants=plants,
        warehouses=warehouses,
        collection_centers=collection,
        disposal_sites=disposal,
        customers=("K1", "K2"),
        arcs=arcs,
        scenarios=scenarios,
        alpha=0.5,
        beta=0.5,
    )


def make_instance(template: str, seed: int = DEFAULT_SEED) -> NetworkInstance:
    if template == "tabletop":
        return tabletop(seed)
    if template == "oracle-tiny":
        return oracle_tiny()
    raise ValueError(f"unknown template {template!r}; choose from {', '.join(TEMPLATES)}")
