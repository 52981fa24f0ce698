"""Closed-loop network data model, objective evaluation and feasibility checks.

The network has five layers: plants, warehouses, customers, collection
(disassembly) centers and disposal sites. New product moves
plant -> warehouse -> customer; a fraction ``alpha`` of delivered units is
returned customer -> collection center, where a fraction ``beta`` goes on to
disposal and the rest goes back to plants for remanufacturing.

Facility opening is first-stage; flows are per-scenario recourse, so every
flow array in a :class:`Solution` carries a leading scenario axis.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from .uncertainty import ScenarioSet

#: Unit cost/emission marking an arc as unusable.
FORBIDDEN = 1e12

#: Absolute tolerance on equality constraints and capacity checks.
FEASIBILITY_TOL = 1e-6

#: (family name, source layer, target layer), in genotype/serialization order.
ARC_FAMILIES = (
    ("plant_warehouse", "plants", "warehouses"),
    ("warehouse_customer", "warehouses", "customers"),
    ("customer_collection", "customers", "collection_centers"),
    ("collection_plant", "collection_centers", "plants"),
    ("collection_disposal", "collection_centers", "disposal_sites"),
)

VIOLATION_KINDS = (
    "demand",
    "conservation",
    "capacity",
    "closed-facility",
    "return-ratio",
    "disposal-ratio",
    "negativity",
)


class InstanceError(ValueError):
    """Raised when a NetworkInstance breaks one or more of its invariants."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid instance:\n  " + "\n  ".join(self.problems))


class EvaluationError(ValueError):
    """Raised when objectives are requested for an infeasible solution."""

    def __init__(self, report: FeasibilityReport):
        self.report = report
        shown = "; ".join(str(v) for v in report.violations[:5])
        more = len(report.violations) - 5
        suffix = f" (+{more} more)" if more > 0 else ""
        super().__init__(f"solution is infeasible: {shown}{suffix}")


# --------------------------------------------------------------------------
# Instance
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Plant:
    id: str
    fixed_cost: float
    capacity: float
    production_cost: float  # includes assembly
    production_emission: float
    remanufacturing_cost: float
    remanufacturing_emission: float


@dataclass(frozen=True)
class Warehouse:
    id: str
    fixed_cost: float
    capacity: float
    handling_cost: float
    handling_emission: float
    reliability: float


@dataclass(frozen=True)
class CollectionCenter:
    id: str
    fixed_cost: float
    capacity: float
    disassembly_cost: float
    disassembly_emission: float


@dataclass(frozen=True)
class DisposalSite:
    id: str
    disposal_cost: float
    disposal_emission: float
    capacity: float


_RECORD_TYPES = {
    "plants": Plant,
    "warehouses": Warehouse,
    "collection_centers": CollectionCenter,
    "disposal_sites": DisposalSite,
}


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """Complete problem data.

    ``arcs`` maps each family name in :data:`ARC_FAMILIES` to an array of
    shape ``(n_from, n_to, 2)`` holding ``[unit cost, unit emission]``.
    """

    plants: tuple[Plant, ...]
    warehouses: tuple[Warehouse, ...]
    collection_centers: tuple[CollectionCenter, ...]
    disposal_sites: tuple[DisposalSite, ...]
    customers: tuple[str, ...]
    arcs: Mapping[str, np.ndarray]
    scenarios: ScenarioSet
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("plants", "warehouses", "collection_centers", "disposal_sites", "customers"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(
            self, "arcs", {k: np.asarray(v, dtype=float) for k, v in self.arcs.items()}
        )

    # sizes -------------------------------------------------------------
    @property
    def n_plants(self) -> int:
        return len(self.plants)

    @property
    def n_warehouses(self) -> int:
        return len(self.warehouses)

    @property
    def n_customers(self) -> int:
        return len(self.customers)

    @property
    def n_collection(self) -> int:
        return len(self.collection_centers)

    @property
    def n_disposal(self) -> int:
        return len(self.disposal_sites)

    @property
    def n_scenarios(self) -> int:
        return len(self.scenarios)

    def layer_size(self, layer: str) -> int:
        return len(getattr(self, layer))

    # cached numeric views ----------------------------------------------
    @cached_property
    def demand(self) -> np.ndarray:
        """(S, K) demand matrix in customer order."""
        return self.scenarios.demand_matrix(self.customers)

    @cached_property
    def probabilities(self) -> np.ndarray:
        return self.scenarios.probabilities

    @cached_property
    def coef(self) -> _Coefficients:
        return _Coefficients.from_instance(self)

    def arc_cost(self, family: str) -> np.ndarray:
        return self.arcs[family][..., 0]

    def arc_emission(self, family: str) -> np.ndarray:
        return self.arcs[family][..., 1]

    def scenario_requirements(self) -> dict[str, float]:
        """Largest per-scenario volume each layer must be able to handle."""
        totals = self.demand.sum(axis=1) if self.n_scenarios else np.zeros(1)
        peak = float(totals.max()) if totals.size else 0.0
        return {
            "plants": peak,
            "warehouses": peak,
            "collection_centers": self.alpha * peak,
            "disposal_sites": self.beta * self.alpha * peak,
        }

    # serialization -----------------------------------------------------
    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for layer in _RECORD_TYPES:
            out[layer] = [dict(vars(rec)) for rec in getattr(self, layer)]
        out["customers"] = list(self.customers)
        out["arcs"] = {name: self.arcs[name].tolist() for name, _, _ in ARC_FAMILIES}
        out["scenarios"] = self.scenarios.to_json()
        out["alpha"] = self.alpha
        out["beta"] = self.beta
        return out

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> NetworkInstance:
        """Build an instance from its JSON document.

        Structural problems that :func:`validate_instance` can describe (for
        instance a ragged arc matrix) are kept rather than raised here; a
        missing top-level key raises ``KeyError``.
        """
        kwargs: dict[str, Any] = {}
        for layer, rec_type in _RECORD_TYPES.items():
            kwargs[layer] = tuple(
                rec_type(**{**rec, "id": str(rec["id"])}) for rec in data[layer]
            )
        arcs = {}
        for name, _, _ in ARC_FAMILIES:
            raw = data["arcs"].get(name, [])
            try:
                arcs[name] = np.asarray(raw, dtype=float)
            except ValueError:
                arcs[name] = np.empty((0,))
        kwargs["arcs"] = arcs
        kwargs["customers"] = tuple(str(c) for c in data["customers"])
        kwargs["scenarios"] = ScenarioSet.from_json(data["scenarios"])
        kwargs["alpha"] = float(data["alpha"])
        kwargs["beta"] = float(data["beta"])
        return cls(**kwargs)


def dump_instance(inst: NetworkInstance) -> str:
    return json.dumps(inst.to_json(), indent=2) + "\n"


def load_instance(path: str | Path) -> NetworkInstance:
    """Read an instance JSON file (no validation)."""
    with open(path, encoding="utf-8") as fh:
        return NetworkInstance.from_json(json.load(fh))


@dataclass(frozen=True)
class _Coefficients:
    """Dense coefficient arrays used by the hot evaluation paths."""

    fixed_p: np.ndarray
    fixed_w: np.ndarray
    fixed_c: np.ndarray
    cap_p: np.ndarray
    cap_w: np.ndarray
    cap_c: np.ndarray
    cap_d: np.ndarray
    prod_cost: np.ndarray
    prod_em: np.ndarray
    reman_cost: np.ndarray
    reman_em: np.ndarray
    hand_cost: np.ndarray
    hand_em: np.ndarray
    reliability: np.ndarray
    disasm_cost: np.ndarray
    disasm_em: np.ndarray
    disp_cost: np.ndarray
    disp_em: np.ndarray

    @classmethod
    def from_instance(cls, inst: NetworkInstance) -> _Coefficients:
        def col(recs, attr):
            return np.array([getattr(r, attr) for r in recs], dtype=float)

        p, w, c, d = inst.plants, inst.warehouses, inst.collection_centers, inst.disposal_sites
        return cls(
            fixed_p=col(p, "fixed_cost"),
            fixed_w=col(w, "fixed_cost"),
            fixed_c=col(c, "fixed_cost"),
            cap_p=col(p, "capacity"),
            cap_w=col(w, "capacity"),
            cap_c=col(c, "capacity"),
            cap_d=col(d, "capacity"),
            prod_cost=col(p, "production_cost"),
            prod_em=col(p, "production_emission"),
            reman_cost=col(p, "remanufacturing_cost"),
            reman_em=col(p, "remanufacturing_emission"),
            hand_cost=col(w, "handling_cost"),
            hand_em=col(w, "handling_emission"),
            reliability=col(w, "reliability"),
            disasm_cost=col(c, "disassembly_cost"),
            disasm_em=col(c, "disassembly_emission"),
            disp_cost=col(d, "disposal_cost"),
            disp_em=col(d, "disposal_emission"),
        )


def instance_problems(inst: NetworkInstance) -> list[str]:
    """Every violated NetworkInstance invariant, with its location."""
    problems: list[str] = []

    def nonneg(where: str, value: float):
        if not (value >= 0.0):  # also catches NaN
            problems.append(f"{where}: negative value {value}")

    numeric = {
        "plants": (
            "fixed_cost", "capacity", "production_cost", "production_emission",
            "remanufacturing_cost", "remanufacturing_emission",
        ),
        "warehouses": ("fixed_cost", "capacity", "handling_cost", "handling_emission"),
        "collection_centers": ("fixed_cost", "capacity", "disassembly_cost", "disassembly_emission"),
        "disposal_sites": ("disposal_cost", "disposal_emission", "capacity"),
    }
    for layer, attrs in numeric.items():
        seen = set()
        for rec in getattr(inst, layer):
            if rec.id in seen:
                problems.append(f"{layer}: duplicate id {rec.id!r}")
            seen.add(rec.id)
            for attr in attrs:
                nonneg(f"{layer}[{rec.id}].{attr}", getattr(rec, attr))
    for wh in inst.warehouses:
        if not 0.0 < wh.reliability <= 1.0:
            problems.append(
                f"warehouses[{wh.id}].reliability: reliability out of range (0, 1]: {wh.reliability}"
            )
    if len(set(inst.customers)) != len(inst.customers):
        problems.append("customers: duplicate ids")
    for name, value in (("alpha", inst.alpha), ("beta", inst.beta)):
        if not 0.0 <= value <= 1.0:
            problems.append(f"{name}: {value} outside [0, 1]")

    for name, src, dst in ARC_FAMILIES:
        expected = (inst.layer_size(src), inst.layer_size(dst), 2)
        arr = inst.arcs.get(name)
        if arr is None or arr.shape != expected:
            got = None if arr is None else arr.shape
            problems.append(
                f"arcs.{name}: missing arc entry, expected {expected[0]}x{expected[1]} "
                f"[cost, emission] pairs, got shape {got}"
            )
            continue
        bad = np.argwhere(~(arr >= 0.0))
        for i, j, f in bad[:10]:
            kind = "cost" if f == 0 else "emission"
            problems.append(f"arcs.{name}[{i}][{j}]: negative {kind} {arr[i, j, f]}")

    problems.extend(inst.scenarios.problems())
    known = set(inst.customers)
    for s, sc in enumerate(inst.scenarios):
        unknown = sorted(set(sc.demand) - known)
        if unknown:
            problems.append(f"scenario {s}: demand for unknown customers {unknown}")
    return problems


def validate_instance(inst: NetworkInstance) -> None:
    """Raise :class:`InstanceError` listing every broken instance invariant."""
    problems = instance_problems(inst)
    if problems:
        raise InstanceError(problems)


# --------------------------------------------------------------------------
# Solutions and objectives
# --------------------------------------------------------------------------

FLOW_KEYS = ("Ya", "Yb", "Yc", "Yd", "Ye")


@dataclass(eq=False)
class Solution:
    """Facility plan plus per-scenario flows.

    Flow arrays (leading axis = scenario):
      ya (S, P, W) plant -> warehouse
      yb (S, W, K) warehouse -> customer
      yc (S, K, C) customer -> collection
      yd (S, C, M) collection -> disposal
      ye (S, C, P) collection -> plant (remanufacturing)
    """

    open_plants: np.ndarray
    open_warehouses: np.ndarray
    open_collection: np.ndarray
    ya: np.ndarray
    yb: np.ndarray
    yc: np.ndarray
    yd: np.ndarray
    ye: np.ndarray

    def __post_init__(self):
        for name in ("open_plants", "open_warehouses", "open_collection"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=bool))
        for name in ("ya", "yb", "yc", "yd", "ye"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))

    @classmethod
    def empty(cls, inst: NetworkInstance) -> Solution:
        S, P, W, K, C, M = (
            inst.n_scenarios, inst.n_plants, inst.n_warehouses,
            inst.n_customers, inst.n_collection, inst.n_disposal,
        )
        return cls(
            np.zeros(P, bool), np.zeros(W, bool), np.zeros(C, bool),
            np.zeros((S, P, W)), np.zeros((S, W, K)), np.zeros((S, K, C)),
            np.zeros((S, C, M)), np.zeros((S, C, P)),
        )

    def flows(self) -> dict[str, np.ndarray]:
        return dict(zip(FLOW_KEYS, (self.ya, self.yb, self.yc, self.yd, self.ye)))

    def scaled(self, factor: float) -> Solution:
        return Solution(
            self.open_plants, self.open_warehouses, self.open_collection,
            *(arr * factor for arr in (self.ya, self.yb, self.yc, self.yd, self.ye)),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Solution):
            return NotImplemented
        pairs = zip(
            (self.open_plants, self.open_warehouses, self.open_collection,
             self.ya, self.yb, self.yc, self.yd, self.ye),
            (other.open_plants, other.open_warehouses, other.open_collection,
             other.ya, other.yb, other.yc, other.yd, other.ye),
        )
        return all(a.shape == b.shape and np.array_equal(a, b) for a, b in pairs)

    __hash__ = None  # mutable arrays

    def to_json(self, inst: NetworkInstance) -> dict[str, Any]:
        """Serializable form; one flow record per scenario, keyed Ya..Ye."""

        def ids(recs, mask):
            return [r.id for r, m in zip(recs, mask) if m]

        return {
            "open": {
                "plants": ids(inst.plants, self.open_plants),
                "warehouses": ids(inst.warehouses, self.open_warehouses),
                "collection_centers": ids(inst.collection_centers, self.open_collection),
            },
            "flows": [
                {key: arr[s].tolist() for key, arr in self.flows().items()}
                for s in range(self.ya.shape[0])
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any], inst: NetworkInstance) -> Solution:
        opened = data["open"]

        def mask(recs, chosen):
            chosen = set(chosen)
            return np.array([r.id in chosen for r in recs], dtype=bool)

        flows = data["flows"]
        arrays = []
        shapes = {
            "Ya": (inst.n_plants, inst.n_warehouses),
            "Yb": (inst.n_warehouses, inst.n_customers),
            "Yc": (inst.n_customers, inst.n_collection),
            "Yd": (inst.n_collection, inst.n_disposal),
            "Ye": (inst.n_collection, inst.n_plants),
        }
        for key in FLOW_KEYS:
            arr = np.array([scen[key] for scen in flows], dtype=float)
            arrays.append(arr.reshape((len(flows),) + shapes[key]))
        return cls(
            mask(inst.plants, opened["plants"]),
            mask(inst.warehouses, opened["warehouses"]),
            mask(inst.collection_centers, opened["collection_centers"]),
            *arrays,
        )


class ObjectiveVector(NamedTuple):
    """(total cost, total CO2, expected reliable dispatch).

    Orientation is (min, min, max); :meth:`canonical` turns it into an
    all-minimize triple.
    """

    total_cost: float
    total_co2: float
    expected_dispatch: float

    def canonical(self) -> tuple[float, float, float]:
        return (self.total_cost, self.total_co2, -self.expected_dispatch)

    @classmethod
    def from_canonical(cls, values: Sequence[float]) -> ObjectiveVector:
        return cls(float(values[0]), float(values[1]), -float(values[2]))


def canonicalize(v: ObjectiveVector) -> tuple[float, float, float]:
    """Minimization form ``(cost, co2, -dispatch)``."""
    return ObjectiveVector(*v).canonical()


def fixed_cost(inst: NetworkInstance, sol: Solution) -> float:
    k = inst.coef
    return float(
        k.fixed_p @ sol.open_plants + k.fixed_w @ sol.open_warehouses + k.fixed_c @ sol.open_collection
    )


def _activity_totals(inst: NetworkInstance, sol: Solution, which: int) -> float:
    """Expected variable cost (which=0) or emission (which=1) over scenarios."""
    k = inst.coef
    if which == 0:
        prod, reman, hand, disasm, disp = (
            k.prod_cost, k.reman_cost, k.hand_cost, k.disasm_cost, k.disp_cost,
        )
    else:
        prod, reman, hand, disasm, disp = (
            k.prod_em, k.reman_em, k.hand_em, k.disasm_em, k.disp_em,
        )
    arcs = inst.arcs
    ya, yb, yc, yd, ye = sol.ya, sol.yb, sol.yc, sol.yd, sol.ye

    # remanufactured inflow offsets new production one-for-one
    production = np.maximum(0.0, ya.sum(axis=2) - ye.sum(axis=1))  # (S, P)
    per_scenario = (
        production @ prod
        + yb.sum(axis=2) @ hand
        + yc.sum(axis=1) @ disasm
        + ye.sum(axis=1) @ reman
        + yd.sum(axis=1) @ disp
        + np.einsum("spw,pw->s", ya, arcs["plant_warehouse"][..., which])
        + np.einsum("swk,wk->s", yb, arcs["warehouse_customer"][..., which])
        + np.einsum("skc,kc->s", yc, arcs["customer_collection"][..., which])
        + np.einsum("scp,cp->s", ye, arcs["collection_plant"][..., which])
        + np.einsum("scm,cm->s", yd, arcs["collection_disposal"][..., which])
    )
    return float(inst.probabilities @ per_scenario)


def _require_feasible(inst: NetworkInstance, sol: Solution, check: bool):
    if check:
        report = check_feasibility(inst, sol)
        if not report.feasible:
            raise EvaluationError(report)


def eval_cost(inst: NetworkInstance, sol: Solution, check: bool = True) -> float:
    """Fixed opening costs plus expected variable and transport costs."""
    _require_feasible(inst, sol, check)
    return fixed_cost(inst, sol) + _activity_totals(inst, sol, 0)


def eval_emissions(inst: NetworkInstance, sol: Solution, check: bool = True) -> float:
    """Expected kgCO2 of all activities; opening a facility emits nothing."""
    _require_feasible(inst, sol, check)
    return _activity_totals(inst, sol, 1)


def eval_reliability(inst: NetworkInstance, sol: Solution, check: bool = True) -> float:
    """Expected units dispatched successfully, each warehouse scaled by its reliability."""
    _require_feasible(inst, sol, check)
    per_scenario = np.einsum("swk,w->s", sol.yb, inst.coef.reliability)
    return float(inst.probabilities @ per_scenario)


def evaluate(inst: NetworkInstance, sol: Solution, check: bool = True) -> ObjectiveVector:
    _require_feasible(inst, sol, check)
    return ObjectiveVector(
        eval_cost(inst, sol, check=False),
        eval_emissions(inst, sol, check=False),
        eval_reliability(inst, sol, check=False),
    )


# --------------------------------------------------------------------------
# Feasibility
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    location: str
    magnitude: float

    def __str__(self) -> str:
        return f"{self.kind} at {self.location} (by {self.magnitude:.6g})"


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def _check_shapes(inst: NetworkInstance, sol: Solution):
    S, P, W, K, C, M = (
        inst.n_scenarios, inst.n_plants, inst.n_warehouses,
        inst.n_customers, inst.n_collection, inst.n_disposal,
    )
    expected = {
        "open_plants": (P,), "open_warehouses": (W,), "open_collection": (C,),
        "ya": (S, P, W), "yb": (S, W, K), "yc": (S, K, C), "yd": (S, C, M), "ye": (S, C, P),
    }
    for name, shape in expected.items():
        got = getattr(sol, name).shape
        if got != shape:
            raise ValueError(f"solution field {name} has shape {got}, instance needs {shape}")


def check_feasibility(
    inst: NetworkInstance, sol: Solution, tol: float = FEASIBILITY_TOL
) -> FeasibilityReport:
    """Report every violated Solution invariant, with its magnitude."""
    _check_shapes(inst, sol)
    k = inst.coef
    out: list[Violation] = []
    names = {
        "plant": [r.id for r in inst.plants],
        "warehouse": [r.id for r in inst.warehouses],
        "customer": list(inst.customers),
        "collection": [r.id for r in inst.collection_centers],
        "disposal": [r.id for r in inst.disposal_sites],
    }

    def emit(kind: str, mask: np.ndarray, mag: np.ndarray, where):
        for idx in np.argwhere(mask):
            out.append(Violation(kind, where(*idx), float(mag[tuple(idx)])))

    def arc_where(src, dst, flow):
        return lambda s, i, j: f"scenario {s}, {flow} {names[src][i]}->{names[dst][j]}"

    def node_where(layer):
        return lambda s, i: f"scenario {s}, {layer} {names[layer][i]}"

    flows = (
        (sol.ya, "plant", "warehouse", "Ya"),
        (sol.yb, "warehouse", "customer", "Yb"),
        (sol.yc, "customer", "collection", "Yc"),
        (sol.yd, "collection", "disposal", "Yd"),
        (sol.ye, "collection", "plant", "Ye"),
    )
    for arr, src, dst, flow in flows:
        emit("negativity", arr < -tol, -arr, arc_where(src, dst, flow))

    opened = {
        "plant": sol.open_plants,
        "warehouse": sol.open_warehouses,
        "customer": np.ones(inst.n_customers, bool),
        "collection": sol.open_collection,
        "disposal": np.ones(inst.n_disposal, bool),
    }
    for arr, src, dst, flow in flows:
        closed = ~(opened[src][:, None] & opened[dst][None, :])
        emit("closed-facility", (np.abs(arr) > tol) & closed[None], np.abs(arr),
             arc_where(src, dst, flow))

    delivered = sol.yb.sum(axis=1)  # (S, K)
    gap = np.abs(delivered - inst.demand)
    emit("demand", gap > tol, gap, node_where("customer"))

    wh_in, wh_out = sol.ya.sum(axis=1), sol.yb.sum(axis=2)  # (S, W)
    gap = np.abs(wh_in - wh_out)
    emit("conservation", gap > tol, gap, node_where("warehouse"))

    col_in = sol.yc.sum(axis=1)  # (S, C)
    col_disp, col_reman = sol.yd.sum(axis=2), sol.ye.sum(axis=2)
    gap = np.abs(col_in - col_disp - col_reman)
    emit("conservation", gap > tol, gap, node_where("collection"))

    gap = np.abs(sol.yc.sum(axis=2) - inst.alpha * delivered)
    emit("return-ratio", gap > tol, gap, node_where("customer"))
    gap = np.abs(col_disp - inst.beta * col_in)
    emit("disposal-ratio", gap > tol, gap, node_where("collection"))

    for load, cap, layer in (
        (sol.ya.sum(axis=2), k.cap_p, "plant"),
        (wh_out, k.cap_w, "warehouse"),
        (col_in, k.cap_c, "collection"),
        (sol.yd.sum(axis=1), k.cap_d, "disposal"),
    ):
        over = load - cap[None, :]
        emit("capacity", over > tol, over, node_where(layer))

    return FeasibilityReport(tuple(out))

