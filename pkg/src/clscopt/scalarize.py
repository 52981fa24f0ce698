"""Weighted-sum method: exact scalarized optimization and weight sweeps.

For a fixed facility configuration the recourse problem of each scenario is
a network flow problem, so the exact optimum of a weighted, normalized sum
of the three objectives is found by enumerating configurations and solving
one min-cost flow per configuration and scenario.

Returns are handled in "plant-bound units": every unit a customer returns
splits at its collection center into ``beta`` (disposal) and ``1 - beta``
(back to a plant). Measuring reverse flow by its plant-bound part makes the
split proportional on every path, so the reverse arcs fold into the same
network as forward production; the disposal share is priced on the
customer -> collection arc at the cheapest disposal route. Remanufactured
units arriving at a plant either replace new production or are discarded,
which reproduces the one-for-one production offset of the cost model.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from .flow import FlowNetwork, InfeasibleFlowError, min_cost_flow
from .model import (
    FORBIDDEN,
    NetworkInstance,
    ObjectiveVector,
    Solution,
    canonicalize,
    evaluate,
)
from .pareto import FrontPoint, ParetoFront, Provenance

log = logging.getLogger(__name__)

#: Enumeration guard: refuse instances with more facility configurations.
MAX_CONFIGURATIONS = 2**20

#: Weight mixed into every objective during sweeps so each sweep point is
#: Pareto-optimal rather than only weakly so.
TIE_BREAK = 1e-6

WEIGHT_TOL = 1e-9


class TractabilityError(RuntimeError):
    pass


class NoFeasibleConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class WeightVector:
    cost: float
    co2: float
    dispatch: float

    def __post_init__(self):
        values = (self.cost, self.co2, self.dispatch)
        if any(not (x >= 0.0) for x in values):
            raise ValueError(f"weights must be non-negative: {values}")
        if abs(sum(values) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1, got {sum(values):.12g}")

    def as_array(self) -> np.ndarray:
        return np.array([self.cost, self.co2, self.dispatch], dtype=float)

    def __iter__(self):
        return iter((self.cost, self.co2, self.dispatch))


@dataclass(frozen=True)
class NormalizationBounds:
    """Per-objective utopia and nadir values in canonical (minimization) form."""

    utopia: tuple[float, float, float]
    nadir: tuple[float, float, float]

    def __post_init__(self):
        if any(u > n for u, n in zip(self.utopia, self.nadir)):
            raise ValueError(f"utopia {self.utopia} exceeds nadir {self.nadir}")

    @property
    def ranges(self) -> np.ndarray:
        return np.asarray(self.nadir, dtype=float) - np.asarray(self.utopia, dtype=float)

    def widened(self) -> NormalizationBounds:
        """Replace zero-width ranges by unit width."""
        nadir = tuple(
            n if n > u else u + 1.0 for u, n in zip(self.utopia, self.nadir)
        )
        return NormalizationBounds(self.utopia, nadir)


def scalarize(w: WeightVector, v: ObjectiveVector, b: NormalizationBounds) -> float:
    """Weighted sum of normalized canonical objectives (0 at utopia)."""
    weights = w.as_array()
    ranges = b.ranges
    degenerate = (ranges <= 0) & (weights > 0)
    if degenerate.any():
        names = [n for n, d in zip(("cost", "co2", "dispatch"), degenerate) if d]
        raise ValueError(f"degenerate normalization bounds for weighted objective(s) {names}")
    c = np.asarray(canonicalize(v), dtype=float)
    terms = np.where(weights > 0, weights * (c - np.asarray(b.utopia)) / np.where(ranges > 0, ranges, 1.0), 0.0)
    return float(terms.sum())


# --------------------------------------------------------------------------
# Exact solver
# --------------------------------------------------------------------------


def _nonempty_masks(n: int) -> list[np.ndarray]:
    return [np.array(bits, dtype=bool) for bits in itertools.product((False, True), repeat=n)
            if any(bits)]


def count_configurations(inst: NetworkInstance) -> int:
    return 2 ** (inst.n_plants + inst.n_warehouses + inst.n_collection)


def configurations(inst: NetworkInstance) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Facility plans with at least one open facility and enough capacity per layer."""
    k = inst.coef
    req = inst.scenario_requirements()
    slack = 1e-9

    def adequate(masks, cap, need):
        return [m for m in masks if cap[m].sum() + slack >= need]

    plants = adequate(_nonempty_masks(inst.n_plants), k.cap_p, req["plants"])
    whs = adequate(_nonempty_masks(inst.n_warehouses), k.cap_w, req["warehouses"])
    cols = adequate(_nonempty_masks(inst.n_collection), k.cap_c, req["collection_centers"])
    if k.cap_d.sum() + slack < req["disposal_sites"]:
        return
    yield from itertools.product(plants, whs, cols)


@dataclass(frozen=True)
class _UnitCosts:
    """Per-unit contributions to the (un-offset) scalarized objective."""

    prod: np.ndarray
    reman: np.ndarray
    hand: np.ndarray
    disasm: np.ndarray
    disp: np.ndarray
    pw: np.ndarray
    wk: np.ndarray
    kc: np.ndarray
    cp: np.ndarray
    cd: np.ndarray
    dispatch: np.ndarray  # credit per unit leaving each warehouse (<= 0)
    fixed_p: np.ndarray
    fixed_w: np.ndarray
    fixed_c: np.ndarray

    @classmethod
    def build(cls, inst: NetworkInstance, scale: np.ndarray) -> _UnitCosts:
        a_cost, a_co2, a_disp = (float(x) for x in scale)
        k = inst.coef

        def mix(cost, em):
            return a_cost * cost + a_co2 * em

        def arc(name):
            arr = inst.arcs[name]
            out = mix(arr[..., 0], arr[..., 1])
            return np.where(arr[..., 0] < FORBIDDEN, out, np.inf)

        return cls(
            prod=mix(k.prod_cost, k.prod_em),
            reman=mix(k.reman_cost, k.reman_em),
            hand=mix(k.hand_cost, k.hand_em),
            disasm=mix(k.disasm_cost, k.disasm_em),
            disp=mix(k.disp_cost, k.disp_em),
            pw=arc("plant_warehouse"),
            wk=arc("warehouse_customer"),
            kc=arc("customer_collection"),
            cp=arc("collection_plant"),
            cd=arc("collection_disposal"),
            dispatch=-a_disp * k.reliability,
            fixed_p=a_cost * k.fixed_p,
            fixed_w=a_cost * k.fixed_w,
            fixed_c=a_cost * k.fixed_c,
        )


def _recourse(
    inst: NetworkInstance,
    uc: _UnitCosts,
    open_p: np.ndarray,
    open_w: np.ndarray,
    open_c: np.ndarray,
    s: int,
) -> tuple[np.ndarray, ...]:
    """Optimal flows of scenario ``s`` under a fixed facility plan.

    Returns ``(ya, yb, yc, yd, ye)`` for that scenario.
    """
    k = inst.coef
    P, W, K, C, M = (
        inst.n_plants, inst.n_warehouses, inst.n_customers, inst.n_collection, inst.n_disposal,
    )
    alpha, beta = inst.alpha, inst.beta
    d = inst.demand[s]
    total = float(d.sum())
    returns = alpha * d
    big = 2.0 * (total + 1.0)

    net = FlowNetwork(0)
    new = net.add_node()
    p_in = [net.add_node() for _ in range(P)]
    p_out = [net.add_node() for _ in range(P)]
    w_in = [net.add_node() for _ in range(W)]
    w_out = [net.add_node() for _ in range(W)]
    cust = [net.add_node() for _ in range(K)]
    net.set_supply(new, total)
    for c in range(K):
        net.set_supply(cust[c], -float(d[c]))

    a_prod, a_pw, a_wk = {}, {}, {}
    for i in range(P):
        if open_p[i]:
            a_prod[i] = net.add_arc(new, p_in[i], big, uc.prod[i])
            net.add_arc(p_in[i], p_out[i], k.cap_p[i], 0.0)
            for j in range(W):
                if open_w[j] and np.isfinite(uc.pw[i, j]):
                    a_pw[i, j] = net.add_arc(p_out[i], w_in[j], big, uc.pw[i, j])
    for j in range(W):
        if open_w[j]:
            net.add_arc(w_in[j], w_out[j], k.cap_w[j], uc.hand[j])
            for c in range(K):
                if np.isfinite(uc.wk[j, c]):
                    a_wk[j, c] = net.add_arc(w_out[j], cust[c], big, uc.wk[j, c] + uc.dispatch[j])

    # cheapest weighted disposal route out of each collection center
    disp_route = uc.cd + uc.disp[None, :]
    disp_order = [np.argsort(disp_route[l], kind="stable").tolist() for l in range(C)]
    cheapest = np.array([disp_route[l].min() if M else np.inf for l in range(C)])

    a_kc: dict[tuple[int, int], int] = {}
    a_cp: dict[tuple[int, int], int] = {}
    reverse = alpha > 0 and returns.sum() > 0
    if reverse and beta < 1.0:
        keep = 1.0 - beta
        waste = net.add_node()
        net.add_arc(new, waste, big, 0.0)
        for i in range(P):
            if open_p[i]:
                net.add_arc(p_in[i], waste, big, 0.0)
        ret = [net.add_node() for _ in range(K)]
        l_in = [net.add_node() for _ in range(C)]
        l_out = [net.add_node() for _ in range(C)]
        for c in range(K):
            net.set_supply(ret[c], keep * returns[c])
        net.set_supply(waste, -keep * float(returns.sum()))
        for l in range(C):
            disp_term = beta * cheapest[l] if beta > 0 else 0.0
            if not open_c[l] or not np.isfinite(disp_term):
                continue
            net.add_arc(l_in[l], l_out[l], keep * k.cap_c[l], 0.0)
            for c in range(K):
                if np.isfinite(uc.kc[c, l]):
                    unit = (uc.kc[c, l] + uc.disasm[l] + disp_term) / keep
                    a_kc[c, l] = net.add_arc(ret[c], l_in[l], big, unit)
            for i in range(P):
                if open_p[i] and np.isfinite(uc.cp[l, i]):
                    a_cp[l, i] = net.add_arc(l_out[l], p_in[i], big, uc.cp[l, i] + uc.reman[i])
        scale_kc = 1.0 / keep
    elif reverse:
        # everything collected is disposed of: an independent transport problem
        ret = [net.add_node() for _ in range(K)]
        l_in = [net.add_node() for _ in range(C)]
        l_out = [net.add_node() for _ in range(C)]
        dump = net.add_node()
        sites = [net.add_node() for _ in range(M)]
        for c in range(K):
            net.set_supply(ret[c], float(returns[c]))
        net.set_supply(dump, -float(returns.sum()))
        a_cd: dict[tuple[int, int], int] = {}
        for m in range(M):
            net.add_arc(sites[m], dump, k.cap_d[m], uc.disp[m])
        for l in range(C):
            if not open_c[l]:
                continue
            net.add_arc(l_in[l], l_out[l], k.cap_c[l], uc.disasm[l])
            for c in range(K):
                if np.isfinite(uc.kc[c, l]):
                    a_kc[c, l] = net.add_arc(ret[c], l_in[l], big, uc.kc[c, l])
            for m in range(M):
                if np.isfinite(uc.cd[l, m]):
                    a_cd[l, m] = net.add_arc(l_out[l], sites[m], big, uc.cd[l, m])
        scale_kc = 1.0

    net.solve()

    ya = np.zeros((P, W))
    yb = np.zeros((W, K))
    yc = np.zeros((K, C))
    yd = np.zeros((C, M))
    ye = np.zeros((C, P))
    for (i, j), e in a_pw.items():
        ya[i, j] = net.flow(e)
    for (j, c), e in a_wk.items():
        yb[j, c] = net.flow(e)
    for (c, l), e in a_kc.items():
        yc[c, l] = net.flow(e) * scale_kc
    for (l, i), e in a_cp.items():
        ye[l, i] = net.flow(e)
    # snap row totals to their exact targets so path sums carry no rounding
    _rescale(yb.T, d)
    _rescale(ya.T, yb.sum(axis=1))
    if reverse:
        _rescale(yc, returns)
    inflow = yc.sum(axis=0)
    if reverse and beta >= 1.0:
        for (l, m), e in a_cd.items():
            yd[l, m] = net.flow(e)
        _rescale(yd, inflow)
    elif reverse and beta > 0:
        residual = k.cap_d.astype(float).copy()
        for l in range(C):
            need = beta * inflow[l]
            for m in disp_order[l]:
                if need <= 0:
                    break
                if not np.isfinite(disp_route[l, m]):
                    continue
                take = min(need, residual[m])
                if take > 0:
                    if m != disp_order[l][0]:
                        log.warning("disposal capacity binds; reverse routing may be suboptimal")
                    yd[l, m] += take
                    residual[m] -= take
                    need -= take
            if need > 1e-9:
                raise InfeasibleFlowError(f"scenario {s}: disposal capacity exhausted")
    if reverse and beta < 1.0:
        _rescale(ye, inflow - yd.sum(axis=1))
    return ya, yb, yc, yd, ye


def _rescale(rows: np.ndarray, targets: np.ndarray) -> None:
    """Scale each non-empty row in place so it sums to its target."""
    for r in range(rows.shape[0]):
        total = rows[r].sum()
        if total > 0:
            rows[r] = rows[r] / total * targets[r]


def _solve_config(inst, uc, open_p, open_w, open_c) -> Solution:
    flows = [_recourse(inst, uc, open_p, open_w, open_c, s) for s in range(inst.n_scenarios)]
    S = inst.n_scenarios
    stacked = [
        np.array([f[t] for f in flows], dtype=float).reshape((S,) + shape)
        for t, shape in enumerate((
            (inst.n_plants, inst.n_warehouses),
            (inst.n_warehouses, inst.n_customers),
            (inst.n_customers, inst.n_collection),
            (inst.n_collection, inst.n_disposal),
            (inst.n_collection, inst.n_plants),
        ))
    ]
    return Solution(open_p.copy(), open_w.copy(), open_c.copy(), *stacked)


def solve_scaled(
    inst: NetworkInstance,
    scale: np.ndarray,
    max_configurations: int = MAX_CONFIGURATIONS,
) -> tuple[Solution, ObjectiveVector]:
    """Minimize ``scale @ canonical(objectives)`` exactly over all plans.

    ``scale`` holds non-negative per-objective multipliers (weights already
    divided by the normalization ranges).
    """
    n_conf = count_configurations(inst)
    if n_conf > max_configurations:
        raise TractabilityError(
            f"{n_conf} facility configurations exceed the enumeration limit {max_configurations}"
        )
    scale = np.asarray(scale, dtype=float)
    uc = _UnitCosts.build(inst, scale)
    best: tuple[float, Solution, ObjectiveVector] | None = None
    for open_p, open_w, open_c in configurations(inst):
        try:
            sol = _solve_config(inst, uc, open_p, open_w, open_c)
        except InfeasibleFlowError:
            continue
        v = evaluate(inst, sol, check=False)
        value = float(scale @ np.asarray(v.canonical()))
        if best is None or value < best[0]:
            best = (value, sol, v)
    if best is None:
        raise NoFeasibleConfigurationError("no facility configuration can serve every scenario")
    return best[1], best[2]


def _scale_for(w: WeightVector, b: NormalizationBounds) -> np.ndarray:
    weights = w.as_array()
    ranges = b.ranges
    if ((ranges <= 0) & (weights > 0)).any():
        raise ValueError("degenerate normalization bounds for a weighted objective")
    return np.where(weights > 0, weights / np.where(ranges > 0, ranges, 1.0), 0.0)


def solve_weighted_exact(
    inst: NetworkInstance,
    w: WeightVector,
    b: NormalizationBounds,
    max_configurations: int = MAX_CONFIGURATIONS,
) -> tuple[Solution, ObjectiveVector]:
    """Exact minimizer of ``scalarize(w, evaluate(sol), b)``."""
    return solve_scaled(inst, _scale_for(w, b), max_configurations)


# --------------------------------------------------------------------------
# Bounds and sweeps
# --------------------------------------------------------------------------


def _corners(inst: NetworkInstance, max_configurations: int = MAX_CONFIGURATIONS
             ) -> tuple[NormalizationBounds, list[tuple[Solution, ObjectiveVector]]]:
    first = [solve_scaled(inst, np.eye(3)[o], max_configurations) for o in range(3)]
    C = np.array([v.canonical() for _, v in first])
    utopia = np.array([C[o, o] for o in range(3)])
    spread = C.max(axis=0) - utopia
    provisional = np.where(spread > 0, spread, np.maximum(np.abs(utopia), 1.0))

    corners = []
    for o in range(3):
        scale = TIE_BREAK / provisional
        scale[o] = 1.0 / provisional[o]
        sol, v = solve_scaled(inst, scale, max_configurations)
        primary = v.canonical()[o]
        if primary <= utopia[o] + 1e-9 * max(1.0, abs(utopia[o])):
            corners.append((sol, v))
        else:
            corners.append(first[o])
    C = np.array([v.canonical() for _, v in corners])
    bounds = NormalizationBounds(tuple(utopia.tolist()), tuple(np.maximum(C.max(axis=0), utopia).tolist()))
    return bounds, corners


def compute_bounds(inst: NetworkInstance, max_configurations: int = MAX_CONFIGURATIONS
                   ) -> NormalizationBounds:
    """Utopia from the three single-objective optima; nadir from their worst values."""
    return _corners(inst, max_configurations)[0]


def simplex_lattice(g: int) -> list[WeightVector]:
    """All weight vectors (i, j, k) / g with i + j + k = g."""
    if g < 1:
        raise ValueError("grid resolution must be >= 1")
    out = []
    for i in range(g, -1, -1):
        for j in range(g - i, -1, -1):
            k = g - i - j
            out.append(WeightVector(i / g, j / g, k / g))
    return out


def sweep_weights(
    inst: NetworkInstance,
    grid_resolution: int = 10,
    bounds: NormalizationBounds | None = None,
    max_configurations: int = MAX_CONFIGURATIONS,
) -> ParetoFront:
    """Solve every lattice weight vector exactly and keep the non-dominated results.

    Each weight vector is nudged by :data:`TIE_BREAK` toward the centroid so
    that zero weights cannot return weakly dominated plans; points are tagged
    with their nominal weights.
    """
    if grid_resolution < 1:
        raise ValueError("grid resolution must be >= 1")
    n_conf = count_configurations(inst)
    if n_conf > max_configurations:
        raise TractabilityError(
            f"{n_conf} facility configurations exceed the enumeration limit {max_configurations}"
        )
    b = (bounds or compute_bounds(inst, max_configurations)).widened()
    ranges = b.ranges
    points = []
    for w in simplex_lattice(grid_resolution):
        nudged = (1.0 - 3 * TIE_BREAK) * w.as_array() + TIE_BREAK
        sol, v = solve_scaled(inst, nudged / ranges, max_configurations)
        points.append(FrontPoint(v, sol, (Provenance("weighted-sum", weights=tuple(w)),)))
    return ParetoFront.from_points(points)


def is_degenerate(b: NormalizationBounds) -> bool:
    return bool((b.ranges <= 0).any())


def relative_gap(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


__all__ = [
    "MAX_CONFIGURATIONS",
    "NoFeasibleConfigurationError",
    "NormalizationBounds",
    "TractabilityError",
    "WeightVector",
    "canonicalize",
    "compute_bounds",
    "configurations",
    "min_cost_flow",
    "scalarize",
    "simplex_lattice",
    "solve_scaled",
    "solve_weighted_exact",
    "sweep_weights",
]
