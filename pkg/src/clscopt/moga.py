"""Real-coded NSGA-II for the three-objective network design problem.

A genotype is a vector in [0, 1]^n. The first genes are facility keys (one
per plant, warehouse and collection center; key >= 0.5 means open). The rest
are arc priority keys for the plant->warehouse, warehouse->customer,
customer->collection and collection->plant families, shared by all
scenarios. :func:`decode` turns any genotype into a feasible
:class:`~clscopt.model.Solution` by greedy assignment in key order.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .model import (
    FORBIDDEN,
    NetworkInstance,
    ObjectiveVector,
    Solution,
    evaluate,
)
from .pareto import (
    FrontPoint,
    ParetoFront,
    Provenance,
    clipped_hypervolume,
    crowding_distance,
    fast_nondominated_sort,
    nondominated_mask,
    reference_from_worst,
)

log = logging.getLogger(__name__)

OPEN_THRESHOLD = 0.5
_SLACK = 1e-9  # leftover volume tolerated by the greedy assignment


class DecodeError(ValueError):
    """The instance cannot be served even with every facility in a layer open."""


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    max_generations: int = 200
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # None -> 1 / n_genes
    sbx_eta: float = 15.0
    mutation_eta: float = 20.0
    tournament_size: int = 2
    stall_generations: int = 25
    stall_tolerance: float = 1e-4
    seed: int = 2021
    archive_capacity: int = 500
    n_jobs: int = 1

    def __post_init__(self):
        problems = []
        if self.population_size < 4 or self.population_size % 2:
            problems.append(f"population_size must be even and >= 4, got {self.population_size}")
        if self.max_generations < 0:
            problems.append("max_generations must be >= 0")
        if not 0.0 <= self.crossover_rate <= 1.0:
            problems.append(f"crossover_rate {self.crossover_rate} outside [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            problems.append(f"mutation_rate {self.mutation_rate} outside [0, 1]")
        if self.sbx_eta <= 0 or self.mutation_eta <= 0:
            problems.append("distribution indices must be positive")
        if self.tournament_size < 2:
            problems.append("tournament_size must be >= 2")
        if self.stall_generations < 1 or self.stall_tolerance < 0:
            problems.append("stall_generations must be >= 1 and stall_tolerance >= 0")
        if self.archive_capacity < 1:
            problems.append("archive_capacity must be >= 1")
        if self.n_jobs < 1:
            problems.append("n_jobs must be >= 1")
        if problems:
            raise ValueError("; ".join(problems))

    def mutation_rate_for(self, n_genes: int) -> float:
        return self.mutation_rate if self.mutation_rate is not None else 1.0 / n_genes


# --------------------------------------------------------------------------
# Genome layout and decoding
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GenomeLayout:
    n_plants: int
    n_warehouses: int
    n_collection: int
    n_customers: int

    @property
    def facility_slices(self) -> dict[str, slice]:
        P, W, C = self.n_plants, self.n_warehouses, self.n_collection
        return {
            "plants": slice(0, P),
            "warehouses": slice(P, P + W),
            "collection_centers": slice(P + W, P + W + C),
        }

    @property
    def arc_slices(self) -> dict[str, tuple[slice, tuple[int, int]]]:
        P, W, C, K = self.n_plants, self.n_warehouses, self.n_collection, self.n_customers
        out = {}
        start = P + W + C
        for name, shape in (
            ("plant_warehouse", (P, W)),
            ("warehouse_customer", (W, K)),
            ("customer_collection", (K, C)),
            ("collection_plant", (C, P)),
        ):
            size = shape[0] * shape[1]
            out[name] = (slice(start, start + size), shape)
            start += size
        return out

    @property
    def size(self) -> int:
        P, W, C, K = self.n_plants, self.n_warehouses, self.n_collection, self.n_customers
        return P + W + C + P * W + W * K + K * C + C * P

    def arc_keys(self, g: np.ndarray, family: str) -> np.ndarray:
        sl, shape = self.arc_slices[family]
        return g[sl].reshape(shape)


@lru_cache(maxsize=64)
def _layout(P: int, W: int, C: int, K: int) -> GenomeLayout:
    return GenomeLayout(P, W, C, K)


def genome_layout(inst: NetworkInstance) -> GenomeLayout:
    return _layout(inst.n_plants, inst.n_warehouses, inst.n_collection, inst.n_customers)


def _descending(keys: np.ndarray) -> list[int]:
    return np.argsort(-keys, kind="stable").tolist()


def open_layer(keys: np.ndarray, capacity: np.ndarray, requirement: float, layer: str) -> np.ndarray:
    """Threshold facility keys, then repair so the layer is non-empty and large enough."""
    opened = keys >= OPEN_THRESHOLD
    if not opened.any():
        opened[int(np.argmax(keys))] = True
    if capacity[opened].sum() + _SLACK < requirement:
        for idx in _descending(keys):
            if not opened[idx]:
                opened[idx] = True
                if capacity[opened].sum() + _SLACK >= requirement:
                    break
    if capacity[opened].sum() + _SLACK < requirement:
        raise DecodeError(
            f"layer {layer}: total capacity {capacity.sum():.6g} is below the "
            f"largest scenario requirement {requirement:.6g}"
        )
    return opened


def _greedy(amount: float, order: Sequence[int], residual: list[float], row: list[float]) -> float:
    """Fill ``amount`` into ``row`` following ``order`` under ``residual``; returns leftover."""
    for t in order:
        if amount <= 0.0:
            break
        take = amount if amount <= residual[t] else residual[t]
        if take > 0.0:
            row[t] += take
            residual[t] -= take
            amount -= take
    return amount


def decode(g: np.ndarray, inst: NetworkInstance) -> Solution:
    """Map a genotype to a feasible solution.

    Facilities open when their key is at least 0.5; an empty layer opens its
    highest-key facility, and a layer whose open capacity cannot carry the
    largest scenario opens further facilities in descending key order. Each
    scenario is then routed greedily: customers (in id order) draw from open
    warehouses in descending arc-key order, warehouses draw from plants the
    same way, returns go to collection centers by key, the disposal share
    goes to the cheapest disposal site with room, and the remainder goes to
    the highest-key open plant.
    """
    g = np.asarray(g, dtype=float)
    lay = genome_layout(inst)
    if g.shape != (lay.size,):
        raise ValueError(f"genotype length {g.shape} does not match instance ({lay.size})")
    k = inst.coef
    P, W, K, C, M = (
        inst.n_plants, inst.n_warehouses, inst.n_customers, inst.n_collection, inst.n_disposal,
    )
    alpha, beta = inst.alpha, inst.beta
    req = inst.scenario_requirements()
    fs = lay.facility_slices
    open_p = open_layer(g[fs["plants"]], k.cap_p, req["plants"], "plants")
    open_w = open_layer(g[fs["warehouses"]], k.cap_w, req["warehouses"], "warehouses")
    open_c = open_layer(g[fs["collection_centers"]], k.cap_c, req["collection_centers"],
                        "collection_centers")
    if k.cap_d.sum() + _SLACK < req["disposal_sites"]:
        raise DecodeError(
            f"layer disposal_sites: total capacity {k.cap_d.sum():.6g} is below the "
            f"largest scenario requirement {req['disposal_sites']:.6g}"
        )

    arcs = inst.arcs
    allowed = {name: arcs[name][..., 0] < FORBIDDEN for name in arcs}
    kwc = lay.arc_keys(g, "warehouse_customer")
    kpw = lay.arc_keys(g, "plant_warehouse")
    kkc = lay.arc_keys(g, "customer_collection")
    kcp = lay.arc_keys(g, "collection_plant")
    wh_for_cust = [
        [j for j in _descending(kwc[:, c]) if open_w[j] and allowed["warehouse_customer"][j, c]]
        for c in range(K)
    ]
    plant_for_wh = [
        [i for i in _descending(kpw[:, j]) if open_p[i] and allowed["plant_warehouse"][i, j]]
        for j in range(W)
    ]
    col_for_cust = [
        [l for l in _descending(kkc[c]) if open_c[l] and allowed["customer_collection"][c, l]]
        for c in range(K)
    ]
    plant_for_col = [
        [i for i in _descending(kcp[l]) if open_p[i] and allowed["collection_plant"][l, i]]
        for l in range(C)
    ]
    disp_money = arcs["collection_disposal"][..., 0] + k.disp_cost[None, :]
    disp_for_col = [
        [m for m in np.argsort(disp_money[l], kind="stable").tolist()
         if allowed["collection_disposal"][l, m]]
        for l in range(C)
    ]

    demand = inst.demand.tolist()
    cap_p, cap_w, cap_c, cap_d = (
        k.cap_p.tolist(), k.cap_w.tolist(), k.cap_c.tolist(), k.cap_d.tolist(),
    )
    ya_all, yb_all, yc_all, yd_all, ye_all = [], [], [], [], []
    for s in range(inst.n_scenarios):
        # warehouse -> customer, stored customer-major then transposed
        res_w = list(cap_w)
        yb_t = [[0.0] * W for _ in range(K)]
        for c in range(K):
            left = _greedy(demand[s][c], wh_for_cust[c], res_w, yb_t[c])
            if left > _SLACK:
                raise DecodeError(f"scenario {s}: customer {inst.customers[c]} cannot be served")
        wh_load = [sum(yb_t[c][j] for c in range(K)) for j in range(W)]

        res_p = list(cap_p)
        ya_t = [[0.0] * P for _ in range(W)]
        for j in range(W):
            left = _greedy(wh_load[j], plant_for_wh[j], res_p, ya_t[j])
            if left > _SLACK:
                raise DecodeError(f"scenario {s}: warehouse {j} inflow cannot be sourced")

        res_c = list(cap_c)
        yc = [[0.0] * C for _ in range(K)]
        for c in range(K):
            delivered = sum(yb_t[c])
            left = _greedy(alpha * delivered, col_for_cust[c], res_c, yc[c])
            if left > _SLACK:
                raise DecodeError(f"scenario {s}: returns of customer {c} cannot be collected")

        res_d = list(cap_d)
        yd = [[0.0] * M for _ in range(C)]
        ye = [[0.0] * P for _ in range(C)]
        for l in range(C):
            inflow = sum(yc[c][l] for c in range(K))
            if inflow <= 0.0:
                continue
            left = _greedy(beta * inflow, disp_for_col[l], res_d, yd[l])
            if left > _SLACK:
                raise DecodeError(f"scenario {s}: disposal capacity exhausted")
            rest = inflow - sum(yd[l])
            if rest > 0.0:
                if not plant_for_col[l]:
                    raise DecodeError(f"scenario {s}: collection center {l} reaches no open plant")
                ye[l][plant_for_col[l][0]] = rest

        ya_all.append(np.array(ya_t).T if W else np.zeros((P, 0)))
        yb_all.append(np.array(yb_t).T if K else np.zeros((W, 0)))
        yc_all.append(yc)
        yd_all.append(yd)
        ye_all.append(ye)

    S = inst.n_scenarios
    return Solution(
        open_p, open_w, open_c,
        np.array(ya_all, dtype=float).reshape(S, P, W),
        np.array(yb_all, dtype=float).reshape(S, W, K),
        np.array(yc_all, dtype=float).reshape(S, K, C),
        np.array(yd_all, dtype=float).reshape(S, C, M),
        np.array(ye_all, dtype=float).reshape(S, C, P),
    )


# --------------------------------------------------------------------------
# Variation operators
# --------------------------------------------------------------------------


def repair_facility_keys(g: np.ndarray, inst: NetworkInstance) -> np.ndarray:
    """Lift the largest key of any all-closed facility layer to at least 0.5."""
    g = g.copy()
    for sl in genome_layout(inst).facility_slices.values():
        keys = g[sl]
        if keys.size and keys.max() < OPEN_THRESHOLD:
            i = sl.start + int(np.argmax(keys))
            g[i] = OPEN_THRESHOLD + 0.5 * g[i]
    return g


def init_population(inst: NetworkInstance, cfg: GaConfig, rng: np.random.Generator | None = None
                    ) -> np.ndarray:
    """Uniform random genotypes, one row each, with facility-layer repair."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    n = genome_layout(inst).size
    pop = rng.random((cfg.population_size, n))
    return np.vstack([repair_facility_keys(row, inst) for row in pop])


def sbx_spread(u: np.ndarray | float, eta: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(
            u <= 0.5,
            (2.0 * u) ** (1.0 / (eta + 1.0)),
            (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0)),
        )


def sbx_children(p1: np.ndarray, p2: np.ndarray, u: np.ndarray | float, eta: float
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Unclamped SBX children for uniform draws ``u``."""
    b = sbx_spread(u, eta)
    p1, p2 = np.asarray(p1, dtype=float), np.asarray(p2, dtype=float)
    c1 = 0.5 * ((1.0 + b) * p1 + (1.0 - b) * p2)
    c2 = 0.5 * ((1.0 - b) * p1 + (1.0 + b) * p2)
    return c1, c2


def sbx_crossover(
    p1: np.ndarray,
    p2: np.ndarray,
    eta_c: float,
    rng: np.random.Generator,
    crossover_rate: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulated binary crossover applied gene-wise with probability ``crossover_rate``."""
    p1, p2 = np.asarray(p1, dtype=float), np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise ValueError("parents must have equal length")
    n = p1.shape[0]
    mask = rng.random(n) < crossover_rate
    u = rng.random(n)
    c1, c2 = sbx_children(p1, p2, u, eta_c)
    c1 = np.where(mask, c1, p1)
    c2 = np.where(mask, c2, p2)
    return np.clip(c1, 0.0, 1.0), np.clip(c2, 0.0, 1.0)


def polynomial_mutation(
    g: np.ndarray, eta_m: float, p_m: float, rng: np.random.Generator
) -> np.ndarray:
    """Bounded polynomial mutation on [0, 1], each gene with probability ``p_m``."""
    x = np.asarray(g, dtype=float)
    n = x.shape[0]
    mask = rng.random(n) < p_m
    r = rng.random(n)
    power = 1.0 / (eta_m + 1.0)
    lower = 2.0 * r + (1.0 - 2.0 * r) * (1.0 - x) ** (eta_m + 1.0)
    upper = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * x ** (eta_m + 1.0)
    delta = np.where(r < 0.5, lower ** power - 1.0, 1.0 - upper ** power)
    return np.where(mask, np.clip(x + delta, 0.0, 1.0), x)


def select_parent(
    rank: np.ndarray,
    crowding: np.ndarray,
    tournament_size: int,
    rng: np.random.Generator,
) -> int:
    """Crowded-comparison tournament: lower rank, then larger crowding, then a random draw."""
    n = len(rank)
    entrants = rng.choice(n, size=min(tournament_size, n), replace=False)
    best_rank = rank[entrants].min()
    entrants = entrants[rank[entrants] == best_rank]
    best_crowd = crowding[entrants].max()
    entrants = entrants[crowding[entrants] == best_crowd]
    if len(entrants) == 1:
        return int(entrants[0])
    return int(entrants[rng.integers(len(entrants))])


# --------------------------------------------------------------------------
# Ranking and survival
# --------------------------------------------------------------------------


def _first_occurrences(F: np.ndarray) -> tuple[list[int], np.ndarray]:
    """Indices of first occurrences of each distinct row, and row -> representative."""
    seen: dict[tuple, int] = {}
    reps: list[int] = []
    rep_of = np.empty(len(F), dtype=int)
    for i, row in enumerate(map(tuple, F.tolist())):
        if row not in seen:
            seen[row] = i
            reps.append(i)
        rep_of[i] = seen[row]
    return reps, rep_of


def rank_and_crowd(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Non-domination rank and crowding distance per row.

    Identical objective vectors are collapsed first; duplicates share the
    rank of their first occurrence and get zero crowding.
    """
    reps, rep_of = _first_occurrences(F)
    fronts, rep_rank = fast_nondominated_sort(F[reps])
    rank = np.empty(len(F), dtype=int)
    crowd = np.zeros(len(F))
    for front in fronts:
        idx = [reps[i] for i in front]
        crowd[idx] = crowding_distance(F[idx])
    rank_by_rep = {reps[i]: int(rep_rank[i]) for i in range(len(reps))}
    for i in range(len(F)):
        rank[i] = rank_by_rep[int(rep_of[i])]
    dup = np.array([rep_of[i] != i for i in range(len(F))], dtype=bool)
    crowd[dup] = 0.0
    return rank, crowd


def environmental_selection(F: np.ndarray, n_survivors: int) -> list[int]:
    """Pick ``n_survivors`` rows of the merged pool by crowded comparison.

    Distinct objective vectors are ranked first; if fewer than
    ``n_survivors`` distinct vectors exist, duplicates fill the remaining
    slots in pool order. Returned indices are sorted.
    """
    reps, _ = _first_occurrences(F)
    fronts, _ = fast_nondominated_sort(F[reps])
    chosen: list[int] = []
    for front in fronts:
        idx = [reps[i] for i in front]
        room = n_survivors - len(chosen)
        if len(idx) <= room:
            chosen.extend(idx)
        else:
            cd = crowding_distance(F[idx])
            order = np.argsort(-cd, kind="stable")
            chosen.extend(idx[i] for i in order[:room])
        if len(chosen) >= n_survivors:
            break
    if len(chosen) < n_survivors:
        rep_set = set(reps)
        extra = [i for i in range(len(F)) if i not in rep_set]
        chosen.extend(extra[: n_survivors - len(chosen)])
    return sorted(chosen)


# --------------------------------------------------------------------------
# Archive
# --------------------------------------------------------------------------


@dataclass
class ArchiveRecord:
    genotype: np.ndarray
    solution: Solution
    objectives: ObjectiveVector
    generation: int


class Archive:
    """Elitist archive of mutually non-dominated, distinct objective vectors."""

    def __init__(self, capacity: int = 500):
        self.capacity = capacity
        self.records: list[ArchiveRecord] = []
        self._F = np.empty((0, 3))

    def __len__(self) -> int:
        return len(self.records)

    def canonical(self) -> np.ndarray:
        return self._F

    def update(self, candidates: Sequence[ArchiveRecord]) -> None:
        pool = list(self.records)
        keys = {tuple(r.objectives.canonical()) for r in pool}
        for rec in candidates:
            key = tuple(rec.objectives.canonical())
            if key not in keys:
                keys.add(key)
                pool.append(rec)
        if len(pool) == len(self.records):
            return
        F = np.array([r.objectives.canonical() for r in pool], dtype=float)
        keep = nondominated_mask(F)
        pool = [r for r, k in zip(pool, keep) if k]
        F = F[keep]
        while len(pool) > self.capacity:
            drop = int(np.argmin(crowding_distance(F)))
            del pool[drop]
            F = np.delete(F, drop, axis=0)
        self.records = pool
        self._F = F

    def to_front(self) -> ParetoFront:
        return ParetoFront.from_points(
            FrontPoint(r.objectives, r.solution, (Provenance("ga", generation=r.generation),))
            for r in self.records
        )


# --------------------------------------------------------------------------
# Main loop
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    archive_size: int
    hypervolume: float
    best_cost: float
    best_co2: float
    best_dispatch: float
    mean_cost: float
    mean_co2: float
    mean_dispatch: float


_WORKER_INSTANCE: NetworkInstance | None = None


def _init_worker(inst: NetworkInstance) -> None:
    global _WORKER_INSTANCE
    _WORKER_INSTANCE = inst


def _decode_and_evaluate(g: np.ndarray, inst: NetworkInstance | None = None
                         ) -> tuple[Solution, ObjectiveVector]:
    inst = _WORKER_INSTANCE if inst is None else inst
    sol = decode(g, inst)
    return sol, evaluate(inst, sol, check=False)


class _Evaluator:
    def __init__(self, inst: NetworkInstance, n_jobs: int):
        self.inst = inst
        self.pool = (
            ProcessPoolExecutor(max_workers=n_jobs, initializer=_init_worker, initargs=(inst,))
            if n_jobs > 1 else None
        )
        self.n_jobs = n_jobs

    def __call__(self, genotypes: np.ndarray) -> list[tuple[Solution, ObjectiveVector]]:
        if self.pool is None:
            return [_decode_and_evaluate(g, self.inst) for g in genotypes]
        chunk = max(1, len(genotypes) // (4 * self.n_jobs))
        return list(self.pool.map(_decode_and_evaluate, list(genotypes), chunksize=chunk))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


@dataclass
class Population:
    genotypes: np.ndarray
    solutions: list[Solution]
    objectives: list[ObjectiveVector]
    F: np.ndarray = field(init=False)
    rank: np.ndarray = field(init=False)
    crowding: np.ndarray = field(init=False)

    def __post_init__(self):
        self.F = np.array([v.canonical() for v in self.objectives], dtype=float).reshape(-1, 3)
        self.rank, self.crowding = rank_and_crowd(self.F)


def _stats(generation: int, pop: Population, archive: Archive, hv: float) -> GenerationStats:
    obj = np.array(pop.objectives, dtype=float)
    return GenerationStats(
        generation=generation,
        archive_size=len(archive),
        hypervolume=hv,
        best_cost=float(obj[:, 0].min()),
        best_co2=float(obj[:, 1].min()),
        best_dispatch=float(obj[:, 2].max()),
        mean_cost=float(obj[:, 0].mean()),
        mean_co2=float(obj[:, 1].mean()),
        mean_dispatch=float(obj[:, 2].mean()),
    )


def make_offspring(pop: Population, cfg: GaConfig, rng: np.random.Generator,
                   mutation_rate: float) -> np.ndarray:
    """All random draws for one generation's children, taken in a fixed order."""
    children = []
    while len(children) < cfg.population_size:
        a = select_parent(pop.rank, pop.crowding, cfg.tournament_size, rng)
        b = select_parent(pop.rank, pop.crowding, cfg.tournament_size, rng)
        c1, c2 = sbx_crossover(pop.genotypes[a], pop.genotypes[b], cfg.sbx_eta, rng,
                               cfg.crossover_rate)
        children.append(polynomial_mutation(c1, cfg.mutation_eta, mutation_rate, rng))
        children.append(polynomial_mutation(c2, cfg.mutation_eta, mutation_rate, rng))
    return np.vstack(children[: cfg.population_size])


def run_nsga2(
    inst: NetworkInstance,
    cfg: GaConfig | None = None,
    on_generation: Callable[[int, Population, Archive, GenerationStats], None] | None = None,
) -> tuple[ParetoFront, list[GenerationStats]]:
    """Run elitist NSGA-II and return the archive front plus per-generation stats.

    Stops after ``cfg.max_generations`` generations, or earlier once the
    archive hypervolume (reference frozen from generation 0) has improved by
    less than ``cfg.stall_tolerance`` (relative) over the last
    ``cfg.stall_generations`` generations.
    """
    cfg = cfg or GaConfig()
    rng = np.random.default_rng(cfg.seed)
    n_genes = genome_layout(inst).size
    p_m = cfg.mutation_rate_for(n_genes)
    evaluator = _Evaluator(inst, cfg.n_jobs)
    try:
        genotypes = init_population(inst, cfg, rng)
        results = evaluator(genotypes)
        pop = Population(genotypes, [r[0] for r in results], [r[1] for r in results])
        reference = reference_from_worst(pop.F.max(axis=0))
        archive = Archive(cfg.archive_capacity)
        archive.update([
            ArchiveRecord(g, s, v, 0) for g, s, v in zip(pop.genotypes, pop.solutions, pop.objectives)
        ])
        hv_history = [clipped_hypervolume(archive.canonical(), reference)]
        stats = [_stats(0, pop, archive, hv_history[0])]
        if on_generation:
            on_generation(0, pop, archive, stats[-1])

        for gen in range(1, cfg.max_generations + 1):
            kids = make_offspring(pop, cfg, rng, p_m)
            results = evaluator(kids)
            kid_sols = [r[0] for r in results]
            kid_objs = [r[1] for r in results]
            archive.update([
                ArchiveRecord(g, s, v, gen) for g, s, v in zip(kids, kid_sols, kid_objs)
            ])
            all_g = np.vstack([pop.genotypes, kids])
            all_s = pop.solutions + kid_sols
            all_v = pop.objectives + kid_objs
            F = np.array([v.canonical() for v in all_v], dtype=float)
            keep = environmental_selection(F, cfg.population_size)
            pop = Population(all_g[keep], [all_s[i] for i in keep], [all_v[i] for i in keep])

            hv_history.append(clipped_hypervolume(archive.canonical(), reference))
            stats.append(_stats(gen, pop, archive, hv_history[-1]))
            if on_generation:
                on_generation(gen, pop, archive, stats[-1])
            if gen >= cfg.stall_generations:
                before = hv_history[gen - cfg.stall_generations]
                if hv_history[gen] - before <= cfg.stall_tolerance * abs(before):
                    log.info("stopping at generation %d: hypervolume stalled", gen)
                    break
    finally:
        evaluator.close()
    return archive.to_front(), stats
