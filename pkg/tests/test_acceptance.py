"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -s`` or as a script
(``python tests/test_acceptance.py``); the summary lines also appear at the
end of any pytest session that includes this file.
"""

from __future__ import annotations

import itertools
import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import (  # noqa: E402
    canonical,
    enumerate_objectives,
    grid_hypervolume,
    nondominated_quadratic,
    peel_ranks,
)

from clscopt.cli import main as cli_main  # noqa: E402
from clscopt.instances import oracle_tiny, tabletop  # noqa: E402
from clscopt.model import Solution, check_feasibility, dump_instance  # noqa: E402
from clscopt.moga import (  # noqa: E402
    GaConfig,
    decode,
    genome_layout,
    polynomial_mutation,
    run_nsga2,
    sbx_children,
    sbx_crossover,
)
from clscopt.pareto import (  # noqa: E402
    coverage,
    dominates,
    fast_nondominated_sort,
    hypervolume,
    nondominated_filter,
    reference_from_worst,
)
from clscopt.scalarize import (  # noqa: E402
    NormalizationBounds,
    WeightVector,
    scalarize,
    solve_weighted_exact,
    sweep_weights,
)

RESULTS: dict[int, str] = {}

ELEVEN_WEIGHTS = [
    (1, 0, 0), (0, 1, 0), (0, 0, 1),
    (0.5, 0.5, 0), (0.5, 0, 0.5), (0, 0.5, 0.5),
    (1 / 3, 1 / 3, 1 / 3),
    (0.6, 0.2, 0.2), (0.2, 0.6, 0.2), (0.2, 0.2, 0.6), (0.1, 0.3, 0.6),
]


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def _matches(point: np.ndarray, pool: np.ndarray, tol: float) -> bool:
    return bool(np.any(np.all(np.abs(pool - point) <= tol * np.maximum(1.0, np.abs(point)), axis=1)))


def test_criterion_1_oracle_pareto_recovery():
    t0 = time.perf_counter()
    inst = oracle_tiny()
    F = canonical(enumerate_objectives(inst))
    true_front = F[nondominated_quadratic(F)]
    cfg = GaConfig(population_size=40, max_generations=100, seed=2021, stall_generations=100)
    front, stats = run_nsga2(inst, cfg)
    elapsed = time.perf_counter() - t0
    G = front.canonical()
    unmatched = sum(not _matches(g, true_front, 1e-9) for g in G)
    ref = reference_from_worst(true_front.max(axis=0))
    ratio = hypervolume(G, ref) / hypervolume(true_front, ref)
    ok = unmatched == 0 and ratio >= 0.99 and elapsed < 10 and len(stats) == 101
    record(1, ok, f"archive {len(G)} pts, unmatched {unmatched}, true front {len(true_front)} pts, "
                  f"HV ratio {ratio:.6f}, {elapsed:.2f}s")


def test_criterion_2_exact_solver_optimality():
    t0 = time.perf_counter()
    inst = oracle_tiny()
    F = canonical(enumerate_objectives(inst))
    b = NormalizationBounds(tuple(F.min(axis=0)), tuple(F.max(axis=0)))
    worst_gap = -np.inf
    for t in ELEVEN_WEIGHTS:
        w = WeightVector(*t)
        _, v = solve_weighted_exact(inst, w, b)
        best = float((((F - np.array(b.utopia)) / b.ranges) @ w.as_array()).min())
        gap = (scalarize(w, v, b) - best) / max(1.0, abs(best))
        worst_gap = max(worst_gap, gap)
    elapsed = time.perf_counter() - t0
    ok = worst_gap <= 1e-6 and elapsed < 5
    record(2, ok, f"worst relative excess over enumeration {worst_gap:.3e}, {elapsed:.2f}s")


def test_criterion_3_cross_method_consistency():
    t0 = time.perf_counter()
    inst = tabletop()
    cfg = GaConfig(population_size=100, max_generations=200, stall_generations=200)
    ga, stats = run_nsga2(inst, cfg)
    ws = sweep_weights(inst, 10)
    elapsed = time.perf_counter() - t0
    c_tol = coverage(ga.canonical(), ws.canonical(), rel_tol=0.01)
    c_strict = coverage(ga.canonical(), ws.canonical())
    ok = c_tol == 1.0 and elapsed < 60 and len(stats) == 201
    record(3, ok, f"C(GA, WS) = {c_tol:.3f} at 1% ({c_strict:.3f} strict), "
                  f"GA {len(ga)} pts, WS {len(ws)} pts, {elapsed:.2f}s")


def test_criterion_4_feasibility_fuzz():
    t0 = time.perf_counter()
    inst = tabletop()
    rng = np.random.default_rng(20210)
    n_genes = genome_layout(inst).size
    bad = 0
    for _ in range(100):
        for g in rng.random((1000, n_genes)):
            if not check_feasibility(inst, decode(g, inst), tol=1e-6).feasible:
                bad += 1
    elapsed = time.perf_counter() - t0
    record(4, bad == 0 and elapsed < 30, f"100000 genotypes, {bad} infeasible, {elapsed:.2f}s")


def test_criterion_5_operator_properties():
    rng = np.random.default_rng(5)
    worst_sum = 0.0
    out_of_bounds = 0
    for _ in range(10**4):
        p1, p2 = rng.random(8), rng.random(8)
        u = rng.random(8)
        c1, c2 = sbx_children(p1, p2, u, 15.0)
        worst_sum = max(worst_sum, float(np.max(np.abs((c1 + c2) - (p1 + p2)))))
        k1, k2 = sbx_crossover(p1, p2, 15.0, rng)
        m = polynomial_mutation(k1, 20.0, 0.5, rng)
        for x in (k1, k2, m):
            out_of_bounds += int(np.any(x < 0.0) or np.any(x > 1.0))
    p1, p2 = rng.random(8), rng.random(8)
    h1, h2 = sbx_children(p1, p2, np.full(8, 0.5), 15.0)
    exact = bool(np.array_equal(h1, p1) and np.array_equal(h2, p2))
    ok = worst_sum <= 1e-12 and out_of_bounds == 0 and exact
    record(5, ok, f"max |sum change| {worst_sum:.2e}, out-of-bounds {out_of_bounds}, "
                  f"u=0.5 reproduces parents: {exact}")


def test_criterion_6_archive_invariants():
    inst = tabletop()
    cfg = GaConfig(population_size=100, max_generations=200, seed=6, stall_generations=200)
    state = {"violations": 0, "decreases": 0, "ref": None, "last": -np.inf, "gens": 0}

    def check(gen, pop, archive, stats):
        F = archive.canonical()
        for i, j in itertools.permutations(range(len(F)), 2):
            if dominates(F[i], F[j]):
                state["violations"] += 1
        if gen == 0:
            state["ref"] = reference_from_worst(pop.F.max(axis=0))
        inside = F[np.all(F < state["ref"], axis=1)]
        hv = hypervolume(inside, state["ref"])
        if hv < state["last"] - 1e-12 * abs(state["last"]):
            state["decreases"] += 1
        state["last"] = hv
        state["gens"] += 1

    run_nsga2(inst, cfg, on_generation=check)
    ok = state["violations"] == 0 and state["decreases"] == 0
    record(6, ok, f"{state['gens']} generations, {state['violations']} dominated archive pairs, "
                  f"{state['decreases']} hypervolume decreases")


def test_criterion_7_determinism(tmp_path):
    inst_path = tmp_path / "tabletop.json"
    inst_path.write_text(dump_instance(tabletop()))
    outputs = []
    for run, jobs in enumerate((1, 1, 2)):
        out = tmp_path / f"run{run}"
        code = cli_main(["solve", "--instance", str(inst_path), "--method", "nsga2",
                         "--seed", "7", "--pop", "40", "--gens", "30", "--jobs", str(jobs),
                         "--out", str(out)])
        assert code == 0
        outputs.append({n: (out / n).read_bytes()
                        for n in ("front.csv", "solutions.json", "stats.csv")})
    same = outputs[0] == outputs[1] == outputs[2]
    record(7, same, "front.csv, solutions.json, stats.csv identical across 2 serial runs "
                    f"and 1 run with 2 workers: {same}")


def test_criterion_8_indicator_correctness():
    lattice = list(itertools.product(range(3), repeat=3))
    ref = (3, 3, 3)
    worst = 0.0
    count = 0
    for n in range(1, 5):
        for pts in itertools.combinations(lattice, n):
            got = hypervolume(np.array(pts, dtype=float), ref)
            worst = max(worst, abs(got - grid_hypervolume(pts, ref)))
            count += 1
    rng = np.random.default_rng(8)
    F = rng.integers(0, 15, (200, 3)).astype(float)
    filt = np.array(nondominated_filter(list(F)))
    filter_ok = np.array_equal(filt, F[nondominated_quadratic(F)])
    _, rank = fast_nondominated_sort(F)
    sort_ok = bool(np.array_equal(rank, peel_ranks(F)))
    ok = worst <= 1e-9 and filter_ok and sort_ok
    record(8, ok, f"{count} fronts of <= 4 points, max HV error {worst:.1e}; filter matches "
                  f"O(n^2) scan: {filter_ok}; sort matches peeling: {sort_ok}")


def test_criterion_9_table_structure(tmp_path):
    inst = tabletop()
    inst_path = tmp_path / "tabletop.json"
    inst_path.write_text(dump_instance(inst))
    worst = 0.0
    names_ok = True
    n_solutions = 0
    for method in ("nsga2", "wsum"):
        out = tmp_path / method
        assert cli_main(["solve", "--instance", str(inst_path), "--method", method,
                         "--out", str(out)]) == 0
        doc = json.loads((out / "solutions.json").read_text())
        for entry in doc["solutions"]:
            names_ok &= all(set(f) >= {"Ya", "Yb", "Yc", "Yd"} for f in entry["flows"])
            sol = Solution.from_json(entry, inst)
            assert check_feasibility(inst, sol).feasible
            for s in range(inst.n_scenarios):
                yb, yc, yd = sol.yb[s].sum(), sol.yc[s].sum(), sol.yd[s].sum()
                worst = max(worst, abs(yc - 0.2 * yb) / (0.2 * yb), abs(yd - 0.1 * yc) / (0.1 * yc))
            n_solutions += 1
    ok = worst <= 1e-9 and names_ok
    record(9, ok, f"{n_solutions} solutions, max relative ratio error {worst:.1e}, "
                  f"Ya/Yb/Yc/Yd keys present: {names_ok}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
