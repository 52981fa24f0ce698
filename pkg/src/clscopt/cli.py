"""Command-line interface.

Exit codes: 0 success, 1 domain validation or decode failure, 2 I/O or parse
failure, 3 instance too large for exact enumeration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .instances import DEFAULT_SEED, TEMPLATES, make_instance
from .model import (
    InstanceError,
    NetworkInstance,
    check_feasibility,
    dump_instance,
    instance_problems,
)
from .moga import DecodeError, GaConfig, GenerationStats, run_nsga2
from .pareto import (
    ParetoFront,
    coverage,
    hypervolume,
    nondominated_mask,
    reference_from_worst,
)
from .scalarize import NoFeasibleConfigurationError, TractabilityError, compute_bounds, sweep_weights

log = logging.getLogger("clscopt")

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_INTRACTABLE = 0, 1, 2, 3

FRONT_HEADER = ["solution_id", "method", "total_cost", "total_co2", "expected_dispatch"]
STATS_HEADER = ["generation", "archive_size", "hypervolume", "best_cost", "best_co2", "best_dispatch"]
METHODS = ("nsga2", "wsum")
COVERAGE_TOL = 0.01


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class RunConfig:
    command: str
    instance: Path | None = None
    method: str | None = None
    ga: GaConfig = field(default_factory=GaConfig)
    grid: int = 10
    out: Path = Path("out")
    seed: int = DEFAULT_SEED


def _fmt(x: float) -> str:
    return f"{x:.6f}"


# --------------------------------------------------------------------------
# Loading
# --------------------------------------------------------------------------


def read_instance(path: Path) -> NetworkInstance:
    """Load and validate an instance, mapping failures to exit codes."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(
            f"{path}: malformed JSON at line {exc.lineno} column {exc.colno} "
            f"(char {exc.pos}): {exc.msg}",
            EXIT_IO,
        ) from exc
    try:
        inst = NetworkInstance.from_json(data)
    except KeyError as exc:
        raise CliError(f"{path}: missing field {exc.args[0]!r}", EXIT_INVALID) from exc
    except (TypeError, ValueError, AttributeError) as exc:
        raise CliError(f"{path}: malformed instance: {exc}", EXIT_INVALID) from exc
    problems = instance_problems(inst)
    if problems:
        raise CliError(str(InstanceError(problems)), EXIT_INVALID)
    return inst


# --------------------------------------------------------------------------
# Output writers
# --------------------------------------------------------------------------


def _sorted_points(front: ParetoFront) -> list:
    return front.sorted().points


def write_front_csv(path: Path, rows: list[tuple[str, str, Any]]) -> None:
    """``rows`` are (solution_id, method, ObjectiveVector)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRONT_HEADER)
        for sid, method, v in rows:
            w.writerow([sid, method, _fmt(v.total_cost), _fmt(v.total_co2), _fmt(v.expected_dispatch)])


def write_stats_csv(path: Path, stats: list[GenerationStats]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_HEADER)
        for s in stats:
            w.writerow([s.generation, s.archive_size, _fmt(s.hypervolume),
                        _fmt(s.best_cost), _fmt(s.best_co2), _fmt(s.best_dispatch)])


def solutions_document(inst: NetworkInstance, rows: list[tuple[str, str, Any]]) -> dict:
    """``rows`` are (solution_id, method, FrontPoint)."""
    out = []
    for sid, method, p in rows:
        entry = {
            "solution_id": sid,
            "method": method,
            "objectives": p.objectives._asdict(),
            "provenance": [x.to_json() for x in p.provenance],
        }
        entry.update(p.solution.to_json(inst))
        out.append(entry)
    return {"solutions": out}


def write_json(path: Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def audit_solutions(inst: NetworkInstance, points) -> None:
    """Re-check every emitted solution; an infeasible one is a defect worth failing on."""
    for p in points:
        report = check_feasibility(inst, p.solution)
        if not report.feasible:
            raise CliError(f"emitted solution failed the feasibility audit: {report.violations[0]}",
                           EXIT_INVALID)


def front_reference(F: np.ndarray) -> np.ndarray:
    return reference_from_worst(F.max(axis=0))


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_validate(cfg: RunConfig) -> int:
    inst = read_instance(cfg.instance)
    print(
        f"{cfg.instance}: valid ({inst.n_plants} plants, {inst.n_warehouses} warehouses, "
        f"{inst.n_customers} customers, {inst.n_collection} collection centers, "
        f"{inst.n_disposal} disposal sites, {inst.n_scenarios} scenarios)"
    )
    return EXIT_OK


def cmd_gen_instance(template: str, seed: int, out: Path) -> int:
    inst = make_instance(template, seed)
    try:
        Path(out).write_text(dump_instance(inst), encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc.strerror or exc}", EXIT_IO) from exc
    print(f"wrote {template} instance to {out}")
    return EXIT_OK


def _run_method(inst: NetworkInstance, cfg: RunConfig, method: str
                ) -> tuple[ParetoFront, list[GenerationStats] | None]:
    if method == "nsga2":
        return run_nsga2(inst, cfg.ga)
    return sweep_weights(inst, cfg.grid), None


def _ids(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i + 1:03d}" for i in range(n)]


def _prepare_out(out: Path) -> None:
    try:
        Path(out).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out}: {exc.strerror or exc}", EXIT_IO) from exc


def cmd_solve(cfg: RunConfig) -> int:
    inst = read_instance(cfg.instance)
    _prepare_out(cfg.out)
    front, stats = _run_method(inst, cfg, cfg.method)
    points = _sorted_points(front)
    audit_solutions(inst, points)
    ids = _ids("S", len(points))
    write_front_csv(cfg.out / "front.csv",
                    [(sid, cfg.method, p.objectives) for sid, p in zip(ids, points)])
    write_json(cfg.out / "solutions.json",
               solutions_document(inst, [(sid, cfg.method, p) for sid, p in zip(ids, points)]))
    if stats is not None:
        write_stats_csv(cfg.out / "stats.csv", stats)
    hv = hypervolume(front.canonical(), front_reference(front.canonical())) if len(front) else 0.0
    print(f"front size: {len(front)}")
    print(f"hypervolume: {hv:.6f} (reference 10% beyond the front's worst point)")
    return EXIT_OK


def compare_fronts(ga: ParetoFront, ws: ParetoFront) -> dict[str, Any]:
    """Indicators comparing a GA front with a weighted-sum front."""
    A, B = ga.canonical(), ws.canonical()
    union = np.vstack([A, B])
    ref = front_reference(union)
    U = union[nondominated_mask(union)]
    return {
        "reference": ref.tolist(),
        "hypervolume_ga": hypervolume(A, ref),
        "hypervolume_ws": hypervolume(B, ref),
        "hypervolume_union": hypervolume(np.unique(U, axis=0), ref),
        "coverage_ga_ws": coverage(A, B),
        "coverage_ws_ga": coverage(B, A),
        "coverage_ga_ws_tol": coverage(A, B, COVERAGE_TOL),
        "coverage_ws_ga_tol": coverage(B, A, COVERAGE_TOL),
    }


def cmd_compare(cfg: RunConfig) -> int:
    inst = read_instance(cfg.instance)
    _prepare_out(cfg.out)
    bounds = compute_bounds(inst)
    ga, _ = run_nsga2(inst, cfg.ga)
    ws = sweep_weights(inst, cfg.grid, bounds)
    ga_pts, ws_pts = _sorted_points(ga), _sorted_points(ws)
    audit_solutions(inst, ga_pts + ws_pts)
    rows = [(sid, "nsga2", p) for sid, p in zip(_ids("GA", len(ga_pts)), ga_pts)]
    rows += [(sid, "wsum", p) for sid, p in zip(_ids("WS", len(ws_pts)), ws_pts)]
    rows.sort(key=lambda r: (r[2].objectives.canonical(), r[1]))
    write_front_csv(cfg.out / "compare.csv", [(sid, m, p.objectives) for sid, m, p in rows])
    write_json(cfg.out / "solutions.json", solutions_document(inst, rows))

    report = compare_fronts(ga, ws)
    utopia = bounds.utopia
    report["utopia"] = {
        "total_cost": utopia[0],
        "total_co2": utopia[1],
        "expected_dispatch": -utopia[2],
    }
    report["front_sizes"] = {"nsga2": len(ga), "wsum": len(ws)}
    write_json(cfg.out / "compare.json", report)

    print(f"front sizes: nsga2 {len(ga)}, wsum {len(ws)}")
    print(f"hypervolume  nsga2 {report['hypervolume_ga']:.6f}  wsum {report['hypervolume_ws']:.6f}"
          f"  union {report['hypervolume_union']:.6f}")
    print(f"C(GA, WS) = {report['coverage_ga_ws']:.4f} strict, {report['coverage_ga_ws_tol']:.4f} at 1%")
    print(f"C(WS, GA) = {report['coverage_ws_ga']:.4f} strict, {report['coverage_ws_ga_tol']:.4f} at 1%")
    print("utopia:")
    for name, value in report["utopia"].items():
        print(f"  {name}: {value:.6f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------


def _add_ga_args(p: argparse.ArgumentParser) -> None:
    d = GaConfig()
    p.add_argument("--pop", type=int, default=d.population_size, help="population size (even)")
    p.add_argument("--gens", type=int, default=d.max_generations, help="maximum generations")
    p.add_argument("--pc", type=float, default=d.crossover_rate, help="per-gene SBX probability")
    p.add_argument("--pm", type=float, default=None, help="per-gene mutation probability (default 1/n)")
    p.add_argument("--eta-c", type=float, default=d.sbx_eta, help="SBX distribution index")
    p.add_argument("--eta-m", type=float, default=d.mutation_eta, help="mutation distribution index")
    p.add_argument("--stall", type=int, default=d.stall_generations,
                   help="stop after this many generations without hypervolume gain")
    p.add_argument("--grid", type=int, default=10, help="weight lattice resolution")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for GA evaluation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clscopt",
        description="Closed-loop supply chain network design with NSGA-II and weighted sums.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("--instance", type=Path, required=True)

    p = sub.add_parser("gen-instance", help="write a bundled instance template")
    p.add_argument("--template", choices=TEMPLATES, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("solve", help="compute a Pareto front")
    p.add_argument("--instance", type=Path, required=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", type=Path, default=Path("out"))
    _add_ga_args(p)

    p = sub.add_parser("compare", help="run both methods and compare their fronts")
    p.add_argument("--instance", type=Path, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", type=Path, default=Path("out"))
    _add_ga_args(p)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    ga = GaConfig(
        population_size=args.pop,
        max_generations=args.gens,
        crossover_rate=args.pc,
        mutation_rate=args.pm,
        sbx_eta=args.eta_c,
        mutation_eta=args.eta_m,
        stall_generations=args.stall,
        seed=args.seed,
        n_jobs=args.jobs,
    )
    return RunConfig(
        command=args.command,
        instance=args.instance,
        method=getattr(args, "method", None),
        ga=ga,
        grid=args.grid,
        out=args.out,
        seed=args.seed,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            return cmd_validate(RunConfig("validate", instance=args.instance))
        if args.command == "gen-instance":
            return cmd_gen_instance(args.template, args.seed, args.out)
        try:
            cfg = config_from_args(args)
        except ValueError as exc:
            parser.error(str(exc))
        if args.command == "solve":
            return cmd_solve(cfg)
        return cmd_compare(cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except TractabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTRACTABLE
    except (DecodeError, NoFeasibleConfigurationError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
