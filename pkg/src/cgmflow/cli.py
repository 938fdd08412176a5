"""Command-line front end.

Subcommands: generate (synthetic instances), solve (one instance by any
method), compare (method grids over seeded instances), interpolate (endpoint
histograms to a full sequence), bench (timing sweeps).  Every run writes a
manifest JSON next to its outputs recording arguments, input hashes, outputs,
and timings.  Exit codes: 0 success, 2 usage error, 3 infeasible instance,
4 I/O or format error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baseline import approx_objective, solve_approximate
from .core import (
    CgmInstance,
    ContingencyTables,
    objective,
    objective_fractional,
)
from .dca import AlphaStrategy, DcaConfig, run_dca
from .flow import (
    InfeasibleError,
    build_flow_network,
    build_surrogate_network,
    network_to_dot,
    network_to_json,
    solve_capacity_scaling,
    solve_ssp,
)
from .instances import (
    FormatError,
    GridSpec,
    PotentialKind,
    gen_interpolation,
    gen_synthetic,
    load_instance,
    save_instance,
    save_tables,
    sparsity,
)
from .oracle import BudgetExceededError, brute_force_map

DISPLAY_FLOOR = 1e-2


# ---------------------------------------------------------------------------
# flag parsing helpers


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be at least 1")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be positive")
    return value


def _nonneg_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be nonnegative")
    return value


def _parse_grid(text: str) -> GridSpec:
    match = re.fullmatch(r"(\d+)x(\d+)", text.strip())
    if not match:
        raise argparse.ArgumentTypeError(f"{text!r} is not WIDTHxHEIGHT")
    width, height = int(match.group(1)), int(match.group(2))
    if width < 1 or height < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return GridSpec(width=width, height=height)


def _worker_count(requested: Optional[int]) -> int:
    if requested is not None:
        return requested
    env = os.environ.get("CGM_FLOW_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise FormatError(f"CGM_FLOW_THREADS={env!r} is not an integer")
        if value < 1:
            raise FormatError("CGM_FLOW_THREADS must be at least 1")
        return value
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# manifests


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _args_snapshot(args: argparse.Namespace) -> dict:
    doc = {}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, GridSpec):
            value = f"{value.width}x{value.height}"
        elif isinstance(value, (list, tuple)):
            value = [str(v) if isinstance(v, Path) else v for v in value]
        doc[key] = value
    return doc


@dataclass(frozen=True)
class RunManifest:
    """Provenance record written next to every command's outputs.

    Captures the command, the full flag snapshot (seeds included), content
    hashes of the input files, the outputs written, and wall timings.
    """

    command: str
    args: dict
    inputs: dict
    outputs: list
    timings: dict
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "command": self.command,
            "args": self.args,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timings": self.timings,
        }
        doc.update(self.extra)
        return doc

    def write(self, prefix: Path) -> Path:
        path = Path(f"{prefix}.manifest.json")
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def _write_manifest(
    command: str,
    args: argparse.Namespace,
    prefix: Path,
    inputs: Sequence[Path],
    outputs: Sequence[Path],
    timings: dict,
    extra: Optional[dict] = None,
) -> Path:
    manifest = RunManifest(
        command=command,
        args=_args_snapshot(args),
        inputs={str(p): _sha256(p) for p in inputs},
        outputs=[str(p) for p in outputs],
        timings=timings,
        extra=extra or {},
    )
    return manifest.write(prefix)


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _is_integral(node: np.ndarray, edge: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(
        np.all(np.abs(node - np.rint(node)) <= tol)
        and np.all(np.abs(edge - np.rint(edge)) <= tol)
    )


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    instance = gen_synthetic(
        n_steps=args.n_steps,
        n_states=args.n_states,
        population=args.population,
        kind=PotentialKind(args.potential),
        noise_var=args.noise_var,
        seed=args.seed,
        grid=args.grid,
    )
    save_instance(instance, args.out)
    _write_manifest(
        "generate",
        args,
        args.out,
        inputs=[],
        outputs=[args.out],
        timings={"generate_seconds": time.perf_counter() - t0},
    )
    return 0


# ---------------------------------------------------------------------------
# solve


def _solve_dca(instance: CgmInstance, strategy: str, inner: str,
               max_iters: int, tol: float):
    config = DcaConfig(
        strategy=AlphaStrategy(strategy),
        inner_solver=inner,
        max_iters=max_iters,
        objective_tol=tol,
    )
    tables, report = run_dca(instance, config)
    doc = {
        "method": "dca",
        "objective": objective(instance, tables),
        "trajectory": list(report.objectives),
        "iterations": report.iterations,
        "converged": report.converged,
        "strategy": report.strategy,
        "inner": report.inner_solver,
        "inner_stats": [s.to_dict() for s in report.inner_stats],
    }
    return tables, doc


def _solve_baseline(instance: CgmInstance, tol: float, max_iters: int):
    tables, report = solve_approximate(instance, tol=tol, max_iters=max_iters)
    doc = {
        "method": "baseline",
        # relaxed value the solver minimized, then the genuine objective
        "objective": approx_objective(instance, tables),
        "true_objective": objective_fractional(instance, tables),
        "trajectory": list(report.objectives),
        "duality_gap": report.gap,
        "duality_gap_rel": report.gap_rel,
        "iterations": report.iterations,
        "converged": report.converged,
    }
    return tables, doc


def cmd_solve(args: argparse.Namespace) -> int:
    instance = load_instance(args.input)
    prefix = args.out
    t0 = time.perf_counter()
    if args.method == "dca":
        tables, doc = _solve_dca(
            instance, args.strategy, args.inner, args.max_iters, args.tol
        )
    elif args.method == "baseline":
        tables, doc = _solve_baseline(
            instance, args.baseline_tol, args.baseline_max_iters
        )
    else:
        tables, value = brute_force_map(instance, budget=args.budget)
        doc = {"method": "oracle", "objective": value, "converged": True}
    elapsed = time.perf_counter() - t0

    doc["sparsity"] = sparsity(tables)
    doc["integral"] = _is_integral(np.asarray(tables.node), np.asarray(tables.edge))
    doc["wall_seconds"] = elapsed

    tables_path = Path(f"{prefix}.tables.json")
    report_path = Path(f"{prefix}.report.json")
    save_tables(tables, tables_path)
    _write_json(report_path, doc)
    outputs = [tables_path, report_path]

    if args.dump_network is not None:
        network = build_flow_network(instance)
        json_path = Path(f"{args.dump_network}.json")
        dot_path = Path(f"{args.dump_network}.dot")
        _write_json(json_path, network_to_json(network))
        dot_path.write_text(network_to_dot(network))
        outputs.extend([json_path, dot_path])

    _write_manifest(
        "solve",
        args,
        prefix,
        inputs=[args.input],
        outputs=outputs,
        timings={"solve_seconds": elapsed},
    )
    return 0


# ---------------------------------------------------------------------------
# compare

COMPARE_METHODS = ("dca-L", "dca-M", "dca-R", "baseline")


def _compare_one(job: tuple) -> dict:
    """Solve one seeded instance with every compared method.

    Runs inside worker processes; must stay importable at module top level
    and take/return plain picklable data.
    """
    n_states, population, potential, n_steps, noise_var, seed, inner = job
    out = {
        "n_states": n_states,
        "population": population,
        "potential": potential,
        "seed": seed,
        "rows": [],
    }
    try:
        instance = gen_synthetic(
            n_steps=n_steps,
            n_states=n_states,
            population=population,
            kind=PotentialKind(potential),
            noise_var=noise_var,
            seed=seed,
        )
        for method in COMPARE_METHODS:
            t0 = time.perf_counter()
            if method == "baseline":
                tables, report = solve_approximate(instance)
                true_obj = objective_fractional(instance, tables)
                converged, iterations = report.converged, report.iterations
            else:
                config = DcaConfig(
                    strategy=AlphaStrategy(method.split("-")[1]),
                    inner_solver=inner,
                )
                tables, report = run_dca(instance, config)
                true_obj = objective(instance, tables)
                converged, iterations = report.converged, report.iterations
            out["rows"].append(
                {
                    "method": method,
                    "objective": true_obj,
                    "sparsity": sparsity(tables),
                    "seconds": time.perf_counter() - t0,
                    "converged": converged,
                    "iterations": iterations,
                }
            )
    except Exception as exc:  # noqa: BLE001 - workers must not crash the pool
        out["error"] = f"{type(exc).__name__}: {exc}"
    return out


def cmd_compare(args: argparse.Namespace) -> int:
    cells = [
        (R, M, pot)
        for pot in args.potentials
        for R in args.n_states
        for M in args.populations
    ]
    jobs = []
    for cell_index, (R, M, pot) in enumerate(cells):
        for k in range(args.instances):
            seed = args.seed + 1009 * cell_index + k
            jobs.append((R, M, pot, args.n_steps, args.noise_var, seed, args.inner))

    workers = _worker_count(args.workers)
    t0 = time.perf_counter()
    if workers <= 1 or len(jobs) <= 1:
        results = [_compare_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_compare_one, jobs))
    elapsed = time.perf_counter() - t0

    by_cell: dict = {cell: [] for cell in cells}
    failures = []
    for result in results:
        cell = (result["n_states"], result["population"], result["potential"])
        if "error" in result:
            failures.append(
                {"cell": list(cell), "seed": result["seed"], "error": result["error"]}
            )
        else:
            by_cell[cell].append(result)

    detail_path = Path(f"{args.out}.instances.csv")
    with detail_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "potential",
                "n_states",
                "population",
                "seed",
                "method",
                "objective",
                "sparsity",
                "seconds",
                "converged",
                "iterations",
            ]
        )
        for result in results:
            if "error" in result:
                continue
            for row in result["rows"]:
                writer.writerow(
                    [
                        result["potential"],
                        result["n_states"],
                        result["population"],
                        result["seed"],
                        row["method"],
                        f"{row['objective']:.12g}",
                        f"{row['sparsity']:.6f}",
                        f"{row['seconds']:.6f}",
                        int(row["converged"]),
                        row["iterations"],
                    ]
                )

    summary_path = Path(f"{args.out}.summary.csv")
    with summary_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        header = ["potential", "n_states", "population", "instances"]
        for method in COMPARE_METHODS:
            tag = method.replace("-", "_")
            header += [
                f"mean_objective_{tag}",
                f"mean_sparsity_{tag}",
                f"mean_seconds_{tag}",
            ]
        writer.writerow(header)
        for cell in cells:
            R, M, pot = cell
            done = by_cell[cell]
            # a failed instance aborts the whole cell
            if not done or any(f["cell"] == [R, M, pot] for f in failures):
                continue
            row = [pot, R, M, len(done)]
            for method in COMPARE_METHODS:
                picks = [
                    r for result in done for r in result["rows"] if r["method"] == method
                ]
                row += [
                    f"{np.mean([p['objective'] for p in picks]):.12g}",
                    f"{np.mean([p['sparsity'] for p in picks]):.6f}",
                    f"{np.mean([p['seconds'] for p in picks]):.6f}",
                ]
            writer.writerow(row)

    _write_manifest(
        "compare",
        args,
        args.out,
        inputs=[],
        outputs=[summary_path, detail_path],
        timings={"compare_seconds": elapsed},
        extra={"failed": failures, "workers": workers},
    )
    return 0


# ---------------------------------------------------------------------------
# interpolate


def _read_histogram(path: Path, n_cells: int) -> list[int]:
    tokens = [tok for tok in re.split(r"[\s,]+", Path(path).read_text().strip()) if tok]
    values = []
    for tok in tokens:
        try:
            values.append(int(tok))
        except ValueError:
            raise FormatError(f"{path}: {tok!r} is not an integer count")
    if len(values) != n_cells:
        raise FormatError(f"{path}: expected {n_cells} counts, found {len(values)}")
    return values


def _write_histograms(path: Path, node: np.ndarray, floor: Optional[float]) -> None:
    lines = ["t,i,value"]
    for t in range(node.shape[0]):
        for i in range(node.shape[1]):
            value = node[t, i]
            if floor is not None and value < floor:
                value = 0
            lines.append(f"{t + 1},{i + 1},{value:.12g}")
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_interpolate(args: argparse.Namespace) -> int:
    first = _read_histogram(args.first, args.grid.n_cells)
    last = _read_histogram(args.last, args.grid.n_cells)
    try:
        instance = gen_interpolation(
            args.grid,
            first,
            last,
            n_steps=args.n_steps,
            noise_precision=args.noise_precision,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    t0 = time.perf_counter()
    if args.method == "dca":
        tables, doc = _solve_dca(instance, args.strategy, args.inner, 1000, 1e-9)
    else:
        tables, doc = _solve_baseline(instance, 1e-6, 500)
    elapsed = time.perf_counter() - t0
    doc["sparsity"] = sparsity(tables)
    doc["integral"] = _is_integral(np.asarray(tables.node), np.asarray(tables.edge))
    doc["wall_seconds"] = elapsed

    node = np.asarray(tables.node, dtype=float)
    raw_path = Path(f"{args.out}.raw.csv")
    display_path = Path(f"{args.out}.display.csv")
    report_path = Path(f"{args.out}.report.json")
    _write_histograms(raw_path, node, floor=None)
    _write_histograms(display_path, node, floor=DISPLAY_FLOOR)
    _write_json(report_path, doc)

    _write_manifest(
        "interpolate",
        args,
        args.out,
        inputs=[args.first, args.last],
        outputs=[raw_path, display_path, report_path],
        timings={"interpolate_seconds": elapsed},
    )
    return 0


# ---------------------------------------------------------------------------
# bench


def _time_inner(instance: CgmInstance, solver) -> float:
    zeros = ContingencyTables.zeros(instance.n_steps, instance.n_states)
    network = build_surrogate_network(instance, zeros, AlphaStrategy.L)
    t0 = time.perf_counter()
    solver(network)
    return time.perf_counter() - t0


def _bench_point(instance: CgmInstance, method: str) -> float:
    if method == "ssp":
        return _time_inner(instance, solve_ssp)
    if method == "cs":
        return _time_inner(instance, solve_capacity_scaling)
    t0 = time.perf_counter()
    if method == "dca":
        run_dca(instance)
    else:
        solve_approximate(instance)
    return time.perf_counter() - t0


def cmd_bench(args: argparse.Namespace) -> int:
    sweeps = []
    if args.populations:
        sweeps.append(("population", args.populations))
    if args.states_sweep:
        sweeps.append(("n_states", args.states_sweep))
    if not sweeps:
        print("error: nothing to sweep (use --populations or --states-sweep)",
              file=sys.stderr)
        return 2

    out_path = Path(f"{args.out}.csv")
    t0 = time.perf_counter()
    point_index = 0
    with out_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["sweep", "n_steps", "n_states", "population",
             "method", "repeat", "seconds", "censored"]
        )
        for sweep, values in sweeps:
            for value in values:
                R = args.n_states if sweep == "population" else value
                M = value if sweep == "population" else args.population
                instance = gen_synthetic(
                    n_steps=args.n_steps,
                    n_states=R,
                    population=M,
                    kind=PotentialKind(args.potential),
                    noise_var=args.noise_var,
                    seed=args.seed + point_index,
                )
                point_index += 1
                for method in args.methods:
                    for repeat in range(args.repeats):
                        seconds = _bench_point(instance, method)
                        censored = (
                            args.timeout_sec is not None
                            and seconds > args.timeout_sec
                        )
                        writer.writerow(
                            [sweep, args.n_steps, R, M, method, repeat,
                             f"{seconds:.6f}", int(censored)]
                        )
                        # point exceeded the budget: skip remaining repeats
                        if censored:
                            break

    _write_manifest(
        "bench",
        args,
        args.out,
        inputs=[],
        outputs=[out_path],
        timings={"bench_seconds": time.perf_counter() - t0},
    )
    return 0


# ---------------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgmflow",
        description="MAP inference for aggregate count models on path graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    kinds = [k.value for k in PotentialKind]

    gen = sub.add_parser("generate", help="write a synthetic instance JSON")
    gen.add_argument("--n-steps", type=_positive_int, default=5)
    gen.add_argument("--n-states", type=_positive_int, required=True)
    gen.add_argument("--population", type=_positive_int, required=True)
    gen.add_argument("--potential", choices=kinds, default="uniform")
    gen.add_argument("--noise-var", type=_positive_float, default=50.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--grid", type=_parse_grid, default=None,
                     help="WIDTHxHEIGHT cell layout for grid potentials")
    gen.add_argument("--out", type=Path, required=True)
    gen.set_defaults(func=cmd_generate)

    solve = sub.add_parser("solve", help="solve one instance, write tables + report")
    solve.add_argument("--in", dest="input", type=Path, required=True)
    solve.add_argument("--out", type=Path, required=True,
                       help="output prefix: writes <out>.tables.json, <out>.report.json")
    solve.add_argument("--method", choices=["dca", "baseline", "oracle"], default="dca")
    solve.add_argument("--strategy", choices=["L", "M", "R"], default="L")
    solve.add_argument("--inner", choices=["ssp", "cs"], default="ssp")
    solve.add_argument("--max-iters", type=_positive_int, default=1000)
    solve.add_argument("--tol", type=_nonneg_float, default=1e-9)
    solve.add_argument("--baseline-tol", type=_positive_float, default=1e-6)
    solve.add_argument("--baseline-max-iters", type=_positive_int, default=500)
    solve.add_argument("--budget", type=_positive_int, default=10_000_000,
                       help="oracle enumeration budget")
    solve.add_argument("--dump-network", type=Path, default=None,
                       help="also dump the flow network as <prefix>.json/.dot")
    solve.set_defaults(func=cmd_solve)

    comp = sub.add_parser("compare", help="method comparison grid, CSV output")
    comp.add_argument("--n-states", type=_positive_int, nargs="+", required=True)
    comp.add_argument("--populations", type=_positive_int, nargs="+", required=True)
    comp.add_argument("--potentials", nargs="+", choices=kinds,
                      default=["uniform", "distance"])
    comp.add_argument("--instances", type=_positive_int, default=10)
    comp.add_argument("--n-steps", type=_positive_int, default=5)
    comp.add_argument("--noise-var", type=_positive_float, default=50.0)
    comp.add_argument("--inner", choices=["ssp", "cs"], default="ssp")
    comp.add_argument("--seed", type=int, default=0)
    comp.add_argument("--workers", type=_positive_int, default=None,
                      help="worker processes (default: CGM_FLOW_THREADS or all cores)")
    comp.add_argument("--out", type=Path, required=True,
                      help="output prefix: <out>.summary.csv, <out>.instances.csv")
    comp.set_defaults(func=cmd_compare)

    interp = sub.add_parser("interpolate",
                            help="interpolate endpoint histograms on a grid")
    interp.add_argument("--grid", type=_parse_grid, required=True)
    interp.add_argument("--first", type=Path, required=True,
                        help="CSV/text file with the first-layer counts")
    interp.add_argument("--last", type=Path, required=True)
    interp.add_argument("--n-steps", type=_positive_int, default=6)
    interp.add_argument("--noise-precision", type=_positive_float, default=5.0)
    interp.add_argument("--method", choices=["dca", "baseline"], default="dca")
    interp.add_argument("--strategy", choices=["L", "M", "R"], default="L")
    interp.add_argument("--inner", choices=["ssp", "cs"], default="ssp")
    interp.add_argument("--out", type=Path, required=True,
                        help="output prefix: <out>.raw.csv, <out>.display.csv")
    interp.set_defaults(func=cmd_interpolate)

    bench = sub.add_parser("bench", help="timing sweeps, CSV output")
    bench.add_argument("--populations", type=_positive_int, nargs="*", default=[],
                       help="population sweep at fixed --n-states")
    bench.add_argument("--states-sweep", type=_positive_int, nargs="*", default=[],
                       help="state-count sweep at fixed --population")
    bench.add_argument("--n-states", type=_positive_int, default=10)
    bench.add_argument("--population", type=_positive_int, default=100)
    bench.add_argument("--n-steps", type=_positive_int, default=5)
    bench.add_argument("--potential", choices=kinds, default="uniform")
    bench.add_argument("--noise-var", type=_positive_float, default=50.0)
    bench.add_argument("--methods", nargs="+",
                       choices=["ssp", "cs", "dca", "baseline"],
                       default=["ssp", "cs"])
    bench.add_argument("--repeats", type=_positive_int, default=3)
    bench.add_argument("--timeout-sec", type=_positive_float, default=None)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", type=Path, required=True)
    bench.set_defaults(func=cmd_bench)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"error: infeasible instance: {exc}", file=sys.stderr)
        return 3
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
