"""Command-line front end.

Every subcommand reads one JSON config (``--config``; built-in defaults when
omitted), runs a pipeline and writes CSV/JSON files, plus SVG plots unless
``--no-plot`` is given, into the output directory.  Files are written to a
temporary name and renamed into place.  External units are pJ, mm², Gop/s
and W.

Exit codes: 0 success, 2 config error, 3 infeasible, 4 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plotting
from .config import PROFILE_ENV, RunConfig, load_config, validate
from .design_space import (
    DESIGN_CSV_HEADER,
    convex_frontier,
    designs_to_csv,
    generate_design_space,
    pareto_filter,
)
from .energy_model import (
    PRECISION_BITS,
    effective_ops_per_joule,
    op_energy,
    source_energy,
)
from .errors import ConfigError, InfeasibleError, NonOperationalVoltageError, StructuralError
from .memory_hierarchy import (
    dram_dominance_crossover,
    memory_frontier_to_csv,
    memory_pareto,
    memory_point_to_dict,
    optimal_level_count,
)
from .optimizer import codesign, max_throughput, system_curve_to_csv, throughput_contour
from .workloads import (
    BlockingPlan,
    GemmProblem,
    arithmetic_intensity,
    gemm_naive_traffic,
    gemm_traffic,
)

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4

FRONTIER_DESIGN_CSV_HEADER = DESIGN_CSV_HEADER + ("on_hull",)
CONTOUR_CSV_HEADER = ("area_mm2", "power_w", "throughput_gops")
EFFOPS_CSV_HEADER = ("precision", "kind", "source", "energy_pj_per_op", "gops_per_j")
DEFAULT_GEMM_CAPACITIES = (64, 32768)

#: output file -> schema it must satisfy
JSON_SCHEMAS = {
    "optimize.json": "optimize",
    "hierarchy.json": "hierarchy",
    "gemm.json": "gemm",
    "codesign.json": "codesign",
    "effops.json": "effops",
    "profile.json": "profile",
}


class InvariantError(Exception):
    """An output failed its own consistency checks."""


# -- output helpers -----------------------------------------------------------

def dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def check_outputs(files: dict) -> None:
    for name, text in files.items():
        if name in JSON_SCHEMAS:
            try:
                validate(json.loads(text), JSON_SCHEMAS[name])
            except ConfigError as exc:
                raise InvariantError(f"{name} does not match its schema: {exc}") from None


# -- pipelines ----------------------------------------------------------------

def compute_frontier(cfg: RunConfig):
    designs = generate_design_space(cfg.compute, cfg.profile)
    curve = pareto_filter(designs)
    return designs, curve, convex_frontier(curve)


def memory_frontier(cfg: RunConfig, return_all=False):
    return memory_pareto(cfg.workload, cfg.throughput, cfg.profile, cfg.grids,
                         return_all=return_all)


def cmd_pareto(cfg: RunConfig) -> dict:
    designs, curve, hull = compute_frontier(cfg)
    on_hull = {p.meta for p in hull.vertices}
    rows = []
    for p in curve:
        m = p.meta
        rows.append([f"{p.energy_per_op * 1e12:.6g}", f"{p.area_per_throughput * 1e9:.6g}",
                     m.depth, f"{m.voltage:.6g}", f"{m.sizing:.6g}", m.label,
                     int(m in on_hull)])
    files = {"designs.csv": designs_to_csv(designs),
             "frontier.csv": csv_text(FRONTIER_DESIGN_CSV_HEADER, rows)}
    if cfg.plot:
        files["frontier.svg"] = plotting.scatter_with_frontier(
            ([p.area_per_throughput * 1e9 for p in designs], [p.energy_per_op * 1e12 for p in designs]),
            (curve.xs * 1e9, curve.energies * 1e12),
            "area per throughput (mm²/(Gop/s))", "energy (pJ/op)",
            f"{cfg.compute.label} design space", hull=(hull.xs * 1e9, hull.energies * 1e12),
            logx=True)
    return files


def cmd_optimize(cfg: RunConfig) -> dict:
    _, curve, _ = compute_frontier(cfg)
    result = max_throughput(curve, cfg.constraints, cfg.mode)
    c = cfg.constraints
    doc = result.to_dict()
    doc["constraints"] = {"area_mm2": c.area_max, "power_w": c.power_max,
                          "density_w_per_cm2": c.density_max}
    doc["frontier_size"] = len(curve)
    if result.area > c.area_max * (1 + 1e-9) or result.power > c.power_max * (1 + 1e-9):
        raise InvariantError("optimizer result exceeds its budgets")
    grid = throughput_contour(curve, cfg.contour_areas, cfg.contour_powers)
    rows = [[f"{a:.6g}", f"{p:.6g}", f"{grid[i, j] / 1e9:.6g}"]
            for i, a in enumerate(cfg.contour_areas) for j, p in enumerate(cfg.contour_powers)]
    files = {"optimize.json": dump_json(doc), "contour.csv": csv_text(CONTOUR_CSV_HEADER, rows)}
    if cfg.plot:
        files["optimize.svg"] = plotting.grouped_lines(
            {f"{p:g} W": (list(cfg.contour_areas), list(grid[:, j] / 1e9))
             for j, p in enumerate(cfg.contour_powers)},
            "area budget (mm²)", "throughput (Gop/s)", "achievable throughput")
    return files


def _workload_doc(cfg: RunConfig) -> dict:
    wl = cfg.workload
    if isinstance(wl, GemmProblem):
        return {"gemm": {"n": wl.n, "precision": wl.precision}}
    return {"miss_curve": {"points": [list(p) for p in wl.points], "precision": wl.precision}}


def cmd_hierarchy(cfg: RunConfig) -> dict:
    frontier, cloud = memory_frontier(cfg, return_all=True)
    trend = optimal_level_count(frontier)
    doc = {"throughput_gops": cfg.throughput / 1e9,
           "workload": _workload_doc(cfg),
           "configs_evaluated": len(cloud),
           "frontier": [memory_point_to_dict(p) for p in frontier],
           "level_trend": {"spearman": trend.spearman, "non_decreasing": trend.non_decreasing,
                           "ranges": [{"area_lo_mm2": lo, "area_hi_mm2": hi, "levels": lv}
                                      for lo, hi, lv in trend.ranges()]}}
    files = {"hierarchy_frontier.csv": memory_frontier_to_csv(frontier),
             "hierarchy.json": dump_json(doc)}
    if cfg.plot:
        groups = {}
        for p in frontier:
            xs, ys = groups.setdefault(f"{p.config.n_levels} levels", ([], []))
            xs.append(p.area)
            ys.append(p.energy_per_op * 1e12)
        files["hierarchy.svg"] = plotting.grouped_lines(
            groups, "memory area (mm²)", "memory energy (pJ/op)", "memory hierarchy frontier")
    return files


def cmd_gemm(cfg: RunConfig) -> dict:
    wl = cfg.workload
    if not isinstance(wl, GemmProblem):
        raise ConfigError("the gemm subcommand needs a gemm workload")
    if cfg.gemm_blocks:
        plan = BlockingPlan(cfg.gemm_blocks, tuple(3 * b * b for b in cfg.gemm_blocks))
    else:
        plan = BlockingPlan.from_capacities(cfg.gemm_capacities or DEFAULT_GEMM_CAPACITIES)
    compulsory = cfg.grids.compulsory_per_level
    traffic = gemm_traffic(wl, plan, compulsory)
    naive = gemm_naive_traffic(wl)
    ops = traffic.total_ops
    levels = [{"level": f"L{i}", "capacity_words": cap, "block": b, "accesses": acc,
               "accesses_per_op": acc / ops}
              for i, (cap, b, acc) in enumerate(zip(plan.capacities, plan.blocks,
                                                    traffic.level_accesses))]
    levels.append({"level": "DRAM", "capacity_words": None, "block": None,
                   "accesses": traffic.dram_accesses, "accesses_per_op": traffic.dram_accesses / ops})
    ai, ai_naive = arithmetic_intensity(traffic), arithmetic_intensity(naive)
    doc = {"n": wl.n, "precision": wl.precision, "total_ops": ops,
           "compulsory_per_level": compulsory, "blocks": list(plan.blocks), "levels": levels,
           "dram_accesses": traffic.dram_accesses, "naive_dram_accesses": naive.dram_accesses,
           "arithmetic_intensity": ai, "naive_arithmetic_intensity": ai_naive,
           "intensity_ratio": ai / ai_naive}
    return {"gemm_traffic.csv": traffic.to_csv(), "gemm.json": dump_json(doc)}


def middle_third(values):
    """Values at ranks [n/3, 2n/3) of a sequence already ordered by area."""
    n = len(values)
    lo, hi = n // 3, max(2 * n // 3, n // 3 + 1)
    return list(values[lo:hi])


def cmd_codesign(cfg: RunConfig) -> dict:
    mem = memory_frontier(cfg)
    _, _, hull = compute_frontier(cfg)
    result = codesign(mem, hull, cfg.throughput)
    curve = result.curve
    frontier = [{"total_area_mm2": p.total_area, "total_energy_pj_per_op": p.energy_per_op * 1e12,
                 "mem_area_mm2": p.memory.area, "compute_area_mm2": p.compute_area,
                 "memory_energy_pj_per_op": p.memory_energy * 1e12,
                 "compute_energy_pj_per_op": p.compute_energy * 1e12,
                 "compute_share": p.compute_share, "memory_share": p.memory_share,
                 "capacities_words": list(p.memory.config.capacities),
                 "compute_design": p.compute.meta.label}
                for p in curve]
    for row in frontier:
        if not math.isclose(row["compute_share"] + row["memory_share"], 1.0, rel_tol=1e-9):
            raise InvariantError("energy shares do not sum to one")
    shares = middle_third([p.compute_share for p in curve])
    doc = {"throughput_gops": cfg.throughput / 1e9, "frontier": frontier,
           "matched": [{"mem_area_mm2": m.area, "capacities_words": list(m.config.capacities),
                        "compute_design": cp.meta.label} for m, cp in result.matched],
           "middle_third_compute_share": {"min": min(shares), "max": max(shares),
                                          "mean": float(np.mean(shares))}}
    files = {"system_frontier.csv": system_curve_to_csv(curve), "codesign.json": dump_json(doc)}
    if cfg.plot:
        files["codesign.svg"] = plotting.grouped_lines(
            {"system": ([p.total_area for p in curve], [p.energy_per_op * 1e12 for p in curve]),
             "memory part": ([p.total_area for p in curve], [p.memory_energy * 1e12 for p in curve]),
             "compute part": ([p.total_area for p in curve], [p.compute_energy * 1e12 for p in curve])},
            "total area (mm²)", "energy (pJ/op)", "memory + compute co-design")
    return files


EFFOPS_SOURCES = (("RF", "rf"), ("4K SRAM", 4096), ("32K SRAM", 32768), ("DRAM", "dram"))


def cmd_effops(cfg: RunConfig) -> dict:
    p = cfg.profile
    rows, table = [], {}
    for prec in sorted(PRECISION_BITS):
        for kind in ("add", "multiply"):
            for name, src in EFFOPS_SOURCES:
                opj = effective_ops_per_joule(p, kind, prec, src)
                table[(prec, kind, name)] = opj
                rows.append({"precision": prec, "kind": kind, "source": name,
                             "energy_pj_per_op": 1e12 / opj, "gops_per_j": opj / 1e9})
    ratios = {}
    for prec in sorted(PRECISION_BITS):
        ratios[f"{prec}_multiply_rf_over_4k_ops"] = (table[(prec, "multiply", "RF")]
                                                     / table[(prec, "multiply", "4K SRAM")])
        ratios[f"{prec}_multiply_rf_over_dram_ops"] = (table[(prec, "multiply", "RF")]
                                                       / table[(prec, "multiply", "DRAM")])
        ratios[f"{prec}_4k_sram_over_multiply_energy"] = (source_energy(p, prec, 4096)
                                                          / op_energy(p, "multiply", prec))
    doc = {"rows": rows, "ratios": ratios,
           "dram_crossover_miss_ratio": dram_dominance_crossover(p, "int16")}
    csv_rows = [[r["precision"], r["kind"], r["source"], f"{r['energy_pj_per_op']:.6g}",
                 f"{r['gops_per_j']:.6g}"] for r in rows]
    files = {"effops.csv": csv_text(EFFOPS_CSV_HEADER, csv_rows), "effops.json": dump_json(doc)}
    if cfg.plot:
        labels = [name for name, _ in EFFOPS_SOURCES]
        series = {f"{prec} {kind}": [table[(prec, kind, n)] / 1e9 for n in labels]
                  for prec in sorted(PRECISION_BITS) for kind in ("add", "multiply")}
        files["effops.svg"] = plotting.bars(labels, series, "effective Gop/J",
                                            "ops per joule by operand source")
    return files


def cmd_dump_profile(cfg: RunConfig) -> dict:
    return {"profile.json": cfg.profile.to_json()}


COMMANDS = {
    "pareto": (cmd_pareto, "compute design space, Pareto frontier and convex hull"),
    "optimize": (cmd_optimize, "maximum throughput under area/power/density budgets"),
    "hierarchy": (cmd_hierarchy, "memory hierarchy enumeration and frontier"),
    "gemm": (cmd_gemm, "blocked GEMM traffic per memory level"),
    "codesign": (cmd_codesign, "joint memory + compute frontier"),
    "effops": (cmd_effops, "effective ops/J by operand source"),
    "dump-profile": (cmd_dump_profile, "write the technology profile as JSON"),
}


# -- argument handling --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS lets the flags appear before or after the subcommand
    common.add_argument("--config", default=argparse.SUPPRESS, help="run config JSON")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--no-plot", action="store_true", default=argparse.SUPPRESS,
                        help="skip SVG output")
    common.add_argument("--mode", choices=("discrete", "mixed"), default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="seed for sampled enumeration")
    parser = argparse.ArgumentParser(
        prog="darkmem", parents=[common],
        description="Energy/area design-space exploration for power-limited chips.",
        epilog=f"The {PROFILE_ENV} environment variable overrides the profile path.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "gemm":
            sp.add_argument("--n", type=int, help="matrix dimension")
            sp.add_argument("--block", type=int, action="append",
                            help="block size per level, innermost first (repeatable)")
            sp.add_argument("--precision", choices=sorted(PRECISION_BITS))
    return parser


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if "out" in args:
        cfg = replace(cfg, output_dir=Path(args.out))
    if getattr(args, "no_plot", False):
        cfg = replace(cfg, plot=False)
    if "mode" in args:
        cfg = replace(cfg, mode=args.mode)
    if "seed" in args:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = replace(cfg, seed=args.seed, grids=replace(cfg.grids, seed=args.seed))
    if args.command == "gemm":
        wl = cfg.workload
        if args.n is not None or args.precision is not None:
            base = wl if isinstance(wl, GemmProblem) else GemmProblem(4096)
            try:
                wl = GemmProblem(args.n if args.n is not None else base.n,
                                 args.precision or base.precision)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            cfg = replace(cfg, workload=wl)
        if args.block:
            cfg = replace(cfg, gemm_blocks=tuple(args.block), gemm_capacities=())
    return cfg


def run(argv=None, env=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    env = os.environ if env is None else env
    try:
        cfg = apply_overrides(load_config(getattr(args, "config", None), env), args)
        func = COMMANDS[args.command][0]
        files = func(cfg)
        check_outputs(files)
    except (ConfigError, NonOperationalVoltageError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc.reason}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InvariantError, StructuralError, AssertionError) as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as exc:
        # model-level argument errors trace back to config values
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name in sorted(files):
        write_atomic(cfg.output_dir / name, files[name])
        print(cfg.output_dir / name)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
