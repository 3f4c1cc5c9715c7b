"""Command-line experiment runner.

Subcommands: ``run``, ``sweep-corners``, ``report``, ``validate-config``.
Exit codes: 0 success, 1 data errors (empty output directory, failed run),
2 usage or configuration errors. ``PVTSIZING_OUTPUT`` overrides the output
root from the config file; ``--output`` overrides both.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import run_es
from .config import ALL_METHODS, ConfigError, ExperimentConfig, load_config
from .env.benchmark import Benchmark
from .orchestrator import MultiTaskRun, RunResult, build_summary
from .trace import SCHEMA_VERSION, learning_curve, read_jsonl, write_jsonl

log = logging.getLogger("pvtsizing")

OUTPUT_ENV = "PVTSIZING_OUTPUT"
CURVE_COLUMNS = ("schema", "method", "benchmark", "seed", "sims", "avg_reward", "status")
SWEEP_COLUMNS = ("schema", "corner_count", "median_sims", "pass_rate", "runs")
REPORT_COLUMNS = ("schema", "benchmark", "method", "runs", "passed", "pass_rate", "median_sims", "reduction_vs_worst")
# reduction of the best method over single-task DDPG as published, per circuit
PUBLISHED_REDUCTIONS = (("two-stage OTA", 26), ("strongARM latch", 30), ("folded-cascode OTA", 14))


# -- running ---------------------------------------------------------------

def run_dir(out: Path, method: str, benchmark: str, seed: int) -> Path:
    return out / method / benchmark / f"seed{seed}"


def run_method(benchmark: Benchmark, exp: ExperimentConfig, method: str, seed: int,
               prune_dump: Path | None = None) -> RunResult:
    if method == "es":
        return run_es(benchmark, exp.es, seed, exp.budget)
    return MultiTaskRun(benchmark, method, exp.run_config(seed), prune_dump).run()


def write_run(result: RunResult, benchmark: Benchmark, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    write_jsonl(directory / "trace.jsonl", result.trace.records)
    summary = build_summary(result, benchmark)
    (directory / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def curve_rows(records: Sequence[dict]) -> list[dict]:
    """Learning-curve rows for one trace, closed by a pass/fail row."""
    if not records:
        return []
    head = records[0]
    base = {"schema": SCHEMA_VERSION, "method": head["method"], "benchmark": head["benchmark"], "seed": head["seed"]}
    rows = [dict(base, sims=s, avg_reward=r, status="running") for s, r in learning_curve(records)]
    end = next((r for r in reversed(records) if r["kind"] == "end"), None)
    if end is not None:
        last = rows[-1]["avg_reward"] if rows else ""
        rows.append(dict(base, sims=end["sims"], avg_reward=last, status="passed" if end["passed"] else "failed"))
    return rows


def write_csv(path: Path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: row[k] for k in columns})


def render_svg(rows: Sequence[dict], path: Path) -> None:
    """Optional plot of a learning-curve CSV; needs matplotlib."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    keys = sorted({(r["method"], r["seed"]) for r in rows})
    for method, seed in keys:
        pts = [(r["sims"], r["avg_reward"]) for r in rows
               if r["method"] == method and r["seed"] == seed and r["status"] == "running"]
        if pts:
            xs, ys = zip(*pts)
            ax.plot(xs, ys, lw=0.8, label=f"{method} s{seed}")
    ax.set_xlabel("# simulations")
    ax.set_ylabel("average reward")
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def execute_runs(exp: ExperimentConfig, out: Path, dump_clusters: bool = False,
                 svg: bool = False) -> tuple[list[RunResult], list[str]]:
    benchmark = exp.build_benchmark()
    results, errors, rows = [], [], []
    for seed in exp.seeds:
        directory = run_dir(out, exp.method, benchmark.name, seed)
        dump = directory / "clusters.csv" if dump_clusters and exp.method == "robustanalog" else None
        if dump is not None:
            directory.mkdir(parents=True, exist_ok=True)
        try:
            result = run_method(benchmark, exp, exp.method, seed, dump)
        except Exception as exc:  # keep going; partial outputs stay on disk
            log.error("%s seed %d failed: %s", exp.method, seed, exc)
            errors.append(f"seed {seed}: {exc}")
            continue
        write_run(result, benchmark, directory)
        rows.extend(curve_rows(result.trace.records))
        results.append(result)
        log.info("%s %s seed %d: %s after %d simulations", exp.method, benchmark.name, seed,
                 "passed" if result.passed else f"failed ({result.stop_reason})", result.trace.sims)
    agg = out / exp.method / benchmark.name
    write_csv(agg / "learning_curve.csv", CURVE_COLUMNS, rows)
    if svg and rows:
        render_svg(rows, agg / "learning_curve.svg")
    return results, errors


# -- statistics ------------------------------------------------------------

def median_sims(sims: Sequence[float]) -> float:
    return float(np.median(np.asarray(sims, dtype=np.float64))) if len(sims) else float("nan")


def sweep_corners(exp: ExperimentConfig, out: Path, counts: Sequence[int] | None = None) -> list[dict]:
    """RobustAnalog on nested Monte Carlo corner sets of each size.

    The base benchmark uses bounds over the whole vdd/temperature box so the
    planted witness stays feasible for every sampled set. For seed ``s`` the
    corners come from stream ``corner_seed + s``; a smaller set is a prefix
    of a larger one.
    """
    base = exp.synthetic.build(bounds_over="envelope")
    rows = []
    for count in counts or exp.sweep_counts:
        sims, passes = [], 0
        for seed in exp.seeds:
            corners = exp.synthetic.corner_set(count, exp.synthetic.corner_seed + seed)
            bench = base.with_corners(corners, f"{base.name}-mc{count}")
            result = MultiTaskRun(bench, "robustanalog", exp.run_config(seed)).run()
            write_run(result, bench, run_dir(out, "sweep", bench.name, seed))
            passes += result.passed
            # failed runs count as never finishing
            sims.append(result.trace.sims if result.passed else float("inf"))
            log.info("sweep %d corners seed %d: %s after %d simulations", count, seed,
                     "passed" if result.passed else "failed", result.trace.sims)
        rows.append({"schema": SCHEMA_VERSION, "corner_count": count, "median_sims": median_sims(sims),
                     "pass_rate": passes / len(exp.seeds), "runs": len(exp.seeds)})
    write_csv(out / "sweep" / "sweep.csv", SWEEP_COLUMNS, rows)
    return rows


def collect_traces(root: Path) -> list[dict]:
    """One entry per finished trace under ``root``."""
    found = []
    for path in sorted(root.rglob("trace.jsonl")):
        records = read_jsonl(path)
        end = next((r for r in reversed(records) if r["kind"] == "end"), None)
        if end is None:
            continue
        found.append({"method": end["method"], "benchmark": end["benchmark"], "seed": end["seed"],
                      "passed": bool(end["passed"]), "sims": int(end["sims"])})
    return found


def build_report(runs: Sequence[dict]) -> list[dict]:
    """Per (benchmark, method): pass rate and median simulations.

    A failed run enters the median at the simulations it spent, which
    understates its true cost. The reduction factor is the worst median in
    the same benchmark divided by this row's median.
    """
    groups: dict[tuple[str, str], list[dict]] = {}
    for r in runs:
        groups.setdefault((r["benchmark"], r["method"]), []).append(r)
    rows = []
    for (bench, method), items in sorted(groups.items()):
        passed = sum(r["passed"] for r in items)
        rows.append({"schema": SCHEMA_VERSION, "benchmark": bench, "method": method, "runs": len(items),
                     "passed": passed, "pass_rate": passed / len(items),
                     "median_sims": median_sims([r["sims"] for r in items])})
    for bench in {r["benchmark"] for r in rows}:
        mine = [r for r in rows if r["benchmark"] == bench]
        worst = max(r["median_sims"] for r in mine)
        for r in mine:
            r["reduction_vs_worst"] = worst / r["median_sims"] if r["median_sims"] > 0 else float("nan")
    return rows


def format_report(rows: Sequence[dict]) -> str:
    lines = [f"{'benchmark':<34} {'method':<14} {'runs':>4} {'pass':>6} {'median sims':>12} {'reduction':>10}"]
    for r in rows:
        lines.append(f"{r['benchmark']:<34} {r['method']:<14} {r['runs']:>4} {r['pass_rate']:>6.0%} "
                     f"{r['median_sims']:>12.0f} {r['reduction_vs_worst']:>9.1f}x")
    for bench in sorted({r["benchmark"] for r in rows}):
        mine = {r["method"]: r for r in rows if r["benchmark"] == bench}
        if "ddpg-single" in mine and len(mine) > 1:
            best = min(mine.values(), key=lambda r: (r["median_sims"], r["method"]))
            factor = mine["ddpg-single"]["median_sims"] / best["median_sims"]
            lines.append(f"{bench}: {best['method']} needs {factor:.1f}x fewer simulations than ddpg-single")
    lines.append("published reductions vs single-task DDPG (reference values, not expectations): "
                 + ", ".join(f"{v}x {k}" for k, v in PUBLISHED_REDUCTIONS))
    lines.append("bayesian optimization baseline: not implemented")
    return "\n".join(lines)


# -- commands --------------------------------------------------------------

def _load(args) -> ExperimentConfig:
    exp = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    seeds = tuple(args.seeds) if getattr(args, "seeds", None) else None
    exp = exp.with_overrides(method=getattr(args, "method", None), benchmark=getattr(args, "benchmark", None),
                             seeds=seeds, budget=getattr(args, "budget", None))
    exp.validate()
    return exp


def output_root(exp: ExperimentConfig, flag: str | None) -> Path:
    return Path(flag or os.environ.get(OUTPUT_ENV) or exp.output)


def cmd_run(args) -> int:
    exp = _load(args)
    out = output_root(exp, args.output)
    results, errors = execute_runs(exp, out, dump_clusters=args.dump_clusters, svg=args.svg)
    if errors:
        print(f"{len(errors)} run(s) failed: " + "; ".join(errors), file=sys.stderr)
        return 1
    for r in results:
        print(f"{r.method} seed {r.trace.seed}: {'passed' if r.passed else 'failed'} {r.trace.sims} simulations")
    return 0


def cmd_sweep(args) -> int:
    exp = _load(args)
    if args.counts:
        if any(c < 1 for c in args.counts):
            raise ConfigError(f"--counts: every count must be >= 1, got {args.counts}")
        exp = exp.with_overrides(sweep_counts=tuple(args.counts))
    out = output_root(exp, args.output)
    rows = sweep_corners(exp, out)
    print("corner_count,median_sims,pass_rate")
    for r in rows:
        print(f"{r['corner_count']},{r['median_sims']:g},{r['pass_rate']:g}")
    return 0


def cmd_report(args) -> int:
    root = Path(args.directory)
    if not root.is_dir():
        print(f"not a directory: {root}", file=sys.stderr)
        return 1
    runs = collect_traces(root)
    if not runs:
        print(f"no finished traces under {root}", file=sys.stderr)
        return 1
    rows = build_report(runs)
    print(format_report(rows))
    write_csv(root / "report.csv", REPORT_COLUMNS, rows)
    return 0


def cmd_validate(args) -> int:
    exp = _load(args)
    print(json.dumps(exp.to_dict(), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pvtsizing", description="Variation-aware sizing experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    verbose = argparse.ArgumentParser(add_help=False)
    verbose.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    def common(sp, with_method=True):
        sp.add_argument("--config", help="experiment INI file")
        if with_method:
            sp.add_argument("--method", help=f"one of {', '.join(ALL_METHODS)}")
        sp.add_argument("--benchmark", help="ota2, synthetic or a benchmark file")
        sp.add_argument("--seeds", type=int, nargs="+")
        sp.add_argument("--budget", type=int, help="simulation budget per run")
        sp.add_argument("--output", help=f"output root (overrides ${OUTPUT_ENV} and the config)")

    sp = sub.add_parser("run", parents=[verbose], help="run one method over the configured seeds")
    common(sp)
    sp.add_argument("--svg", action="store_true", help="also render learning_curve.svg (needs matplotlib)")
    sp.add_argument("--dump-clusters", action="store_true", help="write per-run corner cluster CSVs")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep-corners", parents=[verbose], help="scale the Monte Carlo corner count on the synthetic benchmark")
    common(sp, with_method=False)
    sp.add_argument("--counts", type=int, nargs="+")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", parents=[verbose], help="summarize the traces under a directory")
    sp.add_argument("directory")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("validate-config", parents=[verbose], help="check a config file and print it normalized")
    common(sp)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
