"""Benchmark harness and command line entry point.

Every (instance, seed) pair runs plain ACO first, then the requested
algorithms, so each row's Ratio compares against the ACO time measured for
the same instance and seed on the same machine.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .aco import AcoParams, run_aco
from .clustering import ClusterConfig
from .instance_io import (EdgeWeightType, Instance, SeedSet, TsplibError, bundled_instance_names,
                          bundled_optima, bundled_seeds, load_instance, load_optima, load_seeds)
from .pipeline import Algorithm, PipelineError, SolverConfig, format_tour, solve

log = logging.getLogger(__name__)

PHASES = ("clustering", "ordering", "bridging", "class_solve", "stitching", "repair")

CSV_COLUMNS = (
    "instance", "n", "algorithm", "seed", "status", "length", "optimum", "error", "ratio",
    "time_total", *(f"time_{p}" for p in PHASES), "classes", "contended", "auto_added",
    "notes", "params",
)


def compute_error(solution: float, optimum: float | None) -> float | None:
    """Relative gap to the optimum; ``None`` when no optimum is known."""
    if optimum is None:
        return None
    if optimum <= 0:
        raise ValueError("optimum must be positive")
    return (solution - optimum) / optimum


def compute_ratio(time_aco: float, time_algorithm: float) -> float:
    if time_aco <= 0 or time_algorithm <= 0:
        raise ValueError(f"timings must be positive, got {time_aco} and {time_algorithm}")
    return time_aco / time_algorithm


@dataclass
class RunRecord:
    instance: str
    n: int
    algorithm: str
    seed: int
    status: str = "ok"
    length: float | None = None
    optimum: float | None = None
    error: float | None = None
    ratio: float | None = None
    timings: dict = field(default_factory=dict)
    classes: int | None = None
    contended: bool = False
    auto_added: bool = False
    notes: str = ""
    params: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def as_row(self) -> dict:
        row = {
            "instance": self.instance, "n": self.n, "algorithm": self.algorithm, "seed": self.seed,
            "status": self.status, "length": self.length, "optimum": self.optimum,
            "error": self.error, "ratio": self.ratio, "time_total": self.timings.get("total"),
            "classes": self.classes, "contended": int(self.contended),
            "auto_added": int(self.auto_added), "notes": self.notes,
            "params": json.dumps(self.params, sort_keys=True),
        }
        for p in PHASES:
            row[f"time_{p}"] = self.timings.get(p)
        return {k: ("" if v is None else v) for k, v in row.items()}


@dataclass(frozen=True)
class BatchConfig:
    solver: SolverConfig = SolverConfig()
    optima: dict | None = None          # None -> bundled table
    seed_sets: dict | None = None       # instance name -> SeedSet; None -> bundled seeds
    use_seed_sets: bool = True
    jobs: int = 1


@dataclass
class BatchResult:
    records: list[RunRecord]
    summary: list[dict]
    notes: list[str]

    @property
    def failed(self) -> int:
        return sum(not r.ok for r in self.records)


def params_snapshot(config: SolverConfig) -> dict:
    return {"aco": asdict(config.aco), "cluster": asdict(config.cluster),
            "uncross_passes": config.uncross_passes, "uncross_per_class": config.uncross_per_class}


def warmup() -> None:
    """Compile the jitted kernels before anything is timed."""
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 100, (6, 2))
    inst = Instance("warmup", pts)
    d = inst.distance_matrix()
    run_aco(d, AcoParams(t_max=2), rng=rng)
    run_aco(d, AcoParams(t_max=2), forced_edge=(0, 1), rng=rng)
    from .aco import build_windows
    run_aco(d, AcoParams(t_max=2), windows=build_windows(d, 3), forced_edge=(0, 1), rng=rng)
    from .pipeline import remove_cross_edges, Tour
    remove_cross_edges(Tour(np.arange(6), 0.0), pts)


def run_one(instance: Instance, algorithm: Algorithm, seed: int, config: SolverConfig,
            seeds: SeedSet | None, optimum: float | None) -> RunRecord:
    aco = replace(config.aco, seed=seed)
    cfg = replace(config, aco=aco, cluster=replace(config.cluster, seed=seed))
    rec = RunRecord(instance.name, instance.n, algorithm.value, seed, optimum=optimum,
                    params=params_snapshot(cfg))
    try:
        res = solve(instance, algorithm, cfg, None if algorithm is Algorithm.ACO else seeds)
    except PipelineError as exc:
        rec.status = "failed"
        rec.notes = str(exc)
        log.error("%s %s seed %d failed: %s", instance.name, algorithm.value, seed, exc)
        return rec
    rec.length = float(res.tour.length)
    rec.timings = dict(res.timings)
    rec.classes = len(res.classes) if res.classes else None
    rec.notes = "; ".join(res.notes)
    rec.error = compute_error(rec.length, optimum)
    if optimum is None:
        rec.notes = "; ".join(filter(None, [rec.notes, "no optimum known"]))
    elif rec.error < -1e-9:
        rec.notes = "; ".join(filter(None, [rec.notes, "below recorded optimum, table may be stale"]))
    return rec


def _run_unit(args) -> list[RunRecord]:
    instance, algorithms, seed, config, seeds, optimum, auto, contended = args
    if contended:
        warmup()
    out = []
    for a in algorithms:
        rec = run_one(instance, a, seed, config, seeds, optimum)
        rec.auto_added = auto and a is Algorithm.ACO
        rec.contended = contended
        out.append(rec)
    base = out[0]
    for rec in out:
        if base.ok and rec.ok:
            rec.ratio = compute_ratio(base.timings["total"], rec.timings["total"])
    return out


def _median(xs: list[float]) -> float | None:
    return statistics.median(xs) if xs else None


def summarize(records: Iterable[RunRecord | dict]) -> list[dict]:
    """Min/median/max of Error and Ratio per (instance, algorithm), in first-seen order."""
    groups: dict[tuple, list] = {}
    for r in records:
        row = r.as_row() if isinstance(r, RunRecord) else r
        groups.setdefault((row["instance"], row["algorithm"]), []).append(row)
    out = []
    for (inst, alg), rows in groups.items():
        ok = [r for r in rows if r["status"] == "ok"]
        entry = {"instance": inst, "algorithm": alg, "runs": len(rows), "failed": len(rows) - len(ok)}
        for key in ("error", "ratio", "length"):
            vals = [float(r[key]) for r in ok if r[key] not in ("", None)]
            entry[f"{key}_min"] = min(vals) if vals else None
            entry[f"{key}_median"] = _median(vals)
            entry[f"{key}_max"] = max(vals) if vals else None
        out.append(entry)
    return out


def run_batch(instances: Sequence[Instance], algorithms: Sequence[Algorithm | str],
              seeds: Sequence[int], config: BatchConfig | None = None) -> BatchResult:
    config = config or BatchConfig()
    seeds = [int(s) for s in seeds]
    algs = [Algorithm.parse(a) if isinstance(a, str) else a for a in algorithms]
    algs = list(dict.fromkeys(algs))
    notes = []
    auto = Algorithm.ACO not in algs
    if auto:
        notes.append("plain ACO added to anchor Ratio")
    algs = [Algorithm.ACO] + [a for a in algs if a is not Algorithm.ACO]
    optima = bundled_optima() if config.optima is None else config.optima
    contended = config.jobs > 1
    if contended:
        notes.append(f"runs executed with {config.jobs} workers; timings are contended")

    units = []
    for inst in instances:
        seed_set = None
        if config.use_seed_sets:
            if config.seed_sets is not None:
                seed_set = config.seed_sets.get(inst.name.lower())
            else:
                seed_set = bundled_seeds(inst.name)
        for s in seeds:
            units.append((inst, algs, int(s), config.solver, seed_set,
                          optima.get(inst.name.lower()), auto, contended))

    warmup()
    if contended:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            chunks = list(pool.map(_run_unit, units))
    else:
        chunks = [_run_unit(u) for u in units]

    # order rows by instance, then algorithm, then seed
    records = [r for c in chunks for r in c]
    alg_rank = {a.value: i for i, a in enumerate(algs)}
    inst_rank = {inst.name: i for i, inst in enumerate(instances)}
    records.sort(key=lambda r: (inst_rank[r.instance], alg_rank[r.algorithm], seeds.index(r.seed)))
    return BatchResult(records, summarize(records), notes)


def write_csv(records: Iterable[RunRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow(r.as_row())


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_summary_csv(summary: list[dict], path: str | Path) -> None:
    if not summary:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(summary[0]))
        w.writeheader()
        for row in summary:
            w.writerow({k: ("" if v is None else v) for k, v in row.items()})


def format_summary(summary: list[dict]) -> str:
    def f(v, pct=False):
        if v is None:
            return "-"
        return f"{100 * v:.2f}%" if pct else f"{v:.1f}"
    lines = [f"{'instance':<10} {'algorithm':<16} {'runs':>4} {'fail':>4} "
             f"{'err med':>9} {'err max':>9} {'ratio med':>9} {'ratio min':>9}"]
    for s in summary:
        lines.append(f"{s['instance']:<10} {s['algorithm']:<16} {s['runs']:>4} {s['failed']:>4} "
                     f"{f(s['error_median'], True):>9} {f(s['error_max'], True):>9} "
                     f"{f(s['ratio_median']):>9} {f(s['ratio_min']):>9}")
    return "\n".join(lines)


def plot_summary(summary: list[dict], path: str | Path) -> None:
    """Grouped bars of median Ratio and median Error per instance."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    instances = list(dict.fromkeys(s["instance"] for s in summary))
    algs = list(dict.fromkeys(s["algorithm"] for s in summary))
    look = {(s["instance"], s["algorithm"]): s for s in summary}
    x = np.arange(len(instances))
    width = 0.8 / max(len(algs), 1)
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    for ax, key, label in ((axes[0], "ratio_median", "Ratio = Time(ACO)/Time(alg)"),
                           (axes[1], "error_median", "Error")):
        for k, a in enumerate(algs):
            vals = [look.get((i, a), {}).get(key) for i in instances]
            vals = [np.nan if v is None else v for v in vals]
            ax.bar(x + k * width, vals, width, label=a)
        ax.set_xticks(x + width * (len(algs) - 1) / 2)
        ax.set_xticklabels(instances)
        ax.set_ylabel(label)
    axes[0].set_yscale("log")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


# ---------------------------------------------------------------- CLI

class UsageError(Exception):
    pass


def _resolve_instance(arg: str, convention: str) -> Instance:
    p = Path(arg)
    try:
        if p.exists() or arg.lower() in bundled_instance_names():
            return load_instance(arg, convention)
    except (OSError, TsplibError) as exc:
        raise UsageError(f"cannot read instance {arg}: {exc}") from exc
    raise UsageError(f"no such instance file or bundled instance: {arg}")


def _resolve_instances(arg: str, convention: str) -> list[Instance]:
    p = Path(arg)
    if p.is_dir():
        files = sorted(p.glob("*.tsp"))
        if not files:
            raise UsageError(f"no .tsp files in {arg}")
        return [_resolve_instance(str(f), convention) for f in files]
    return [_resolve_instance(s.strip(), convention) for s in arg.split(",") if s.strip()]


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def _add_params(p: argparse.ArgumentParser) -> None:
    d = AcoParams()
    p.add_argument("--optima", help="optima CSV (name,optimum); bundled table by default")
    p.add_argument("--m0", type=int, help="initial class count when no seed file applies")
    p.add_argument("--epsilon-cluster", type=float, default=ClusterConfig().epsilon)
    p.add_argument("--epsilon-aco", type=float, default=d.epsilon)
    p.add_argument("--alpha", type=float, default=d.alpha)
    p.add_argument("--beta", type=float, default=d.beta)
    p.add_argument("--rho", type=float, default=d.rho)
    p.add_argument("--q", type=float, default=d.q)
    p.add_argument("--tmax", type=int, default=d.t_max)
    p.add_argument("--ants", type=int, help="ant count (default floor(2N/3))")
    p.add_argument("--distance", choices=["rounded", "exact"], default="rounded")
    p.add_argument("--uncross-per-class", action="store_true",
                   help="also uncross each class route before joining")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acoslc", description="ACO with special local clustering for TSP")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one instance with one algorithm")
    s.add_argument("--instance", required=True, help="TSPLIB file or bundled name (e.g. ch130)")
    s.add_argument("--algorithm", default=Algorithm.ACO_SLC.value,
                   help=", ".join(a.value for a in Algorithm))
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--seeds-file", help="initial centroids file; bundled seeds used if present")
    s.add_argument("--no-seeds", action="store_true", help="ignore bundled seed centroids")
    s.add_argument("--out", help="CSV with the run row")
    s.add_argument("--tour", help="write the tour in TSPLIB TOUR format")
    _add_params(s)

    b = sub.add_parser("bench", help="run a batch and summarize Ratio and Error")
    b.add_argument("--instances", required=True, help="directory of .tsp files or comma list")
    b.add_argument("--algorithms", default=",".join(a.value for a in Algorithm))
    b.add_argument("--seeds", default="1-5", help="comma list, ranges allowed (1-5)")
    b.add_argument("--out", required=True, help="CSV of per-run rows")
    b.add_argument("--summary", help="CSV of per-(instance, algorithm) summary")
    b.add_argument("--plot", help="SVG with median Ratio and Error bars")
    b.add_argument("--jobs", type=int, default=1, help="worker processes; timings become contended")
    b.add_argument("--no-seeds", action="store_true", help="ignore bundled seed centroids")
    _add_params(b)
    return parser


def config_from_args(args) -> SolverConfig:
    aco = AcoParams(alpha=args.alpha, beta=args.beta, rho=args.rho, q=args.q, t_max=args.tmax,
                    epsilon=args.epsilon_aco, n_ants=args.ants)
    cluster = ClusterConfig(m0=args.m0, epsilon=args.epsilon_cluster)
    return SolverConfig(aco=aco, cluster=cluster, uncross_per_class=args.uncross_per_class)


def _load_optima(path: str | None) -> dict:
    if path is None:
        return bundled_optima()
    try:
        return load_optima(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read optima {path}: {exc}") from exc


def _convention(name: str) -> EdgeWeightType:
    return EdgeWeightType.EUC_2D_EXACT if name == "exact" else EdgeWeightType.EUC_2D_ROUNDED


def cmd_solve(args) -> int:
    inst = _resolve_instance(args.instance, _convention(args.distance))
    try:
        algorithm = Algorithm.parse(args.algorithm)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    seeds = None
    if args.seeds_file:
        try:
            seeds = load_seeds(Path(args.seeds_file).read_text(), inst.name)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read seeds {args.seeds_file}: {exc}") from exc
    elif not args.no_seeds:
        seeds = bundled_seeds(inst.name)
    optima = _load_optima(args.optima)
    config = config_from_args(args)
    warmup()
    rec = run_one(inst, algorithm, args.seed, config, seeds, optima.get(inst.name.lower()))
    if args.out:
        write_csv([rec], args.out)
    if not rec.ok:
        print(f"{inst.name} {algorithm.value} seed {args.seed}: FAILED {rec.notes}", file=sys.stderr)
        return 1
    err = "-" if rec.error is None else f"{100 * rec.error:.2f}%"
    print(f"{inst.name} {algorithm.value} seed {args.seed}: length {rec.length:g} "
          f"error {err} time {rec.timings['total']:.3f}s classes {rec.classes or 1}")
    if args.tour:
        # re-solving keeps run_one free of side outputs; the seed makes it identical
        cfg = replace(config, aco=replace(config.aco, seed=args.seed),
                      cluster=replace(config.cluster, seed=args.seed))
        res = solve(inst, algorithm, cfg, None if algorithm is Algorithm.ACO else seeds)
        Path(args.tour).write_text(format_tour(inst, res.tour, algorithm.value))
    return 0


def cmd_bench(args) -> int:
    instances = _resolve_instances(args.instances, _convention(args.distance))
    try:
        algorithms = [Algorithm.parse(a) for a in args.algorithms.split(",") if a.strip()]
        seeds = _int_list(args.seeds)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if not algorithms or not seeds:
        raise UsageError("need at least one algorithm and one seed")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    config = BatchConfig(solver=config_from_args(args), optima=_load_optima(args.optima),
                         use_seed_sets=not args.no_seeds, jobs=args.jobs)
    t0 = time.perf_counter()
    res = run_batch(instances, algorithms, seeds, config)
    write_csv(res.records, args.out)
    if args.summary:
        write_summary_csv(res.summary, args.summary)
    if args.plot:
        plot_summary(res.summary, args.plot)
    for n in res.notes:
        print(f"note: {n}")
    print(format_summary(res.summary))
    print(f"{len(res.records)} runs, {res.failed} failed, {time.perf_counter() - t0:.1f}s")
    return 1 if res.failed else 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            return cmd_solve(args)
        return cmd_bench(args)
    except UsageError as exc:
        print(f"acoslc: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:  # parameter validation in AcoParams / ClusterConfig
        print(f"acoslc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
