"""Command-line experiment harness.

Verbs:
  run        simulate the configured scenario for every scheme x seed and
             write per-job metric rows as CSV plus a text summary
  validate   stress the greedy scheme against the exact optimum (and edge
             coloring) on seeded random instances
  bench      measure scheme runtimes across commodity counts
  failsweep  re-run the scenario injecting k spine failures for each k

Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 a validated
bound was violated.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import tempfile

from .config import (
    ConfigError,
    ScenarioConfig,
    build_jobs,
    controller_for,
    default_config,
    failure_plan,
    load_config,
    parse_config,
)
from .routing import (
    SCHEME_NAMES,
    SPINE_LINKS_ONLY,
    edge_color_assign,
    exact_assign,
    greedy_assign,
    max_link_load,
    random_unit_instance,
)
from .sim import SimResult, measure_scheme_runtime, run_scenario, stable_seed
from .topology import build_topology

RESULT_COLUMNS = ("scenario", "scheme", "job", "metric", "value", "seed")
TRACE_COLUMNS = (
    "scenario",
    "scheme",
    "seed",
    "job",
    "iteration",
    "commodity",
    "src",
    "dst",
    "volume_bytes",
    "start_s",
    "end_s",
    "fct_s",
    "throughput_bps",
    "udp_port",
)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, header: tuple[str, ...], rows: list[tuple]):
    """Write atomically so failed runs leave no partial output behind."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def _metric_rows(scenario_id, scheme, seed, result: SimResult) -> list[tuple]:
    per_job: dict[str, list] = {}
    for rec in result.records:
        per_job.setdefault(rec.job_id, []).append(rec)
    rows = []
    for job_id in sorted(per_job):
        recs = per_job[job_id]
        flows = [fr for rec in recs for fr in rec.flow_records]
        fcts = [f[1] for f in flows]
        tputs = [f[2] for f in flows]
        rows.append((scenario_id, scheme, job_id, "allreduce_time_s",
                     _mean(r.allreduce_time for r in recs), seed))
        rows.append((scenario_id, scheme, job_id, "mean_fct_s", _mean(fcts), seed))
        rows.append((scenario_id, scheme, job_id, "mean_throughput_bps", _mean(tputs), seed))
        rows.append((scenario_id, scheme, job_id, "min_bandwidth_bps",
                     min(tputs) if tputs else 0.0, seed))
    peak = max((e["max_spine_load"] for e in result.controller_log), default=0)
    rows.append((scenario_id, scheme, "all", "max_link_load", float(peak), seed))
    return rows


def _trace_rows(scenario_id, scheme, seed, result: SimResult) -> list[tuple]:
    rows = []
    for e in result.flow_log:
        fct = e["end_s"] - e["start_s"]
        rows.append(
            (
                scenario_id, scheme, seed, e["job"], e["iteration"], e["commodity"],
                e["src"], e["dst"], e["volume_bytes"], e["start_s"], e["end_s"],
                fct, e["volume_bytes"] * 8 / fct if fct > 0 else 0.0,
                "" if e["udp_port"] is None else e["udp_port"],
            )
        )
    return rows


def _load(args) -> ScenarioConfig:
    if args.config:
        config = load_config(args.config)
    else:
        config = parse_config(default_config())
    if getattr(args, "schemes", None):
        names = [s.strip() for s in args.schemes.split(",") if s.strip()]
        for s in names:
            if s not in SCHEME_NAMES:
                raise ConfigError(f"--schemes: unknown scheme {s!r}; valid: {list(SCHEME_NAMES)}")
        config = ScenarioConfig(**{**config.__dict__, "schemes": names})
    if getattr(args, "seed", None) is not None:
        config = ScenarioConfig(**{**config.__dict__, "seeds": [args.seed]})
    return config


def _run_scenarios(config: ScenarioConfig, counts=None, tag=None):
    """Shared run/failsweep executor. Yields (scenario_id, scheme, seed, result)."""
    plan = failure_plan(config, counts)
    scenario_id = config.scenario_id if tag is None else f"{config.scenario_id}:{tag}"
    for scheme in config.schemes:
        for seed in config.seeds:
            jobs = build_jobs(config, seed)
            result = run_scenario(
                config.topology,
                jobs,
                controller_for(config, scheme),
                hardware=config.hardware,
                failures=plan,
                seed=seed,
            )
            yield scenario_id, scheme, seed, result


def cmd_run(args) -> int:
    config = _load(args)
    rows, trace = [], []
    for scenario_id, scheme, seed, result in _run_scenarios(config):
        rows.extend(_metric_rows(scenario_id, scheme, seed, result))
        if args.trace:
            trace.extend(_trace_rows(scenario_id, scheme, seed, result))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3], r[5]))
    _write_csv(args.out, RESULT_COLUMNS, rows)
    _write_summary(args.out, rows)
    if args.trace:
        _write_csv(_suffixed(args.out, ".trace.csv"), TRACE_COLUMNS, trace)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _suffixed(path: str, suffix: str) -> str:
    root, _ = os.path.splitext(path)
    return root + suffix


def _write_summary(out_path: str, rows: list[tuple]):
    lines = ["per-scheme means", ""]
    by_scheme_metric: dict[tuple[str, str], list[float]] = {}
    for _, scheme, job, metric, value, _ in rows:
        if job == "all":
            continue
        by_scheme_metric.setdefault((scheme, metric), []).append(value)
    for (scheme, metric), values in sorted(by_scheme_metric.items()):
        lines.append(f"{scheme:14s} {metric:22s} {_mean(values):.6g}")
    path = _suffixed(out_path, ".summary.txt")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_validate(args) -> int:
    instances = args.instances
    seed = args.seed if args.seed is not None else 0
    worst_ratio = 0.0
    violations = 0
    coloring_mismatches = 0
    for i in range(instances):
        topo, commodities = random_unit_instance(
            stable_seed(seed, i),
            max_tors=args.max_tors,
            max_spines=args.max_spines,
            max_commodities=args.max_commodities,
        )
        greedy_load = max_link_load(greedy_assign(commodities, topo), topo, SPINE_LINKS_ONLY)
        exact_load = max_link_load(
            exact_assign(commodities, topo, max_commodities=args.max_commodities),
            topo,
            SPINE_LINKS_ONLY,
        )
        coloring_load = max_link_load(edge_color_assign(commodities, topo), topo, SPINE_LINKS_ONLY)
        out_deg: dict[int, int] = {}
        in_deg: dict[int, int] = {}
        for c in commodities:
            out_deg[c.src.tor] = out_deg.get(c.src.tor, 0) + 1
            in_deg[c.dst.tor] = in_deg.get(c.dst.tor, 0) + 1
        delta = max(list(out_deg.values()) + list(in_deg.values()))
        bound = math.ceil(delta / len(topo.live_spines))
        ratio = greedy_load / exact_load
        worst_ratio = max(worst_ratio, ratio)
        if greedy_load > 2 * exact_load:
            violations += 1
        if coloring_load != bound or coloring_load != exact_load:
            coloring_mismatches += 1
    report = [
        f"instances: {instances}",
        f"max greedy/exact spine-load ratio: {worst_ratio:.4f}",
        f"greedy 2x bound violations: {violations}",
        f"edge-coloring vs exact mismatches: {coloring_mismatches}",
        f"edge-coloring equals ceil(max_degree / live_spines): "
        f"{instances - coloring_mismatches}/{instances}",
    ]
    text = "\n".join(report)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return 4 if violations or coloring_mismatches else 0


def cmd_bench(args) -> int:
    counts = [int(c) for c in args.counts.split(",") if c.strip()] if args.counts else []
    schemes = (
        [s.strip() for s in args.schemes.split(",") if s.strip()]
        if args.schemes
        else ["greedy", "ecmp", "edge_coloring", "annealing"]
    )
    for s in schemes:
        if s not in SCHEME_NAMES:
            raise ConfigError(f"--schemes: unknown scheme {s!r}")
    seed = args.seed if args.seed is not None else 0
    topo = build_topology(32, 64, 4, 8, 100e9)
    rows = []
    for scheme in schemes:
        for count, median in measure_scheme_runtime(scheme, counts, topo, seed):
            rows.append((scheme, count, median))
            print(f"{scheme:14s} n={count:<6d} median {median * 1e3:.3f} ms")
    _write_csv(args.out, ("scheme", "count", "median_s"), rows)
    return 0


def cmd_failsweep(args) -> int:
    config = _load(args)
    counts = [int(c) for c in args.counts.split(",") if c.strip()] if args.counts else [1, 4, 8]
    for k in counts:
        if k >= config.topology.num_spines:
            raise ConfigError(
                f"--counts: {k} failures would kill all {config.topology.num_spines} spines"
            )
    rows, trace = [], []
    for k in counts:
        for scenario_id, scheme, seed, result in _run_scenarios(
            config, counts=[k] if k else [], tag=f"k{k}"
        ):
            rows.extend(_metric_rows(scenario_id, scheme, seed, result))
            if args.trace:
                trace.extend(_trace_rows(scenario_id, scheme, seed, result))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3], r[5]))
    _write_csv(args.out, RESULT_COLUMNS, rows)
    if args.trace:
        _write_csv(_suffixed(args.out, ".trace.csv"), TRACE_COLUMNS, trace)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="closroute",
        description="Routing schemes and a flow-level training-traffic simulator "
        "for 2-layer Clos fabrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate the scenario for every scheme x seed")
    p_run.add_argument("--config", help="scenario JSON (defaults to the built-in scenario)")
    p_run.add_argument("--out", required=True, help="result CSV path")
    p_run.add_argument("--seed", type=int, help="override the config's seed list")
    p_run.add_argument("--schemes", help="comma-separated scheme override")
    p_run.add_argument("--trace", action="store_true", help="also write a per-flow CSV")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="compare greedy to the exact optimum")
    p_val.add_argument("--instances", type=int, default=1000)
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--max-tors", type=int, default=8)
    p_val.add_argument("--max-spines", type=int, default=4)
    p_val.add_argument("--max-commodities", type=int, default=14)
    p_val.add_argument("--out", help="also write the report to this path")
    p_val.set_defaults(func=cmd_validate)

    p_bench = sub.add_parser("bench", help="time the schemes at several commodity counts")
    p_bench.add_argument("--counts", default="100,500,1000,1500")
    p_bench.add_argument("--schemes", help="comma-separated scheme list")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", required=True)
    p_bench.set_defaults(func=cmd_bench)

    p_fail = sub.add_parser("failsweep", help="re-run the scenario under spine failures")
    p_fail.add_argument("--config")
    p_fail.add_argument("--out", required=True)
    p_fail.add_argument("--seed", type=int)
    p_fail.add_argument("--schemes")
    p_fail.add_argument("--counts", default="1,4,8", help="failure counts, comma separated")
    p_fail.add_argument("--trace", action="store_true")
    p_fail.set_defaults(func=cmd_failsweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
