"""``dpwb`` command-line entry point.

Subcommands: ``gen-data``, ``bench-utility``, ``bench-scale``, ``dp-check``
and ``query``. Every command that writes to ``--out`` also writes the
resolved configuration to ``config.json`` there; passing that file back with
``--config`` reruns the same experiment (explicit flags still win).
"""

from __future__ import annotations

import argparse
import contextlib
import fcntl
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from dpwb import datagen
from dpwb.accountant import BudgetLedger
from dpwb.datagen import BoundsPolicy, Dataset, GenParams, generate, grid_27, load_csv, read_provenance, save_csv
from dpwb.errors import BudgetExhausted, DPError
from dpwb.harness import dptest, metrics, plans, report, scalability, utility
from dpwb.kinds import DpDefinition, QueryKind
from dpwb.mechanisms import Bounds, MechanismKind, MechanismSpec, sampler, snapping_grid
from dpwb.queries import prepare
from dpwb.rng import default_seed, random_source

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DP_FAIL = 2
EXIT_DP_INCONCLUSIVE = 3
EXIT_BUDGET = 4

_VERDICT_EXIT = {"pass": EXIT_OK, "fail": EXIT_DP_FAIL, "inconclusive": EXIT_DP_INCONCLUSIVE}


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in _csv_list(text)]


def _int_list(text: str) -> list[int]:
    return [int(float(t)) for t in _csv_list(text)]


def _bytes(text: str) -> int:
    text = str(text).strip().upper()
    units = {"K": 2**10, "M": 2**20, "G": 2**30, "T": 2**40}
    if text and text[-1] in units:
        return int(float(text[:-1]) * units[text[-1]])
    return int(text)


def _write_config(out: Path, args: argparse.Namespace) -> None:
    out.mkdir(parents=True, exist_ok=True)
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    (out / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(out: Path, command: str, files: Sequence[str], extra: Optional[dict] = None) -> None:
    manifest = {"command": command, "files": sorted(files)}
    manifest.update(extra or {})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- gen-data


def cmd_gen_data(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.size is not None:
        params = [GenParams(args.size, args.skew, args.scale, args.location, args.seed)]
    else:
        params = grid_27(args.seed)
    entries = []
    for p in params:
        ds = generate(p)
        name = f"{ds.dataset_id}.csv"
        save_csv(ds, out / name)
        entries.append({"id": ds.dataset_id, "file": name, "params": vars(p)})
    _write_config(out, args)
    _write_manifest(out, "gen-data", [e["file"] for e in entries] + ["config.json"], {"datasets": entries})
    print(f"wrote {len(entries)} dataset(s) to {out}")
    return EXIT_OK


# ---------------------------------------------------------- dataset loading


def _load_dir(path: Path) -> list[Dataset]:
    manifest = path / "manifest.json"
    if manifest.exists():
        entries = json.loads(manifest.read_text(encoding="utf-8")).get("datasets", [])
        files = [path / e["file"] for e in entries]
    else:
        files = sorted(path.glob("*.csv"))
    out = []
    for f in files:
        ds = load_csv(f, "value")
        ds.dataset_id = read_provenance(f).get("dataset_id") or f.stem
        out.append(ds)
    return out


def resolve_datasets(spec: str, seed: int) -> list[Dataset]:
    """Datasets named by a comma-separated selector list.

    Items: ``grid`` (all 27 synthetic datasets), a synthetic dataset id such as
    ``n1000_skew0_scale50``, a directory written by ``gen-data``, or
    ``FILE.csv:COLUMN``.
    """
    grid = {p.dataset_id: p for p in grid_27(seed)}
    out: list[Dataset] = []
    for item in _csv_list(spec):
        if item == "grid":
            out.extend(generate(p) for p in grid.values())
        elif item in grid:
            out.append(generate(grid[item]))
        elif Path(item).is_dir():
            out.extend(_load_dir(Path(item)))
        elif ":" in item:
            path, column = item.rsplit(":", 1)
            out.append(load_csv(path, column))
        elif Path(item).is_file():
            out.append(load_csv(item, "value"))
        else:
            raise DPError(f"cannot resolve dataset {item!r}")
    if not out:
        raise DPError("no datasets selected")
    return out


# ----------------------------------------------------------- bench-utility


def cmd_bench_utility(args) -> int:
    out = Path(args.out)
    queries = [QueryKind(q) for q in _csv_list(args.queries)]
    query_plans = plans.build_plans(queries, _csv_list(args.mechanisms), DpDefinition(args.dp_definition))
    grid = metrics.epsilon_grid() if args.epsilons in (None, "", "grid") else _float_list(args.epsilons)
    datasets = resolve_datasets(args.datasets, args.seed)
    records = utility.run_utility(
        datasets,
        query_plans,
        grid,
        n_runs=args.n_runs,
        master_seed=args.seed,
        bounds_policy=BoundsPolicy.parse(args.bounds),
        workers=args.workers,
    )
    _write_config(out, args)
    report.emit_report(records, out / "utility.csv")
    _write_manifest(out, "bench-utility", ["utility.csv", "utility.plot.tsv", "config.json"], {"rows": len(records)})
    print(f"wrote {len(records)} utility rows to {out / 'utility.csv'}")
    return EXIT_OK


# ------------------------------------------------------------- bench-scale


def cmd_bench_scale(args) -> int:
    out = Path(args.out)
    if args.sizes:
        sizes = _int_list(args.sizes)
    else:
        sizes = list(scalability.DEFAULT_SIZES) + ([10**7] if args.include_10m else [])
    records = scalability.run_scalability(
        sizes=sizes,
        queries=[QueryKind(q) for q in _csv_list(args.queries)],
        epsilons=_float_list(args.epsilons),
        runs=args.runs,
        master_seed=args.seed,
        selector=args.mechanism,
        definition=DpDefinition(args.dp_definition),
        memory_cap_bytes=_bytes(args.memory_cap) if args.memory_cap else None,
        track_allocations=not args.no_alloc_tracking,
    )
    _write_config(out, args)
    report.emit_report(records, out / "scalability.csv")
    _write_manifest(out, "bench-scale", ["scalability.csv", "scalability.plot.tsv", "config.json"], {"rows": len(records)})
    print(f"wrote {len(records)} scalability rows to {out / 'scalability.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------- dp-check


def check_sampler(kind: MechanismKind, eps: float, undernoise: float = 1.0):
    """Sampler for ``dp-check`` at sensitivity 1 around 0.

    ``undernoise`` divides the noise scale while the declared epsilon stays
    the same, which is how the tester's failure path is exercised.
    """
    true_eps = eps * undernoise
    scale, grid = snapping_grid(1.0, true_eps)
    half = max(50.0, math.ceil(50 * scale))
    spec = MechanismSpec(kind)
    if kind.needs_bounds:
        spec = MechanismSpec(kind, bounds=Bounds(-half, half))
    elif kind is MechanismKind.SNAPPING:
        spec = MechanismSpec(kind, clamp_radius=max(64.0, 64 * grid))
    return sampler(spec, 1.0, true_eps)


def cmd_dp_check(args) -> int:
    kind = MechanismKind(args.mechanism)
    rep = dptest.dp_statistical_test(
        check_sampler(kind, args.epsilon, args.undernoise),
        1.0,
        args.epsilon,
        trials=args.trials,
        bins=args.bins,
        seed=args.seed,
        label=kind.value,
    )
    print(
        f"{rep.mechanism} eps={rep.epsilon:g}: {rep.verdict} "
        f"(max log-ratio {rep.max_log_ratio:.4f}, bounds [{rep.lower_bound:.4f}, {rep.upper_bound:.4f}])"
    )
    if args.out:
        out = Path(args.out)
        _write_config(out, args)
        (out / "dp_check.json").write_text(json.dumps(rep.to_dict(), indent=2) + "\n", encoding="utf-8")
        _write_manifest(out, "dp-check", ["dp_check.json", "config.json"])
    return _VERDICT_EXIT[rep.verdict]


# ------------------------------------------------------------------- query


@contextlib.contextmanager
def _locked(path: Path):
    lock = path.with_name(path.name + ".lock")
    with open(lock, "w") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def cmd_query(args) -> int:
    ledger_path = Path(args.ledger)
    query = QueryKind(args.query)
    (data,) = resolve_datasets(args.data, args.seed)
    plan = plans.plan_for(args.mechanism, query, DpDefinition(args.dp_definition))
    bounds = None if query is QueryKind.COUNT else datagen.resolve_bounds(data, BoundsPolicy.parse(args.bounds))
    with _locked(ledger_path):
        if ledger_path.exists():
            if args.new_budget is not None:
                print(f"error: ledger {ledger_path} already exists; drop --new-budget", file=sys.stderr)
                return EXIT_ERROR
            ledger = BudgetLedger.load(ledger_path)
        elif args.new_budget is not None:
            ledger = BudgetLedger(args.new_budget)
        else:
            print(f"error: no ledger at {ledger_path}; pass --new-budget to create one", file=sys.stderr)
            return EXIT_ERROR
        rng = random_source(args.seed, len(ledger.entries) + len(ledger.rejected))
        prepared = prepare(plan, data, bounds, random_source(args.seed, 2**31))
        try:
            result = prepared.release(args.epsilon, rng, ledger)
        except BudgetExhausted as exc:
            ledger.save(ledger_path)
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_BUDGET
        ledger.save(ledger_path)
    print(f"value: {result.value!r}")
    print(f"epsilon_spent: {result.epsilon_spent:g}")
    print(f"remaining: {ledger.remaining():g}")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="dpwb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config (same schema as config.json); flags override it")
        p.add_argument("--seed", type=int, default=None, help="master seed (default: $DPWB_SEED or 0)")
        p.set_defaults(func=func)
        subs[name] = p
        return p

    p = add("gen-data", cmd_gen_data, "write the synthetic datasets as CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, help="generate one custom dataset of this size instead of the grid")
    p.add_argument("--skew", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=50.0)
    p.add_argument("--location", type=float, default=0.0)

    p = add("bench-utility", cmd_bench_utility, "MRE/SASE over the epsilon grid")
    p.add_argument("--out", required=True)
    p.add_argument("--datasets", default="grid")
    p.add_argument("--queries", default="count,sum,mean,var")
    p.add_argument("--mechanisms", default="laplace-pure")
    p.add_argument("--dp-definition", default="bounded", choices=[d.value for d in DpDefinition])
    p.add_argument("--epsilons", "--grid", dest="epsilons", default="grid", help="'grid' or comma-separated values")
    p.add_argument("--n-runs", type=int, default=500)
    p.add_argument("--bounds", default="actual", help="'actual' or LO:HI")
    p.add_argument("--workers", type=int, default=1)

    p = add("bench-scale", cmd_bench_scale, "execution time and memory versus dataset size")
    p.add_argument("--out", required=True)
    p.add_argument("--sizes", default="", help="comma-separated sizes (default 10..10^6)")
    p.add_argument("--include-10m", action="store_true", help="add 10^7 records to the default sizes")
    p.add_argument("--queries", default="count,sum,mean,var")
    p.add_argument("--mechanism", "--mechanisms", dest="mechanism", default="laplace-pure")
    p.add_argument("--dp-definition", default="bounded", choices=[d.value for d in DpDefinition])
    p.add_argument("--epsilons", default="1.0")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--memory-cap", default="", help="skip sizes estimated above this many bytes (e.g. 2G)")
    p.add_argument("--no-alloc-tracking", action="store_true")

    p = add("dp-check", cmd_dp_check, "statistical test of a mechanism's epsilon")
    p.add_argument("--mechanism", "--mechanisms", dest="mechanism", default="laplace-pure",
                   choices=[k.value for k in MechanismKind])
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=10**6)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--undernoise", type=float, default=1.0, help=argparse.SUPPRESS)
    p.add_argument("--out", default="")

    p = add("query", cmd_query, "answer one query against a persistent budget ledger")
    p.add_argument("--data", "--datasets", dest="data", required=True, help="FILE.csv:COLUMN or a dataset id")
    p.add_argument("--query", required=True, choices=[q.value for q in QueryKind])
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--mechanism", "--mechanisms", dest="mechanism", default="laplace-pure+round")
    p.add_argument("--dp-definition", default="bounded", choices=[d.value for d in DpDefinition])
    p.add_argument("--bounds", default="actual")
    p.add_argument("--ledger", required=True)
    p.add_argument("--new-budget", "--budget", dest="new_budget", type=float)
    return parser, subs


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        config.pop("command", None)
        subs[args.command].set_defaults(**config)
        args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = default_seed()
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    try:
        return args.func(args)
    except (DPError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
