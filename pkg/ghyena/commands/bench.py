import argparse
import logging
from pathlib import Path

from ghyena.bench.harness import format_summary, run_benchmark, summarize, write_bench_csv
from ghyena.commands import deps
from ghyena.commands.router import CommandRouter, arg
from ghyena.schemas.config import BENCH_OPS

logger = logging.getLogger(__name__)

router = CommandRouter()


def int_list(value: str) -> list:
    return [int(v) for v in deps.csv_list(value)]


@router.command(
    "bench",
    help="runtime and peak-memory scaling benchmark; writes bench.csv",
    arguments=[
        arg("--ops", type=deps.csv_list, default=None, help=f"comma-separated subset of {', '.join(BENCH_OPS)}"),
        arg("--lengths", type=int_list, default=None, help="comma-separated sequence lengths"),
        arg("--trials", type=int, default=None),
        arg("--hidden-dim", dest="hidden_dim", type=int, default=None),
        arg("--memory-budget", dest="memory_budget_bytes", type=int, default=None,
            help="peak bytes above which a run is recorded as OOM"),
        arg("--dtype", choices=["float32", "float64"], default=None),
        arg("--csv", type=Path, default=None, help="CSV path (default: <out>/bench.csv)"),
    ],
)
def bench_command(args: argparse.Namespace) -> int:
    settings = deps.get_settings(args)
    cfg = deps.resolve_bench_config(deps.collect_values(args, deps.BENCH_KEYS))
    run = deps.get_run_config("bench", args, cfg.seed, settings)
    csv_path = args.csv if args.csv is not None else run.out_dir / "bench.csv"

    records = run_benchmark(cfg)
    write_bench_csv(csv_path, records)
    print(format_summary(summarize(records)))
    print(f"{len(records)} records written to {csv_path}")
    return 0
