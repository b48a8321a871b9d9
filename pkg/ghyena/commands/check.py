import argparse
import logging

from ghyena.checks.suites import format_report, run_suite
from ghyena.commands import deps
from ghyena.commands.router import CommandRouter, arg
from ghyena.core.errors import DataIOError
from ghyena.schemas.config import CHECK_SUITES

logger = logging.getLogger(__name__)

router = CommandRouter()


@router.command(
    "check",
    help="run an invariant suite; exits 1 when any invariant fails",
    arguments=[
        arg("suite", choices=CHECK_SUITES),
        arg("--rotations", type=int, default=None, help="group elements for the equivariance suite"),
        arg("--flip-plan-row", dest="flip_plan_row", type=int, default=None,
            help="flip one sign of the cross-product plan (the oracle suite must then fail)"),
        arg("--ablation-epochs", dest="ablation_epochs", type=int, default=None),
    ],
)
def check_command(args: argparse.Namespace) -> int:
    settings = deps.get_settings(args)
    values = deps.collect_values(args, deps.CHECK_KEYS)
    cfg = deps.resolve_check_config(values)
    run = deps.get_run_config("check", args, cfg.seed, settings)

    report = run_suite(cfg)
    path = run.out_dir / f"{cfg.suite}.json"
    try:
        path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e
    print(format_report(report))
    return 0 if report.passed else 1
