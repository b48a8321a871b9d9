import argparse
import csv
import logging
from pathlib import Path

import numpy as np

from ghyena.commands import deps
from ghyena.commands.router import CommandRouter, arg
from ghyena.core.errors import DataIOError
from ghyena.nn.geometry import random_rotation
from ghyena.nn.model import load_model
from ghyena.recall.data import STREAMS, generate_dataset, rotate_instance
from ghyena.recall.dataset_io import load_dataset
from ghyena.recall.train import evaluate, mean_predictor_mse

logger = logging.getLogger(__name__)

router = CommandRouter()

EVAL_HEADER = ["checkpoint", "dataset", "count", "mse", "mean_predictor_mse", "rotation_gap"]


@router.command(
    "eval",
    help="evaluate a checkpoint on a recall dataset",
    arguments=[
        arg("--checkpoint", type=Path, required=True, help="checkpoint stem written by train"),
        arg("--data", type=Path, default=None, help="GAR1 file or directory holding test.gar; omit to generate the test split"),
        arg("--batch-size", dest="batch_size", type=int, default=None),
        arg("--rotations", type=int, default=0, help="also report the largest MSE change under this many random rotations"),
    ],
)
def eval_command(args: argparse.Namespace) -> int:
    """
    Print the MSE and the mean-predictor MSE and write a one-row ``eval.csv``.
    """
    settings = deps.get_settings(args)
    model, meta, _ = load_model(args.checkpoint)
    cfg = deps.resolve_train_config(deps.collect_values(args, deps.TRAIN_KEYS), base=meta.train)
    run = deps.get_run_config("eval", args, cfg.seed, settings)

    if args.data is None:
        dataset = generate_dataset(cfg.test_size, cfg.vocab_size, cfg.seq_len, cfg.seed, STREAMS["test"],
                                   threads=settings.THREADS)
        source = f"generated:test:{cfg.seed}"
    else:
        path = args.data / "test.gar" if args.data.is_dir() else args.data
        dataset = load_dataset(path)
        source = str(path)
    if not dataset:
        raise DataIOError(f"{source}: dataset is empty")

    mse = evaluate(model, dataset, cfg.batch_size)
    baseline = mean_predictor_mse(dataset)
    gap = 0.0
    rng = np.random.default_rng(run.stream_seed("eval-rotations"))
    for _ in range(max(args.rotations, 0)):
        r = random_rotation(rng)
        gap = max(gap, abs(evaluate(model, [rotate_instance(inst, r) for inst in dataset], cfg.batch_size) - mse))

    out = run.out_dir / "eval.csv"
    try:
        with out.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(EVAL_HEADER)
            writer.writerow([str(args.checkpoint), source, str(len(dataset)), repr(mse), repr(baseline), repr(gap)])
    except OSError as e:
        raise DataIOError(f"cannot write {out}: {e}") from e
    logger.info("evaluated %s on %d sequences", args.checkpoint, len(dataset))
    print(f"mse {mse:.6f} mean_predictor_mse {baseline:.6f} ratio {mse / baseline if baseline else float('nan'):.3f}")
    if args.rotations:
        print(f"max |mse change| under {args.rotations} rotations: {gap:.3e}")
    return 0
