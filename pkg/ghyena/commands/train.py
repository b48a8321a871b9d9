import argparse
import csv
import logging
from pathlib import Path
from typing import List

from ghyena.commands import deps
from ghyena.commands.router import CommandRouter, arg
from ghyena.core.errors import DataIOError, NumericalError
from ghyena.nn.model import GHyenaModel, load_model, parameter_count
from ghyena.recall.dataset_io import load_dataset
from ghyena.recall.train import TrainResult, resume_state, train
from ghyena.schemas.records import EpochMetrics

logger = logging.getLogger(__name__)

router = CommandRouter()

METRICS_HEADER = ["epoch", "lr", "train_mse", "val_mse"]
CHECKPOINT_STEM = "model"


def write_metrics_csv(path: Path, history: List[EpochMetrics]) -> None:
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRICS_HEADER)
            writer.writerows(m.csv_row() for m in history)
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e


def read_metrics_csv(path: Path) -> List[EpochMetrics]:
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            return [EpochMetrics.model_validate(row) for row in csv.DictReader(fh)]
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e}") from e


@router.command(
    "train",
    help="train a model on geometric associative recall",
    arguments=deps.MODEL_ARGUMENTS + [
        arg("--data", type=Path, default=None, help="directory with train.gar and val.gar; omit to generate on the fly"),
        arg("--resume", type=Path, default=None, help="checkpoint stem to continue from"),
        arg("--epochs", type=int, default=None),
        arg("--batch-size", dest="batch_size", type=int, default=None),
        arg("--lr", dest="base_lr", type=float, default=None),
        arg("--warmup-epochs", dest="warmup_epochs", type=int, default=None),
        arg("--weight-decay", dest="weight_decay", type=float, default=None),
        arg("--train-size", dest="train_size", type=int, default=None),
        arg("--val-size", dest="val_size", type=int, default=None),
        arg("--vocab-size", dest="vocab_size", type=int, default=None),
        arg("--seq-len", dest="seq_len", type=int, default=None),
    ],
)
def train_command(args: argparse.Namespace) -> int:
    """
    Train and write ``model.ghk``/``model.manifest``/``model.json`` plus ``metrics.csv``.

    The checkpoint is rewritten after every finished epoch, so a numerical failure
    leaves the last good state in place.
    """
    settings = deps.get_settings(args)
    values = deps.collect_values(args, deps.MODEL_KEYS | deps.BLOCK_KEYS | deps.TRAIN_KEYS)

    resume = None
    if args.resume is not None:
        model, meta, extra = load_model(args.resume)
        cfg = deps.resolve_train_config(values, base=meta.train)
        resume = resume_state(model, meta, extra)
    else:
        cfg = deps.resolve_train_config(values)
        model = GHyenaModel(deps.resolve_model_config(values), seed=cfg.seed)
    run = deps.get_run_config("train", args, cfg.seed, settings)

    train_set = val_set = None
    if args.data is not None:
        train_set = load_dataset(args.data / "train.gar")
        val_set = load_dataset(args.data / "val.gar")
        cfg = cfg.model_copy(update={"on_the_fly": False})

    stem = run.out_dir / CHECKPOINT_STEM
    metrics_path = run.out_dir / "metrics.csv"
    logger.info("model %s with %d parameters", model.config.block, parameter_count(model))

    history: List[EpochMetrics] = list(resume.history) if resume else []

    def on_epoch(metrics: EpochMetrics) -> None:
        history.append(metrics)
        write_metrics_csv(metrics_path, history)

    try:
        result: TrainResult = train(model, cfg, train_set=train_set, val_set=val_set,
                                    resume=resume, checkpoint=stem, on_epoch=on_epoch, threads=settings.THREADS)
    except NumericalError:
        logger.error("training diverged; last good checkpoint kept at %s", stem)
        raise
    write_metrics_csv(metrics_path, result.history)
    final = result.history[-1] if result.history else None
    if final is not None:
        print(f"epoch {final.epoch}: train_mse {final.train_mse:.6f} val_mse {final.val_mse:.6f}")
    print(f"checkpoint written to {stem}")
    return 0
