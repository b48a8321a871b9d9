import argparse
import logging

from ghyena.commands import deps
from ghyena.commands.router import CommandRouter, arg
from ghyena.recall.data import STREAMS, generate_dataset
from ghyena.recall.dataset_io import save_dataset

logger = logging.getLogger(__name__)

router = CommandRouter()

SPLITS = ("train", "val", "test")


@router.command(
    "gen-data",
    help="generate geometric associative recall datasets (train/val/test GAR1 files)",
    arguments=[
        arg("--vocab-size", dest="vocab_size", type=int, default=None),
        arg("--seq-len", dest="seq_len", type=int, default=None),
        arg("--train-size", dest="train_size", type=int, default=None),
        arg("--val-size", dest="val_size", type=int, default=None),
        arg("--test-size", dest="test_size", type=int, default=None),
    ],
)
def gen_data(args: argparse.Namespace) -> int:
    """
    Write ``train.gar``, ``val.gar`` and ``test.gar``.

    Instance i of a split depends only on (seed, split, i), so the same seed always
    produces the same bytes whatever the thread count.
    """
    settings = deps.get_settings(args)
    cfg = deps.resolve_train_config(deps.collect_values(args, deps.TRAIN_KEYS))
    run = deps.get_run_config("gen-data", args, cfg.seed, settings)
    sizes = {"train": cfg.train_size, "val": cfg.val_size, "test": cfg.test_size}
    for split in SPLITS:
        instances = generate_dataset(sizes[split], cfg.vocab_size, cfg.seq_len, cfg.seed, STREAMS[split],
                                     threads=settings.THREADS)
        path = run.out_dir / f"{split}.gar"
        save_dataset(path, instances)
        logger.info("wrote %d %s sequences of length %d to %s", len(instances), split, cfg.seq_len, path)
    print(f"datasets written to {run.out_dir}")
    return 0
