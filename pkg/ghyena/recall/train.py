import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from ghyena.autodiff.tensor import Tape, Tensor, mean
from ghyena.core.errors import NumericalError
from ghyena.nn.geometry import GeometricSequence
from ghyena.nn.model import GHyenaModel, parameter_count, save_model
from ghyena.recall.data import STREAMS, AssocRecallInstance, generate_dataset, stack_targets
from ghyena.recall.optim import AdamState, adam_step, cosine_lr
from ghyena.schemas.config import TrainConfig
from ghyena.schemas.records import CheckpointMeta, EpochMetrics

logger = logging.getLogger(__name__)

Dataset = Sequence[AssocRecallInstance]


@dataclass
class TrainResult:
    model: GHyenaModel
    history: List[EpochMetrics] = field(default_factory=list)
    optimizer: AdamState = field(default_factory=AdamState)
    epoch: int = 0


def batch_sequence(instances: Dataset) -> GeometricSequence:
    """Stack equal-length instances along a leading batch axis."""
    lengths = {inst.n for inst in instances}
    if len(lengths) != 1:
        raise ValueError(f"a batch needs equal sequence lengths, got {sorted(lengths)}")
    f = np.stack([inst.pos_features for inst in instances])
    x = np.stack([inst.tokens for inst in instances])
    return GeometricSequence(f=Tensor(f), x=Tensor(x))


def mse_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    """Mean over instances of ``|pred - target|^2 / 3``."""
    diff = pred - Tensor(target)
    return mean(diff * diff)


def _batches(instances: Dataset, batch_size: int, rng: Optional[np.random.Generator] = None) -> List[List[AssocRecallInstance]]:
    order = np.arange(len(instances)) if rng is None else rng.permutation(len(instances))
    return [[instances[i] for i in order[s:s + batch_size]] for s in range(0, len(order), batch_size)]


def evaluate(model: GHyenaModel, dataset: Dataset, batch_size: int = 8) -> float:
    if not dataset:
        raise ValueError("cannot evaluate on an empty dataset")
    total = 0.0
    for batch in _batches(dataset, batch_size):
        pred = model(batch_sequence(batch))
        diff = pred.data - stack_targets(batch)
        total += float(np.sum(diff * diff)) / 3.0
    return total / len(dataset)


def mean_predictor_mse(dataset: Dataset) -> float:
    """MSE of the constant predictor equal to the dataset's mean target."""
    targets = stack_targets(dataset)
    diff = targets - targets.mean(axis=0)
    return float(np.mean(np.sum(diff * diff, axis=1) / 3.0))


def _param_norms(model: GHyenaModel) -> dict:
    return {name: float(np.linalg.norm(p.data)) for name, p in model.params.items()}


def train(
    model: GHyenaModel,
    cfg: TrainConfig,
    train_set: Optional[Dataset] = None,
    val_set: Optional[Dataset] = None,
    resume: Optional[TrainResult] = None,
    checkpoint: Optional[Union[str, Path]] = None,
    on_epoch: Optional[Callable[[EpochMetrics], None]] = None,
    threads: Optional[int] = None,
) -> TrainResult:
    """Adam with warmup + cosine schedule on the associative recall MSE.

    With ``cfg.on_the_fly`` every epoch draws ``train_size`` fresh sequences; otherwise
    ``train_set`` (or one set generated from the seed) is reused. Validation data is
    fixed. Batch order of epoch e comes from ``(seed, e)`` alone, so a resumed run
    continues the same sequence of batches. When ``checkpoint`` is given the model and
    optimiser are saved after every finite epoch, so a numerical failure leaves the last
    good state on disk.
    """
    if val_set is None:
        val_set = generate_dataset(cfg.val_size, cfg.vocab_size, cfg.seq_len, cfg.seed, STREAMS["val"], threads=threads)
    if train_set is None and not cfg.on_the_fly:
        train_set = generate_dataset(cfg.train_size, cfg.vocab_size, cfg.seq_len, cfg.seed, STREAMS["train"], threads=threads)

    result = resume or TrainResult(model=model)
    result.model = model
    logger.info("training %d parameters for %d epochs (from epoch %d)", parameter_count(model), cfg.epochs, result.epoch)

    for epoch in range(result.epoch, cfg.epochs):
        lr = cosine_lr(epoch, cfg)
        if cfg.on_the_fly:
            epoch_set = generate_dataset(cfg.train_size, cfg.vocab_size, cfg.seq_len, cfg.seed,
                                         STREAMS["train"], start=epoch * cfg.train_size, threads=threads)
        else:
            epoch_set = train_set
        order_rng = np.random.default_rng([cfg.seed, STREAMS["train"], epoch])
        total, seen = 0.0, 0
        for b, batch in enumerate(_batches(epoch_set, cfg.batch_size, order_rng)):
            model.params.zero_grad()
            with Tape() as tape:
                loss = mse_loss(model(batch_sequence(batch)), stack_targets(batch))
                value = float(loss.data)
                if not np.isfinite(value):
                    raise NumericalError(
                        f"non-finite loss at epoch {epoch} batch {b}",
                        {"epoch": epoch, "batch": b, "loss": value, "param_norms": _param_norms(model)},
                    )
                tape.backward(loss)
            adam_step(model.params, model.params.gradients(), result.optimizer, lr, cfg.weight_decay)
            total += value * len(batch)
            seen += len(batch)

        metrics = EpochMetrics(epoch=epoch, lr=lr, train_mse=total / seen, val_mse=evaluate(model, val_set, cfg.batch_size))
        if not np.isfinite(metrics.val_mse):
            raise NumericalError(f"non-finite validation MSE at epoch {epoch}",
                                 {"epoch": epoch, "param_norms": _param_norms(model)})
        result.history.append(metrics)
        result.epoch = epoch + 1
        logger.info("epoch %d lr %.3e train_mse %.5f val_mse %.5f", epoch, lr, metrics.train_mse, metrics.val_mse)
        if checkpoint is not None:
            save_training_state(checkpoint, result, cfg)
        if on_epoch is not None:
            on_epoch(metrics)
    return result


def save_training_state(stem: Union[str, Path], result: TrainResult, cfg: TrainConfig) -> None:
    meta = CheckpointMeta(epoch=result.epoch, train=cfg.model_dump(), metrics=result.history)
    save_model(stem, result.model, extra=result.optimizer.state_dict(), meta=meta)


def resume_state(model: GHyenaModel, meta: CheckpointMeta, extra: dict) -> TrainResult:
    return TrainResult(model=model, history=list(meta.metrics), optimizer=AdamState.from_state_dict(extra), epoch=meta.epoch)
