import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ghyena.autodiff.checkpoint import load_checkpoint, save_checkpoint, stem_path
from ghyena.autodiff.params import ParamStore
from ghyena.autodiff.tensor import Tensor, mean, sum_
from ghyena.core.errors import DataIOError, ShapeError
from ghyena.nn.attention import GTransformerBlock
from ghyena.nn.block import BlockBase, HyenaBlock
from ghyena.nn.geometry import GeometricSequence
from ghyena.nn.layers import Linear
from ghyena.schemas.config import ModelConfig
from ghyena.schemas.records import CheckpointMeta

logger = logging.getLogger(__name__)

PARAM_PREFIX = "param."


def pool_eqv_vector(seq: GeometricSequence, pooling: str = "mean") -> Tensor:
    """Mean (or sum) of the vector tokens: (..., N, 3) -> (..., 3)."""
    if pooling == "sum":
        return sum_(seq.x, axis=-2)
    return mean(seq.x, axis=-2)


class GHyenaModel:
    """Linear embedding of invariant inputs, a stack of blocks and a readout."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self.params = ParamStore()
        rng = np.random.default_rng(seed)
        root = self.params.scope("")
        self.embed = Linear(root.scope("embed"), config.input_dim, config.hidden_dim, rng)
        self.blocks: List[BlockBase] = []
        for i in range(config.depth):
            scope = root.scope(f"block{i}")
            if config.block == "gtransformer":
                block: BlockBase = GTransformerBlock(scope, config.hidden_dim, config.block_config, rng, config.attention)
            else:
                block = HyenaBlock(scope, config.hidden_dim, config.block_config, rng)
            self.blocks.append(block)

    def embed_sequence(self, seq: GeometricSequence) -> GeometricSequence:
        if seq.d != self.config.input_dim:
            raise ShapeError("model_forward", seq.f.shape, reason=f"expected {self.config.input_dim} input features, got")
        return seq.replace(f=self.embed(seq.f))

    def __call__(self, seq: GeometricSequence) -> Union[Tensor, GeometricSequence]:
        return model_forward(self, seq)


def model_forward(model: GHyenaModel, seq: GeometricSequence) -> Union[Tensor, GeometricSequence]:
    h = model.embed_sequence(seq)
    for block in model.blocks:
        h = block(h)
    if model.config.readout == "per_token":
        return h
    return pool_eqv_vector(h, model.config.pooling)


def parameter_count(model: GHyenaModel) -> int:
    return model.params.num_parameters()


def model_manifest(model: GHyenaModel) -> Dict[str, Any]:
    return {"seed": model.seed, "config": model.config.model_dump()}


def save_model(
    stem: Union[str, Path],
    model: GHyenaModel,
    extra: Optional[Dict[str, np.ndarray]] = None,
    meta: Optional[CheckpointMeta] = None,
) -> None:
    """Write parameters (plus optional extra tensors such as optimiser moments) and a JSON manifest."""
    tensors = {PARAM_PREFIX + name: value for name, value in model.params.state_dict().items()}
    tensors.update(extra or {})
    save_checkpoint(stem, tensors)
    meta = meta or CheckpointMeta()
    meta.model = model_manifest(model)
    meta.parameter_count = parameter_count(model)
    try:
        stem_path(stem, ".json").write_text(meta.model_dump_json(indent=2), encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"cannot write model manifest for {stem}: {e}") from e


def load_model(stem: Union[str, Path]) -> Tuple[GHyenaModel, CheckpointMeta, Dict[str, np.ndarray]]:
    """Rebuild a model from its manifest and checkpoint; returns non-parameter tensors too."""
    manifest_path = stem_path(stem, ".json")
    try:
        meta = CheckpointMeta.model_validate(json.loads(manifest_path.read_text(encoding="utf-8")))
    except (OSError, ValueError) as e:
        raise DataIOError(f"cannot read model manifest {manifest_path}: {e}") from e
    model = GHyenaModel(ModelConfig.model_validate(meta.model["config"]), seed=meta.model.get("seed", 0))
    tensors = load_checkpoint(stem)
    state = {k[len(PARAM_PREFIX):]: v for k, v in tensors.items() if k.startswith(PARAM_PREFIX)}
    model.params.load_state_dict(state)
    extra = {k: v for k, v in tensors.items() if not k.startswith(PARAM_PREFIX)}
    logger.info("loaded %s (%d parameters, epoch %d)", stem, parameter_count(model), meta.epoch)
    return model, meta, extra
