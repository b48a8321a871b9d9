from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

GatingMode = Literal["QK", "K", "none"]
BENCH_OPS = ("scalar-conv", "vector-conv", "vector-conv-naive", "geometric-conv", "ghyena-block", "gtrans-block")


class BlockConfig(BaseModel):
    local_context: bool = True
    global_context: bool = True
    gating_mode: GatingMode = "QK"
    kv_norm: bool = True
    geometric_conv: bool = True  # False: separate scalar + vector long convolutions
    num_global_tokens: int = Field(8, ge=1)
    conv_scale: Optional[float] = None  # None means 1/N
    centering: bool = True
    residual: bool = True
    edge_dim: int = Field(0, ge=0)
    neighborhood: Literal["chain", "spatial"] = "chain"
    k_neighbors: int = Field(2, ge=1)
    radius: Optional[float] = None
    siren_hidden: int = Field(32, ge=1)
    siren_layers: int = Field(2, ge=1)
    siren_omega: float = 30.0

    @field_validator("gating_mode", mode="before")
    @classmethod
    def validate_gating_mode(cls, v):
        if v is None or (isinstance(v, str) and v.lower() in ("", "none", "off")):
            return "none"
        if isinstance(v, str) and v.upper() in ("QK", "K"):
            return v.upper()
        raise ValueError("gating_mode must be one of: QK, K, none")

    @field_validator("conv_scale", "radius")
    @classmethod
    def validate_positive(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v <= 0:
            raise ValueError("must be positive when given")
        return v

    def toggles(self) -> Dict[str, object]:
        return {
            "local_context": self.local_context,
            "global_context": self.global_context,
            "gating_mode": self.gating_mode,
            "kv_norm": self.kv_norm,
            "geometric_conv": self.geometric_conv,
        }


# Component rows of the ablation table: local, global, gating, kv-norm, geometric conv.
ABLATION_ROWS: List[Tuple[str, Dict[str, object]]] = [
    ("full", {}),
    ("gate-k", {"gating_mode": "K"}),
    ("no-gate", {"gating_mode": "none"}),
    ("no-local", {"local_context": False}),
    ("no-global", {"global_context": False}),
    ("no-kv-norm", {"kv_norm": False}),
    ("separate-conv", {"geometric_conv": False}),
]


class ModelConfig(BaseModel):
    input_dim: int = Field(16, ge=1)
    hidden_dim: int = Field(80, ge=1)
    depth: int = Field(2, ge=1)
    readout: Literal["pool_eqv_vector", "per_token"] = "pool_eqv_vector"
    pooling: Literal["mean", "sum"] = "mean"
    block: Literal["hyena", "gtransformer"] = "hyena"
    attention: Literal["dot", "cross"] = "dot"
    block_config: BlockConfig = Field(default_factory=BlockConfig)

    @classmethod
    def scaled(cls, hidden_mult: float, **kwargs) -> "ModelConfig":
        """Model with ``hidden_dim`` scaled from the default width of 80."""
        if hidden_mult <= 0:
            raise ValueError("hidden_mult must be positive")
        return cls(hidden_dim=max(1, int(round(80 * hidden_mult))), **kwargs)


class TrainConfig(BaseModel):
    epochs: int = Field(400, ge=1)
    batch_size: int = Field(8, ge=1)
    base_lr: float = Field(1e-3, gt=0)
    warmup_epochs: int = Field(10, ge=0)
    weight_decay: float = Field(1e-5, ge=0)
    train_size: int = Field(2600, ge=1)
    val_size: int = Field(200, ge=1)
    test_size: int = Field(200, ge=1)
    vocab_size: int = Field(3, ge=1)
    seq_len: int = Field(128, ge=4)
    on_the_fly: bool = True
    seed: int = 7

    @field_validator("seq_len")
    @classmethod
    def validate_seq_len(cls, v: int) -> int:
        if v % 2:
            raise ValueError("seq_len must be even")
        return v

    @model_validator(mode="after")
    def validate_schedule(self) -> "TrainConfig":
        if self.warmup_epochs >= self.epochs:
            raise ValueError("warmup_epochs must be smaller than epochs")
        return self


class BenchConfig(BaseModel):
    ops: List[str] = Field(default_factory=lambda: ["vector-conv", "vector-conv-naive"])
    lengths: List[int] = Field(default_factory=lambda: [2 ** p for p in range(12, 18)])
    trials: int = Field(3, ge=3)
    hidden_dim: int = Field(16, ge=1)
    memory_budget_bytes: Optional[int] = Field(None, ge=1)
    dtype: Literal["float32", "float64"] = "float32"
    seed: int = 0

    @field_validator("ops")
    @classmethod
    def validate_ops(cls, v: List[str]) -> List[str]:
        if not v:
            raise ValueError("At least one op must be provided")
        unknown = [op for op in v if op not in BENCH_OPS]
        if unknown:
            raise ValueError(f"unknown bench ops {unknown}; choose from {', '.join(BENCH_OPS)}")
        return v

    @field_validator("lengths")
    @classmethod
    def validate_lengths(cls, v: List[int]) -> List[int]:
        if not v or any(n < 1 for n in v):
            raise ValueError("lengths must be positive")
        return sorted(set(v))


class RunConfig(BaseModel):
    """Resolved command invocation: output locations plus derived seeds."""

    command: str
    out_dir: Path
    seed: int = 7
    config_file: Optional[Path] = None
    overrides: Dict[str, str] = Field(default_factory=dict)

    @field_validator("out_dir")
    @classmethod
    def validate_out_dir(cls, v: Path) -> Path:
        marker = v / ".write-marker"
        try:
            v.mkdir(parents=True, exist_ok=True)
            marker.write_bytes(b"")
            marker.unlink()
        except OSError as e:
            raise ValueError(f"output directory {v} is not writable: {e}") from e
        return v

    def stream_seed(self, stream: str) -> List[int]:
        """Seed entropy for one named rng stream, e.g. ``default_rng(run.stream_seed("val"))``."""
        return [self.seed, sum(ord(c) for c in stream)]


CHECK_SUITES = ("equivariance", "oracle", "gradcheck", "stability", "ablation")


class CheckConfig(BaseModel):
    """Sizes for the invariant suites; defaults are the acceptance settings."""

    suite: Literal["equivariance", "oracle", "gradcheck", "stability", "ablation"]
    seed: int = 0
    rotations: int = Field(20, ge=1)
    oracle_lengths: List[int] = Field(default_factory=lambda: [1, 2, 3, 5, 8, 16, 64, 257])
    flip_plan_row: Optional[int] = Field(None, ge=0, le=5)
    gradcheck_len: int = Field(16, ge=4)
    gradcheck_hidden: int = Field(8, ge=1)
    gradcheck_max_entries: Optional[int] = Field(6, ge=1)
    stability_scales: List[float] = Field(default_factory=lambda: [1.0, 10.0, 100.0, 1000.0])
    ablation_epochs: int = Field(3, ge=2)
    ablation_train_size: int = Field(32, ge=1)
    ablation_test_size: int = Field(16, ge=1)
    ablation_seq_len: int = Field(16, ge=4)
    ablation_hidden: int = Field(16, ge=1)

    @field_validator("gradcheck_len", "ablation_seq_len")
    @classmethod
    def validate_even(cls, v: int) -> int:
        if v % 2:
            raise ValueError("sequence lengths must be even")
        return v

    @field_validator("stability_scales")
    @classmethod
    def validate_scales(cls, v: List[float]) -> List[float]:
        if len(set(v)) < 2 or any(s <= 0 for s in v):
            raise ValueError("need at least two distinct positive scales")
        return v
