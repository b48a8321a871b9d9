from ghyena.schemas.config import ABLATION_ROWS, BenchConfig, BlockConfig, ModelConfig, RunConfig, TrainConfig
from ghyena.schemas.records import OOM, BenchRecord, CheckpointMeta, CheckReport, CheckResult, EpochMetrics

__all__ = [
    "ABLATION_ROWS",
    "OOM",
    "BenchConfig",
    "BenchRecord",
    "BlockConfig",
    "CheckReport",
    "CheckResult",
    "CheckpointMeta",
    "EpochMetrics",
    "ModelConfig",
    "RunConfig",
    "TrainConfig",
]
