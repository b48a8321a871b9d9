from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field, field_validator

OOM = "OOM"


class BenchRecord(BaseModel):
    op: str
    n: int = Field(ge=1)
    trial: int = Field(ge=0)
    elapsed_ns: Union[int, str]
    peak_bytes: Union[int, str]

    @field_validator("elapsed_ns", "peak_bytes")
    @classmethod
    def validate_measure(cls, v: Union[int, str]) -> Union[int, str]:
        if isinstance(v, str):
            if v != OOM:
                return int(v)
            return v
        if v < 0:
            raise ValueError("measurements must be non-negative")
        return v

    @field_validator("elapsed_ns")
    @classmethod
    def validate_elapsed(cls, v: Union[int, str]) -> Union[int, str]:
        if v != OOM and int(v) <= 0:
            raise ValueError("elapsed_ns must be positive")
        return v

    @property
    def oom(self) -> bool:
        return self.elapsed_ns == OOM

    def csv_row(self) -> List[str]:
        return [self.op, str(self.n), str(self.trial), str(self.elapsed_ns), str(self.peak_bytes)]


class EpochMetrics(BaseModel):
    epoch: int = Field(ge=0)
    lr: float
    train_mse: float
    val_mse: float

    def csv_row(self) -> List[str]:
        return [str(self.epoch), repr(self.lr), repr(self.train_mse), repr(self.val_mse)]


class CheckResult(BaseModel):
    invariant: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


class CheckReport(BaseModel):
    suite: str
    results: List[CheckResult] = []

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]


class CheckpointMeta(BaseModel):
    """JSON manifest written next to a parameter checkpoint."""

    format: str = "GHK1"
    epoch: int = 0
    parameter_count: int = 0
    model: Dict[str, Any] = {}
    train: Optional[Dict[str, Any]] = None
    metrics: List[EpochMetrics] = []
