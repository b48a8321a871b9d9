"""Runtime and peak-allocation scaling benchmark.

Each (op, N) pair gets one untimed warmup call and then ``trials`` timed calls on a
single thread. Elapsed time comes from ``time.perf_counter_ns``; peak bytes are the
``tracemalloc`` high-water mark, reset before every call, which numpy reports its array
buffers to. A run whose peak exceeds the configured budget, or that raises
``MemoryError``, is recorded as ``OOM`` and the op is not run at larger N.
"""
import csv
import logging
import time
import tracemalloc
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from ghyena.autodiff.params import ParamStore
from ghyena.autodiff.tensor import Tensor, default_dtype
from ghyena.core.errors import DataIOError
from ghyena.longconv.ops import GeometricConvParams, geometric_long_conv, scalar_long_conv, vector_long_conv
from ghyena.longconv.oracles import vector_long_conv_naive
from ghyena.nn.attention import GTransformerBlock
from ghyena.nn.block import HyenaBlock
from ghyena.nn.geometry import GeometricSequence
from ghyena.schemas.config import BlockConfig, BenchConfig
from ghyena.schemas.records import OOM, BenchRecord

logger = logging.getLogger(__name__)

CSV_HEADER = ["op", "n", "trial", "elapsed_ns", "peak_bytes"]

Workload = Callable[[], object]


class BudgetExceeded(Exception):
    """Peak allocation went past the configured budget."""


def make_workload(op: str, n: int, hidden_dim: int, rng: np.random.Generator) -> Workload:
    """Inputs for one (op, N) pair, built outside the timed region."""
    if op == "scalar-conv":
        q, k = Tensor(rng.normal(size=(n, hidden_dim))), Tensor(rng.normal(size=(n, hidden_dim)))
        return lambda: scalar_long_conv(q, k)
    if op == "vector-conv":
        q, k = Tensor(rng.normal(size=(n, 3))), Tensor(rng.normal(size=(n, 3)))
        return lambda: vector_long_conv(q, k)
    if op == "vector-conv-naive":
        q, k = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
        return lambda: vector_long_conv_naive(q, k)
    if op == "geometric-conv":
        params = GeometricConvParams.from_values(rng.normal(size=5), rng.normal(size=hidden_dim))
        a1, a2 = Tensor(rng.normal(size=(n, 1))), Tensor(rng.normal(size=(n, 1)))
        r1, r2 = Tensor(rng.normal(size=(n, 3))), Tensor(rng.normal(size=(n, 3)))
        return lambda: geometric_long_conv(a1, r1, a2, r2, params)
    if op in ("ghyena-block", "gtrans-block"):
        scope = ParamStore().scope("bench")
        config = BlockConfig()
        if op == "ghyena-block":
            block = HyenaBlock(scope, hidden_dim, config, rng)
        else:
            block = GTransformerBlock(scope, hidden_dim, config, rng)
        seq = GeometricSequence(f=rng.normal(size=(n, hidden_dim)), x=rng.normal(size=(n, 3)))
        return lambda: block(seq)
    raise ValueError(f"unknown bench op {op!r}")


def measure(fn: Workload, budget: Optional[int] = None) -> tuple:
    """(elapsed_ns, peak_bytes) of one call; tracemalloc must already be tracing."""
    tracemalloc.reset_peak()
    base, _ = tracemalloc.get_traced_memory()
    start = time.perf_counter_ns()
    fn()
    elapsed = time.perf_counter_ns() - start
    _, peak = tracemalloc.get_traced_memory()
    peak_bytes = max(peak - base, 0)
    if budget is not None and peak_bytes > budget:
        raise BudgetExceeded(f"peak {peak_bytes} bytes over budget {budget}")
    return max(elapsed, 1), peak_bytes


def run_benchmark(cfg: BenchConfig, on_record: Optional[Callable[[BenchRecord], None]] = None) -> List[BenchRecord]:
    records: List[BenchRecord] = []

    def emit(record: BenchRecord) -> None:
        records.append(record)
        if on_record is not None:
            on_record(record)

    rng = np.random.default_rng(cfg.seed)
    started = tracemalloc.is_tracing()
    if not started:
        tracemalloc.start()
    try:
        with default_dtype(cfg.dtype):
            for op in cfg.ops:
                exhausted = False
                for n in cfg.lengths:
                    if not exhausted:
                        try:
                            fn = make_workload(op, n, cfg.hidden_dim, rng)
                            measure(fn, cfg.memory_budget_bytes)
                            rows = [measure(fn, cfg.memory_budget_bytes) for _ in range(cfg.trials)]
                        except (MemoryError, BudgetExceeded) as e:
                            logger.warning("%s at N=%d out of memory: %s", op, n, e)
                            exhausted = True
                    if exhausted:
                        for trial in range(cfg.trials):
                            emit(BenchRecord(op=op, n=n, trial=trial, elapsed_ns=OOM, peak_bytes=OOM))
                        continue
                    for trial, (elapsed, peak) in enumerate(rows):
                        emit(BenchRecord(op=op, n=n, trial=trial, elapsed_ns=elapsed, peak_bytes=peak))
                    logger.info("%s N=%d median %.3f ms peak %d bytes", op, n,
                                np.median([r[0] for r in rows]) / 1e6, max(r[1] for r in rows))
    finally:
        if not started:
            tracemalloc.stop()
    return records


def fit_exponent(ns: Sequence[float], values: Sequence[float]) -> float:
    """Slope of the least-squares line through (log N, log value)."""
    ns, values = np.asarray(ns, dtype=float), np.asarray(values, dtype=float)
    if ns.size < 2 or np.unique(ns).size < 2:
        raise ValueError("need at least two distinct lengths to fit an exponent")
    if np.any(ns <= 0) or np.any(values <= 0):
        raise ValueError("lengths and values must be positive")
    slope, _ = np.polyfit(np.log(ns), np.log(values), 1)
    return float(slope)


def medians(records: Sequence[BenchRecord], op: str, field: str = "elapsed_ns",
            lengths: Optional[Sequence[int]] = None) -> Dict[int, float]:
    """Median of ``field`` per N for one op, OOM rows excluded."""
    by_n: Dict[int, List[float]] = {}
    for r in records:
        if r.op != op or r.oom or (lengths is not None and r.n not in lengths):
            continue
        by_n.setdefault(r.n, []).append(float(getattr(r, field)))
    return {n: float(np.median(v)) for n, v in sorted(by_n.items())}


def op_exponent(records: Sequence[BenchRecord], op: str, field: str = "elapsed_ns",
                lengths: Optional[Sequence[int]] = None) -> Optional[float]:
    points = medians(records, op, field, lengths)
    if len(points) < 2:
        return None
    values = [max(v, 1.0) for v in points.values()]
    return fit_exponent(list(points), values)


def time_ratio(records: Sequence[BenchRecord], slow_op: str, fast_op: str, n: int) -> Optional[float]:
    """Median runtime of ``slow_op`` over ``fast_op`` at length ``n``."""
    slow, fast = medians(records, slow_op).get(n), medians(records, fast_op).get(n)
    if slow is None or fast is None:
        return None
    return slow / fast


def summarize(records: Sequence[BenchRecord]) -> List[Dict[str, object]]:
    rows = []
    for op in dict.fromkeys(r.op for r in records):
        ok = [r for r in records if r.op == op and not r.oom]
        oom = sorted({r.n for r in records if r.op == op and r.oom})
        rows.append({
            "op": op,
            "time_exponent": op_exponent(records, op),
            "memory_exponent": op_exponent(records, op, "peak_bytes"),
            "max_n": max((r.n for r in ok), default=None),
            "oom_from": oom[0] if oom else None,
        })
    return rows


def format_summary(rows: Sequence[Dict[str, object]]) -> str:
    def num(v: object) -> str:
        return "-" if v is None else f"{v:.2f}" if isinstance(v, float) else str(v)

    lines = [f"{'op':<20} {'time exp':>9} {'mem exp':>9} {'max N':>8} {'OOM from':>9}"]
    for row in rows:
        lines.append(f"{row['op']:<20} {num(row['time_exponent']):>9} {num(row['memory_exponent']):>9} "
                     f"{num(row['max_n']):>8} {num(row['oom_from']):>9}")
    return "\n".join(lines)


def write_bench_csv(path: Union[str, Path], records: Sequence[BenchRecord]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            writer.writerows(r.csv_row() for r in records)
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e


def read_bench_csv(path: Union[str, Path]) -> List[BenchRecord]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CSV_HEADER:
                raise DataIOError(f"{path}: unexpected header {reader.fieldnames}")
            return [BenchRecord.model_validate(row) for row in reader]
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e}") from e
