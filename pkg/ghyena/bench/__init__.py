from ghyena.bench.harness import (
    fit_exponent,
    make_workload,
    op_exponent,
    read_bench_csv,
    run_benchmark,
    summarize,
    time_ratio,
    write_bench_csv,
)

__all__ = [
    "fit_exponent",
    "make_workload",
    "op_exponent",
    "read_bench_csv",
    "run_benchmark",
    "summarize",
    "time_ratio",
    "write_bench_csv",
]
