from .run_benchmark import (
    convergence_benchmark,
    data_efficiency_benchmark,
    pretraining_benchmark,
    resolve_workers,
    run_method,
)

__all__ = [
    "convergence_benchmark",
    "data_efficiency_benchmark",
    "pretraining_benchmark",
    "resolve_workers",
    "run_method",
]
