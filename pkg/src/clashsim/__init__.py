"""Flash storage simulator: a dual-space page/block cache in front of
raw NAND, plus page-map, DFTL and FAST translation layers to compare
against, with synthetic workloads and CSV reporting."""

__version__ = "0.1.0"

from .cache import CacheConfig, DualCache, OpCost, ZERO_COST, cache_metadata_bytes
from .engine import SCHEMES, RunConfig, RunMetrics, run
from .flash import (
    FlashError,
    FlashGeometry,
    FlashState,
    InvalidateFreePage,
    LatencyParams,
    NotErased,
    OutOfRange,
    PageState,
    ReadOfNonValidPage,
    SequentialViolation,
)
from .ftl import CapacityExhausted, DftlFtl, FastFtl, PageMapFtl
from .report import SummaryRow, read_csv, weighted_std_dev, write_csv
from .workload import (
    NonMonotonicArrival,
    ParseError,
    Request,
    WorkloadParams,
    derive_seed,
    generate,
    parse_trace,
    stream_stats,
    sweep,
)

__all__ = [
    "CacheConfig", "DualCache", "OpCost", "ZERO_COST", "cache_metadata_bytes",
    "SCHEMES", "RunConfig", "RunMetrics", "run",
    "FlashError", "FlashGeometry", "FlashState", "InvalidateFreePage",
    "LatencyParams", "NotErased", "OutOfRange", "PageState",
    "ReadOfNonValidPage", "SequentialViolation",
    "CapacityExhausted", "DftlFtl", "FastFtl", "PageMapFtl",
    "SummaryRow", "read_csv", "weighted_std_dev", "write_csv",
    "NonMonotonicArrival", "ParseError", "Request", "WorkloadParams",
    "derive_seed", "generate", "parse_trace", "stream_stats", "sweep",
]
