"""Wear metrics and CSV output.

The wear figure is the population standard deviation of per-block
erase counts divided by their mean (a coefficient of variation), over
however many blocks the scheme can actually reach. Zero means every
counted block wore identically; an all-zero histogram also reports
zero.
"""

import csv
import math
from dataclasses import dataclass, fields

CSV_COLUMNS = ("scheme", "axis", "axis_value", "seed", "mean_response_ms",
               "reads", "writes", "erases", "wsd", "read_hit_rate",
               "write_hit_rate", "unwritten_reads", "blocks_counted")


def weighted_std_dev(histogram) -> float:
    """Normalized spread of erase counts: population stddev / mean."""
    n = len(histogram)
    if n == 0:
        raise ValueError("histogram is empty")
    mean = math.fsum(histogram) / n
    if mean == 0.0:
        return 0.0
    var = math.fsum((x - mean) ** 2 for x in histogram) / n
    return math.sqrt(var) / mean


@dataclass(frozen=True)
class SummaryRow:
    scheme: str
    axis: str
    axis_value: float
    seed: int
    mean_response_ms: float
    reads: int
    writes: int
    erases: int
    wsd: float
    read_hit_rate: float
    write_hit_rate: float
    unwritten_reads: int
    blocks_counted: int


assert tuple(f.name for f in fields(SummaryRow)) == CSV_COLUMNS


def make_row(metrics, axis, axis_value, seed) -> SummaryRow:
    return SummaryRow(scheme=metrics.scheme,
                      axis=axis,
                      axis_value=axis_value,
                      seed=seed,
                      mean_response_ms=metrics.mean_response_ms,
                      reads=metrics.reads,
                      writes=metrics.writes,
                      erases=metrics.erases,
                      wsd=metrics.wsd,
                      read_hit_rate=metrics.read_hit_rate,
                      write_hit_rate=metrics.write_hit_rate,
                      unwritten_reads=metrics.unwritten_reads,
                      blocks_counted=metrics.blocks_counted)


def _fmt(name, value):
    if name == "mean_response_ms":
        return f"{value:.3f}"  # device latencies are microseconds, report ms
    if name in ("wsd", "read_hit_rate", "write_hit_rate"):
        return f"{value:.6f}"
    return str(value)


def sort_key(row: SummaryRow):
    return (row.scheme, row.axis, float(row.axis_value), row.seed)


def write_csv(rows, path) -> None:
    """Write summary rows sorted by (scheme, axis, axis_value, seed).

    All rows must carry exactly the summary schema; anything else is a
    schema mismatch and an error.
    """
    if not rows:
        raise ValueError("no rows to write")
    for row in rows:
        if not isinstance(row, SummaryRow):
            raise ValueError(f"schema mismatch: {type(row).__name__} "
                             "is not a summary row")
    ordered = sorted(rows, key=sort_key)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in ordered:
            writer.writerow([_fmt(c, getattr(row, c)) for c in CSV_COLUMNS])


def read_csv(path):
    """Parse a summary CSV back into SummaryRow objects."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError("schema mismatch: unexpected columns")
        for rec in reader:
            out.append(SummaryRow(
                scheme=rec["scheme"],
                axis=rec["axis"],
                axis_value=float(rec["axis_value"]),
                seed=int(rec["seed"]),
                mean_response_ms=float(rec["mean_response_ms"]),
                reads=int(rec["reads"]),
                writes=int(rec["writes"]),
                erases=int(rec["erases"]),
                wsd=float(rec["wsd"]),
                read_hit_rate=float(rec["read_hit_rate"]),
                write_hit_rate=float(rec["write_hit_rate"]),
                unwritten_reads=int(rec["unwritten_reads"]),
                blocks_counted=int(rec["blocks_counted"])))
    return out
