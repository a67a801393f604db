"""Synthetic request stream generation and trace parsing.

A request stream is a list of (arrival_ms, is_write, start, size)
tuples over a flat logical page space. Generation is driven by three
per-request probabilities: a sequential draw starts exactly where the
previous request ended (with seq_rate 1 every request continues the
last), a locality draw lands within one page of the previous start,
anything else picks a uniform start. Inter-arrival times are
exponential, sizes are fixed at the mean by default.

Everything is reproducible from the seed alone.
"""

import hashlib
import math
import random
from collections import namedtuple
from dataclasses import dataclass, replace

Request = namedtuple("Request", "arrival_ms is_write start size")


class InvalidParams(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class NonMonotonicArrival(ParseError):
    pass


@dataclass(frozen=True)
class WorkloadParams:
    address_space_pages: int = 524288      # 1 GB of 2 KB pages
    request_count: int = 60000
    write_rate: float = 0.8
    seq_rate: float = 0.0
    locality_rate: float = 0.0
    mean_req_size: int = 4
    size_mode: str = "fixed"               # fixed | exponential
    mean_interarrival_ms: float = 200.0
    seed: int = 1

    def __post_init__(self):
        if self.address_space_pages < 1:
            raise InvalidParams("address space must hold at least one page")
        if self.request_count < 0:
            raise InvalidParams("request_count cannot be negative")
        for name in ("write_rate", "seq_rate", "locality_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParams(f"{name} must lie in [0, 1], got {v}")
        if self.seq_rate + self.locality_rate > 1.0 + 1e-12:
            raise InvalidParams("seq_rate + locality_rate must not exceed 1")
        if not 1 <= self.mean_req_size <= self.address_space_pages:
            raise InvalidParams("mean_req_size must fit the address space")
        if self.size_mode not in ("fixed", "exponential"):
            raise InvalidParams(f"unknown size_mode {self.size_mode!r}")
        if self.mean_interarrival_ms <= 0:
            raise InvalidParams("mean_interarrival_ms must be positive")


def generate(params: WorkloadParams):
    """Build the request list for the given parameters.

    Per request the draws happen in a fixed order (inter-arrival,
    read/write, size, placement) so streams are stable across runs.
    """
    rng = random.Random(params.seed)
    space = params.address_space_pages
    seq = params.seq_rate
    seq_or_local = params.seq_rate + params.locality_rate
    fixed_size = params.size_mode == "fixed"
    mean_size = params.mean_req_size
    inv_ia = 1.0 / params.mean_interarrival_ms
    out = []
    t = 0.0
    prev_start = 0
    prev_size = 0
    for _ in range(params.request_count):
        dt = rng.expovariate(inv_ia)
        while dt <= 0.0:
            dt = rng.expovariate(inv_ia)
        t += dt
        is_write = rng.random() < params.write_rate
        if fixed_size:
            size = mean_size
        else:
            size = math.ceil(rng.expovariate(1.0 / mean_size))
            size = max(1, min(size, space))
        u = rng.random()
        if u < seq:
            start = prev_start + prev_size
            if start + size > space:
                start = 0  # wrap at the end of the space
        elif u < seq_or_local:
            while True:
                delta = round(rng.gauss(0.0, 1.0))
                if -2 < delta < 2:
                    break
            start = prev_start + delta
            if start < 0:
                start = 0
            elif start + size > space:
                start = space - size
        else:
            start = rng.randint(0, space - size)
        out.append(Request(t, is_write, start, size))
        prev_start = start
        prev_size = size
    return out


def parse_trace(lines):
    """Parse '<arrival_ms> <R|W> <start_lpn> <size_pages>' lines.

    '#' starts a comment, blank lines are skipped. Arrivals must be
    non-decreasing.
    """
    out = []
    last_t = None
    for no, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        fields = text.split()
        if len(fields) != 4:
            raise ParseError(f"line {no}: expected 4 fields, got {len(fields)}",
                             line=no)
        try:
            t = float(fields[0])
            start = int(fields[2])
            size = int(fields[3])
        except ValueError:
            raise ParseError(f"line {no}: malformed number", line=no) from None
        op = fields[1].upper()
        if op not in ("R", "W"):
            raise ParseError(f"line {no}: op must be R or W, got {fields[1]!r}",
                             line=no)
        if t < 0 or start < 0 or size < 1:
            raise ParseError(f"line {no}: values out of range", line=no)
        if last_t is not None and t < last_t:
            raise NonMonotonicArrival(
                f"line {no}: arrival {t} before previous {last_t}", line=no)
        last_t = t
        out.append(Request(t, op == "W", start, size))
    return out


_SWEEP_AXES = ("seq_rate", "locality_rate", "mean_req_size", "request_count")


def derive_seed(base_seed, axis, value):
    """Stable per-point seed for sweeps, independent of process state."""
    key = f"{base_seed}:{axis}:{value!r}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def sweep(base: WorkloadParams, axis: str, values):
    """One WorkloadParams per value along the given axis.

    Each point gets its own seed derived from (base.seed, axis, value)
    so points are decorrelated but reproducible.
    """
    if axis not in _SWEEP_AXES:
        raise InvalidParams(f"unknown sweep axis {axis!r}, "
                            f"expected one of {', '.join(_SWEEP_AXES)}")
    out = []
    for v in values:
        out.append(replace(base, **{axis: v},
                           seed=derive_seed(base.seed, axis, v)))
    return out


def stream_stats(requests):
    """Measured properties of a request list, for validation."""
    n = len(requests)
    if n == 0:
        return {"requests": 0, "seq_fraction": 0.0, "write_fraction": 0.0,
                "mean_interarrival_ms": 0.0, "mean_size": 0.0}
    seq_hits = 0
    writes = 0
    prev_end = 0
    prev_t = 0.0
    gap_sum = 0.0
    size_sum = 0
    for r in requests:
        if r.start == prev_end or (r.start == 0 and prev_end > 0):
            # wrap when the previous request reached the end of the space
            seq_hits += 1
        prev_end = r.start + r.size
        if r.is_write:
            writes += 1
        gap_sum += r.arrival_ms - prev_t
        size_sum += r.size
        prev_t = r.arrival_ms
    return {"requests": n,
            "seq_fraction": seq_hits / n,
            "write_fraction": writes / n,
            "mean_interarrival_ms": gap_sum / n,
            "mean_size": size_sum / n}
