"""End-to-end simulation runs: workload in, metrics out.

One run wires a flash device to the selected scheme, replays the
request stream through a FIFO single-device queue and collects flash
totals, response times and the per-block erase histogram. Requests are
served atomically in arrival order; a request's service time is the
sum of the per-page costs its pages triggered, pages handled in
ascending order.
"""

from dataclasses import dataclass, field, asdict

from .cache import CacheConfig, DualCache, OpCost
from .flash import FlashGeometry, FlashState, LatencyParams
from .ftl import CapacityExhausted, DftlFtl, FastFtl, PageMapFtl
from .report import weighted_std_dev
from .workload import InvalidParams, WorkloadParams, generate, parse_trace

SCHEMES = ("clash", "pagemap", "dftl", "fast")


@dataclass(frozen=True)
class RunConfig:
    scheme: str = "clash"
    # geometry: logical space plus an over-provision tail of spare blocks
    page_size_bytes: int = 2048
    pages_per_block: int = 64
    logical_blocks: int = 8192
    over_provision: float = 0.03
    read_us: float = 130.9
    write_us: float = 405.9
    erase_us: float = 2000.0
    # cache shape (clash)
    p_capacity_pages: int = 128
    b_capacity_blocks: int = 2
    b_policy: str = "lru"
    # ftl knobs
    gc_threshold: int = 2
    cmt_capacity: int = 2048
    entries_per_tp: int = 512
    t_slack_blocks: int = 4
    rw_log_blocks: int = 6
    # workload (ignored when a trace is given)
    request_count: int = 60000
    mean_req_size: int = 4
    size_mode: str = "fixed"
    write_rate: float = 0.8
    seq_rate: float = 0.0
    locality_rate: float = 0.0
    mean_interarrival_ms: float = 200.0
    seed: int = 1
    trace: str = None
    final_flush: bool = False

    @property
    def logical_pages(self) -> int:
        return self.logical_blocks * self.pages_per_block

    @property
    def spare_blocks(self) -> int:
        return int(round(self.logical_blocks * self.over_provision))

    @property
    def total_blocks(self) -> int:
        return self.logical_blocks + self.spare_blocks


@dataclass
class RunMetrics:
    scheme: str
    requests: int = 0
    mean_response_ms: float = 0.0
    reads: int = 0
    writes: int = 0
    erases: int = 0
    wsd: float = 0.0
    read_hit_rate: float = 0.0
    write_hit_rate: float = 0.0
    unwritten_reads: int = 0
    blocks_counted: int = 0
    erase_histogram: list = field(default_factory=list)
    final_flush_cost: OpCost = None
    valid: bool = True
    error: str = None


def build_flash(config: RunConfig) -> FlashState:
    geometry = FlashGeometry(config.page_size_bytes, config.pages_per_block,
                             config.total_blocks)
    latencies = LatencyParams(config.read_us, config.write_us, config.erase_us)
    return FlashState(geometry, latencies)


def build_scheme(config: RunConfig, flash: FlashState):
    """The spare blocks are part of every device, but only translation
    schemes can place data in them; the direct-mapped cache never can."""
    logical_pages = config.logical_pages
    if config.scheme == "clash":
        cc = CacheConfig(config.p_capacity_pages, config.b_capacity_blocks,
                         config.b_policy)
        return DualCache(flash, cc, config.logical_blocks)
    if config.scheme == "pagemap":
        return PageMapFtl(flash, logical_pages, config.gc_threshold)
    if config.scheme == "dftl":
        return DftlFtl(flash, logical_pages, config.gc_threshold,
                       config.cmt_capacity, config.entries_per_tp,
                       config.t_slack_blocks)
    if config.scheme == "fast":
        return FastFtl(flash, logical_pages, config.rw_log_blocks)
    raise InvalidParams(f"unknown scheme {config.scheme!r}")


def workload_params(config: RunConfig) -> WorkloadParams:
    return WorkloadParams(address_space_pages=config.logical_pages,
                          request_count=config.request_count,
                          write_rate=config.write_rate,
                          seq_rate=config.seq_rate,
                          locality_rate=config.locality_rate,
                          mean_req_size=config.mean_req_size,
                          size_mode=config.size_mode,
                          mean_interarrival_ms=config.mean_interarrival_ms,
                          seed=config.seed)


def load_requests(config: RunConfig):
    if config.trace is not None:
        with open(config.trace) as fh:
            requests = parse_trace(fh)
        space = config.logical_pages
        for i, r in enumerate(requests):
            if r.start + r.size > space:
                raise InvalidParams(
                    f"trace request {i} reaches page {r.start + r.size}, "
                    f"logical space has {space}")
        return requests
    return generate(workload_params(config))


def run(config: RunConfig) -> RunMetrics:
    """Simulate one configuration and return its metrics.

    The queueing model is a single device serving whole requests in
    FIFO order: service starts at max(arrival, previous completion).
    A request's response covers only its synchronous work; deferred
    reclamation still occupies the device and pushes back later
    arrivals. A capacity failure aborts the run; partial metrics are
    returned flagged invalid.
    """
    requests = load_requests(config)
    flash = build_flash(config)
    scheme = build_scheme(config, flash)
    metrics = RunMetrics(scheme=config.scheme)
    free_at = 0.0
    response_sum = 0.0
    served = 0
    error = None
    try:
        for req in requests:
            arrival = req.arrival_ms
            start = req.start
            end = start + req.size
            lat_us = 0.0
            def_us = 0.0
            if req.is_write:
                handle = scheme.handle_write
            else:
                handle = scheme.handle_read
            for lpn in range(start, end):
                cost = handle(lpn)
                lat_us += cost.latency_us
                def_us += cost.deferred_us
            begin = arrival if arrival > free_at else free_at
            response_sum += begin + lat_us / 1000.0 - arrival
            free_at = begin + (lat_us + def_us) / 1000.0
            served += 1
        if config.final_flush:
            metrics.final_flush_cost = scheme.flush_all()
    except CapacityExhausted as exc:
        error = f"capacity exhausted after {served} requests: {exc}"

    counted = scheme.blocks_counted()
    hist = flash.erase_histogram()[:counted]
    metrics.requests = served
    metrics.mean_response_ms = response_sum / served if served else 0.0
    metrics.reads = flash.reads
    metrics.writes = flash.writes
    metrics.erases = flash.erases
    metrics.wsd = weighted_std_dev(hist)
    metrics.blocks_counted = counted
    metrics.erase_histogram = hist
    metrics.unwritten_reads = scheme.unwritten_reads
    if isinstance(scheme, DualCache):
        metrics.read_hit_rate = (scheme.read_hits / scheme.read_lookups
                                 if scheme.read_lookups else 0.0)
        metrics.write_hit_rate = (scheme.write_hits / scheme.write_lookups
                                  if scheme.write_lookups else 0.0)
    else:
        metrics.read_hit_rate, metrics.write_hit_rate = scheme.hit_rates()
    if error is not None:
        metrics.valid = False
        metrics.error = error
    return metrics


def config_as_dict(config: RunConfig) -> dict:
    return asdict(config)
