"""Baseline flash translation layers: page mapping, DFTL and FAST.

All three expose the same per-page handle_read / handle_write contract
as the dual-space cache, so the engine can drive any scheme. Costs are
derived from the device counters around each call, which keeps the
accounting exact no matter how much garbage collection a write drags
in.

Latency is split in two. Work the request must wait for (its own page
ops, mapping fetches and write-backs, the erase of a block being
activated for it) is synchronous. Reclamation the controller can run
off the request path (garbage collection copies and erases, log merge
traffic) is deferred: it occupies the device and can delay later
arrivals, but does not stretch the response of the request that
happened to trigger it.

The device starts completely dirty, so a block taken from a free pool
is erased on first use.
"""

import heapq
from collections import OrderedDict, deque

from .cache import OpCost
from .flash import FlashState, OutOfRange, _VALID


class CapacityExhausted(Exception):
    """Live data no longer fits the physical space."""


class _CostModel:
    """Shared counter-delta accounting with a deferred-work bucket."""

    def _begin(self):
        flash = self.flash
        self._def_us = 0.0
        return flash.reads, flash.writes, flash.erases

    def _finish(self, r0, w0, e0):
        flash = self.flash
        lat = flash.latencies
        dr = flash.reads - r0
        dw = flash.writes - w0
        de = flash.erases - e0
        total = dr * lat.read_us + dw * lat.write_us + de * lat.erase_us
        d = self._def_us
        return OpCost(dr, dw, de, total - d, d)

    def _defer(self, fn, *args):
        """Run fn, booking all flash time it causes as deferred."""
        flash = self.flash
        lat = flash.latencies
        r0, w0, e0 = flash.reads, flash.writes, flash.erases
        fn(*args)
        self._def_us += ((flash.reads - r0) * lat.read_us
                         + (flash.writes - w0) * lat.write_us
                         + (flash.erases - e0) * lat.erase_us)


class PageMapFtl(_CostModel):
    """Idealized page-level mapping with an in-RAM table.

    Writes stream into a frontier block taken from the free pool.
    When fewer than gc_threshold free blocks remain, greedy garbage
    collection erases the block with the most stale pages, copying any
    still-valid pages to the frontier first. Ties go to the block with
    the lowest erase count, then the lowest block number.
    """

    name = "pagemap"

    def __init__(self, flash: FlashState, logical_pages: int = None,
                 gc_threshold: int = 2):
        self.flash = flash
        g = flash.geometry
        self.logical_pages = (logical_pages if logical_pages is not None
                              else g.total_pages)
        if self.logical_pages > g.total_pages:
            raise ValueError("logical space larger than the device")
        if gc_threshold < 1:
            raise ValueError("gc_threshold must be at least 1")
        self.gc_threshold = gc_threshold
        self._ppb = g.pages_per_block
        self._def_us = 0.0
        self.l2p = {}            # virtual page -> flash page
        self.owner = {}          # flash page -> virtual page
        self.pool = deque(range(g.block_count))
        self.used = set()        # retired blocks, candidates for GC
        self.active = None       # frontier block
        self._heap = []          # (valid, erase_count, block), lazy
        self.gc_runs = 0
        self.unwritten_reads = 0
        self.read_lookups = 0
        self.write_lookups = 0

    # -- frontier and garbage collection --------------------------------

    def _activate(self):
        if not self.pool:
            raise CapacityExhausted("free block pool is empty")
        b = self.pool.popleft()
        if self.flash.write_cursor[b] != 0:
            self.flash.erase_block(b)  # dirty block, erase before use
        return b

    def _frontier_page(self):
        flash = self.flash
        b = self.active
        if b is None or flash.write_cursor[b] == self._ppb:
            if b is not None:
                self.used.add(b)
                heapq.heappush(self._heap, (flash.valid_count[b],
                                            flash.erase_count[b], b))
            b = self.active = self._activate()
        return b * self._ppb + flash.write_cursor[b]

    def _invalidate(self, ppn):
        flash = self.flash
        flash.invalidate_page(ppn)
        del self.owner[ppn]
        b = ppn // self._ppb
        if b in self.used:
            heapq.heappush(self._heap, (flash.valid_count[b],
                                        flash.erase_count[b], b))

    def _map_write(self, vpn):
        old = self.l2p.get(vpn)
        if old is not None:
            self._invalidate(old)
        ppn = self._frontier_page()
        self.flash.write_page(ppn)
        self.l2p[vpn] = ppn
        self.owner[ppn] = vpn
        return ppn

    def _pick_victim(self):
        flash = self.flash
        heap = self._heap
        used = self.used
        while heap:
            valid, er, b = heapq.heappop(heap)
            if b in used and flash.valid_count[b] == valid \
                    and flash.erase_count[b] == er:
                if valid == self._ppb:
                    # nothing reclaimable anywhere
                    raise CapacityExhausted("all collectable blocks fully valid")
                return b
        raise CapacityExhausted("no collectable blocks")

    def _gc_once(self):
        flash = self.flash
        victim = self._pick_victim()
        base = victim * self._ppb
        state = flash.page_state
        for off in range(self._ppb):
            ppn = base + off
            if state[ppn] == _VALID:
                flash.read_page(ppn)
                vpn = self.owner.pop(ppn)
                new = self._frontier_page()
                flash.write_page(new)
                self.l2p[vpn] = new
                self.owner[new] = vpn
        flash.erase_block(victim)
        self.used.discard(victim)
        self.pool.append(victim)
        self.gc_runs += 1

    def _maybe_gc(self):
        # data GC stalls the write that drained the pool, so it stays in
        # the foreground; translation housekeeping does not (see DftlFtl)
        while len(self.pool) < self.gc_threshold:
            self._gc_once()

    # -- public contract -------------------------------------------------

    def handle_write(self, lpn: int) -> OpCost:
        if not 0 <= lpn < self.logical_pages:
            raise OutOfRange(f"lpn {lpn} outside logical space")
        self.write_lookups += 1
        snap = self._begin()
        self._map_write(lpn)
        self._maybe_gc()
        return self._finish(*snap)

    def handle_read(self, lpn: int) -> OpCost:
        if not 0 <= lpn < self.logical_pages:
            raise OutOfRange(f"lpn {lpn} outside logical space")
        self.read_lookups += 1
        flash = self.flash
        ppn = self.l2p.get(lpn)
        if ppn is None:
            # never written: the device read still happens, returns junk
            self.unwritten_reads += 1
            lat = flash.read_page_raw(lpn)
        else:
            lat = flash.read_page(ppn)
        return OpCost(1, 0, 0, lat)

    def flush_all(self) -> OpCost:
        return OpCost()

    def blocks_counted(self) -> int:
        return self.flash.geometry.block_count

    def hit_rates(self):
        return 0.0, 0.0


class DftlFtl(PageMapFtl):
    """Page mapping with the translation table itself held in flash.

    A bounded recency-ordered cached mapping table (cmt) keeps the hot
    entries in RAM. Full translation pages live in flash in a small
    dedicated region sized to just fit the table plus a little slack;
    rewriting translation pages churns that region, and its own greedy
    garbage collection runs deferred. A cmt miss costs a synchronous
    read of the owning translation page (when one exists); evicting a
    dirty entry rewrites its translation page first (read-modify-write,
    also synchronous). With a cmt at least as large as the logical
    space nothing ever spills, the region is never even reserved, and
    the scheme degenerates to plain page mapping.
    """

    name = "dftl"

    def __init__(self, flash: FlashState, logical_pages: int = None,
                 gc_threshold: int = 2, cmt_capacity: int = 2048,
                 entries_per_tp: int = 512, t_slack_blocks: int = 4):
        super().__init__(flash, logical_pages, gc_threshold)
        if cmt_capacity < 1 or entries_per_tp < 1:
            raise ValueError("cmt_capacity and entries_per_tp must be positive")
        if t_slack_blocks < 1:
            raise ValueError("t_slack_blocks must be at least 1")
        self.cmt_capacity = cmt_capacity
        self.entries_per_tp = entries_per_tp
        self.tp_base = self.logical_pages  # translation pages as virtual pages
        self.tvpns = -(-self.logical_pages // entries_per_tp)
        self.t_region_blocks = -(-self.tvpns // self._ppb) + t_slack_blocks
        self.t_gc_threshold = min(2, self.t_region_blocks - 1)
        self.cmt = OrderedDict()           # lpn -> dirty flag
        self.t_pool = None                 # reserved lazily on first spill
        self.t_used = set()
        self.t_active = None
        self._t_heap = []
        self.t_gc_runs = 0
        self.cmt_read_lookups = 0
        self.cmt_read_hits = 0
        self.cmt_write_lookups = 0
        self.cmt_write_hits = 0

    # -- translation-page region ------------------------------------------

    def _t_reserve(self):
        if len(self.pool) <= self.t_region_blocks:
            raise CapacityExhausted("no room left for the translation region")
        self.t_pool = deque(self.pool.pop()
                            for _ in range(self.t_region_blocks))

    def _t_activate(self):
        if not self.t_pool:
            raise CapacityExhausted("translation region pool is empty")
        b = self.t_pool.popleft()
        if self.flash.write_cursor[b] != 0:
            self.flash.erase_block(b)
        return b

    def _t_frontier_page(self):
        flash = self.flash
        b = self.t_active
        if b is None or flash.write_cursor[b] == self._ppb:
            if b is not None:
                self.t_used.add(b)
                heapq.heappush(self._t_heap, (flash.valid_count[b],
                                              flash.erase_count[b], b))
            b = self.t_active = self._t_activate()
        return b * self._ppb + flash.write_cursor[b]

    def _t_invalidate(self, ppn):
        flash = self.flash
        flash.invalidate_page(ppn)
        del self.owner[ppn]
        b = ppn // self._ppb
        if b in self.t_used:
            heapq.heappush(self._t_heap, (flash.valid_count[b],
                                          flash.erase_count[b], b))

    def _t_map_write(self, t):
        if self.t_pool is None:
            self._t_reserve()
        tvpn = self.tp_base + t
        old = self.l2p.get(tvpn)
        if old is not None:
            self._t_invalidate(old)
        ppn = self._t_frontier_page()
        self.flash.write_page(ppn)
        self.l2p[tvpn] = ppn
        self.owner[ppn] = tvpn
        self._t_maybe_gc()

    def _t_pick_victim(self):
        flash = self.flash
        heap = self._t_heap
        used = self.t_used
        while heap:
            valid, er, b = heapq.heappop(heap)
            if b in used and flash.valid_count[b] == valid \
                    and flash.erase_count[b] == er:
                if valid == self._ppb:
                    raise CapacityExhausted(
                        "translation region blocks all fully valid")
                return b
        raise CapacityExhausted("no collectable translation blocks")

    def _t_gc_once(self):
        flash = self.flash
        victim = self._t_pick_victim()
        base = victim * self._ppb
        state = flash.page_state
        for off in range(self._ppb):
            ppn = base + off
            if state[ppn] == _VALID:
                flash.read_page(ppn)
                tvpn = self.owner.pop(ppn)
                new = self._t_frontier_page()
                flash.write_page(new)
                self.l2p[tvpn] = new
                self.owner[new] = tvpn
        flash.erase_block(victim)
        self.t_used.discard(victim)
        self.t_pool.append(victim)
        self.t_gc_runs += 1

    def _t_maybe_gc(self):
        while len(self.t_pool) < self.t_gc_threshold:
            self._defer(self._t_gc_once)

    # -- cached mapping table -----------------------------------------------

    def _translate(self, lpn, for_write):
        if for_write:
            self.cmt_write_lookups += 1
        else:
            self.cmt_read_lookups += 1
        cmt = self.cmt
        if lpn in cmt:
            cmt.move_to_end(lpn)
            if for_write:
                cmt[lpn] = True
                self.cmt_write_hits += 1
            else:
                self.cmt_read_hits += 1
            return
        will_insert = for_write or lpn in self.l2p
        fetched = -1
        if will_insert and len(cmt) == self.cmt_capacity:
            victim, dirty = cmt.popitem(last=False)
            if dirty:
                vt = victim // self.entries_per_tp
                old = self.l2p.get(self.tp_base + vt)
                if old is not None:
                    self.flash.read_page(old)  # fetch before rewrite
                self._t_map_write(vt)
                fetched = vt
        t = lpn // self.entries_per_tp
        if t != fetched:
            tp = self.l2p.get(self.tp_base + t)
            if tp is not None:
                self.flash.read_page(tp)
        if will_insert:
            cmt[lpn] = for_write

    def handle_write(self, lpn: int) -> OpCost:
        if not 0 <= lpn < self.logical_pages:
            raise OutOfRange(f"lpn {lpn} outside logical space")
        self.write_lookups += 1
        snap = self._begin()
        self._translate(lpn, True)
        self._map_write(lpn)
        self._maybe_gc()
        return self._finish(*snap)

    def handle_read(self, lpn: int) -> OpCost:
        if not 0 <= lpn < self.logical_pages:
            raise OutOfRange(f"lpn {lpn} outside logical space")
        self.read_lookups += 1
        snap = self._begin()
        self._translate(lpn, False)
        ppn = self.l2p.get(lpn)
        if ppn is None:
            self.unwritten_reads += 1
            self.flash.read_page_raw(lpn)
        else:
            self.flash.read_page(ppn)
        self._maybe_gc()
        return self._finish(*snap)

    def hit_rates(self):
        rr = (self.cmt_read_hits / self.cmt_read_lookups
              if self.cmt_read_lookups else 0.0)
        wr = (self.cmt_write_hits / self.cmt_write_lookups
              if self.cmt_write_lookups else 0.0)
        return rr, wr


class FastFtl(_CostModel):
    """Block mapping with one sequential and several random log blocks.

    Every logical block starts mapped to the physical block of the same
    number; only the over-provisioned spares form the free pool, so log
    blocks and merge targets cycle through that small region. Writes
    that grow a block from offset zero stream into the sequential log,
    which is installed by a cheap switch merge once complete.
    Everything else lands in the shared random logs; when those fill
    up, the oldest one is folded back block by block (full merge).
    Merge traffic runs deferred; the appends themselves and the erase
    of a log block being opened are synchronous. Reads always come from
    the freshest copy.
    """

    name = "fast"

    def __init__(self, flash: FlashState, logical_pages: int = None,
                 rw_log_blocks: int = 6):
        self.flash = flash
        g = flash.geometry
        self.logical_pages = (logical_pages if logical_pages is not None
                              else g.total_pages)
        if self.logical_pages > g.total_pages:
            raise ValueError("logical space larger than the device")
        if self.logical_pages % g.pages_per_block:
            raise ValueError("logical space must be whole blocks")
        if rw_log_blocks < 1:
            raise ValueError("need at least one random log block")
        self._ppb = g.pages_per_block
        self._def_us = 0.0
        self.rw_log_blocks = rw_log_blocks
        self.logical_blocks = self.logical_pages // self._ppb
        # direct initial mapping; spares beyond the logical space are
        # the only free blocks this scheme ever rotates through
        self.block_map = {lb: lb for lb in range(self.logical_blocks)}
        self.loc = {}           # lpn -> flash page of the freshest copy
        self.pool = deque(range(self.logical_blocks, g.block_count))
        self.rw = deque()       # random log blocks, oldest first
        self.tags = {}          # log block -> lpn written at each offset
        self.sw_block = None
        self.sw_lb = None
        self.full_merges = 0
        self.switch_merges = 0
        self.partial_merges = 0
        self.unwritten_reads = 0
        self.read_lookups = 0
        self.write_lookups = 0

    def _activate(self):
        # stack reuse: the most recently freed spare goes first (no
        # wear leveling, which is what concentrates erases here)
        if not self.pool:
            raise CapacityExhausted("free block pool is empty")
        b = self.pool.pop()
        if self.flash.write_cursor[b] != 0:
            self.flash.erase_block(b)
        return b

    def _supersede(self, lpn, ppn):
        old = self.loc.get(lpn)
        if old is not None:
            self.flash.invalidate_page(old)
        self.loc[lpn] = ppn

    # -- sequential log ----------------------------------------------------

    def _install_sw(self):
        """Switch merge: the finished log becomes the data block."""
        flash = self.flash
        lb = self.sw_lb
        old = self.block_map[lb]
        if flash.valid_count[old] != 0:
            raise RuntimeError("stale data block still holds live pages")
        flash.erase_block(old)
        self.pool.append(old)
        self.block_map[lb] = self.sw_block
        self.sw_block = None
        self.sw_lb = None
        self.switch_merges += 1

    def _close_sw(self):
        """Complete a stalled sequential run, then install it.

        Remaining offsets are filled from the freshest copies; offsets
        that were never written stay dead until the next erase.
        """
        flash = self.flash
        b = self.sw_block
        lbase = self.sw_lb * self._ppb
        pbase = b * self._ppb
        for off in range(flash.write_cursor[b], self._ppb):
            src = self.loc.get(lbase + off)
            if src is None:
                flash.skip_page(b)
            else:
                flash.read_page(src)
                flash.write_page(pbase + off)
                self._supersede(lbase + off, pbase + off)
        self.partial_merges += 1
        self._install_sw()

    def _sw_append(self, lpn):
        flash = self.flash
        b = self.sw_block
        ppn = b * self._ppb + flash.write_cursor[b]
        flash.write_page(ppn)
        self._supersede(lpn, ppn)
        if flash.write_cursor[b] == self._ppb:
            self._defer(self._install_sw)

    # -- random logs ---------------------------------------------------------

    def _rebuild_block(self, lb):
        """Gather the freshest copy of every page of lb into a new block."""
        flash = self.flash
        nb = self._activate()
        lbase = lb * self._ppb
        nbase = nb * self._ppb
        for off in range(self._ppb):
            src = self.loc.get(lbase + off)
            if src is None:
                flash.skip_page(nb)
            else:
                flash.read_page(src)
                flash.write_page(nbase + off)
                self._supersede(lbase + off, nbase + off)
        old = self.block_map[lb]
        if flash.valid_count[old] != 0:
            raise RuntimeError("stale data block still holds live pages")
        flash.erase_block(old)
        self.pool.append(old)
        self.block_map[lb] = nb

    def _full_merge(self, log):
        # block-level reshuffles do not mix: finish the sequential run first
        if self.sw_block is not None:
            self._close_sw()
        flash = self.flash
        base = log * self._ppb
        order = []
        seen = set()
        for off, lpn in enumerate(self.tags[log]):
            if self.loc.get(lpn) == base + off:  # still the freshest copy
                lb = lpn // self._ppb
                if lb not in seen:
                    seen.add(lb)
                    order.append(lb)
        for lb in order:
            self._rebuild_block(lb)
        if flash.valid_count[log] != 0:
            raise RuntimeError("merged log block still holds live pages")
        flash.erase_block(log)
        self.pool.append(log)
        del self.tags[log]
        self.full_merges += 1

    def _rw_append(self, lpn):
        flash = self.flash
        if self.rw and flash.write_cursor[self.rw[-1]] < self._ppb:
            b = self.rw[-1]
        else:
            if len(self.rw) == self.rw_log_blocks:
                self._defer(self._full_merge, self.rw.popleft())
            b = self._activate()
            self.rw.append(b)
            self.tags[b] = []
        ppn = b * self._ppb + flash.write_cursor[b]
        flash.write_page(ppn)
        self.tags[b].append(lpn)
        self._supersede(lpn, ppn)

    # -- public contract ------------------------------------------------------

    def handle_write(self, lpn: int) -> OpCost:
        if not 0 <= lpn < self.logical_pages:
            raise OutOfRange(f"lpn {lpn} outside logical space")
        self.write_lookups += 1
        snap = self._begin()
        flash = self.flash
        lb = lpn // self._ppb
        off = lpn - lb * self._ppb
        if self.sw_block is not None and lb == self.sw_lb \
                and off == flash.write_cursor[self.sw_block]:
            self._sw_append(lpn)
        elif off == 0:
            if self.sw_block is not None:
                self._defer(self._close_sw)
            self.sw_block = self._activate()
            self.sw_lb = lb
            self._sw_append(lpn)
        else:
            self._rw_append(lpn)
        return self._finish(*snap)

    def handle_read(self, lpn: int) -> OpCost:
        if not 0 <= lpn < self.logical_pages:
            raise OutOfRange(f"lpn {lpn} outside logical space")
        self.read_lookups += 1
        flash = self.flash
        ppn = self.loc.get(lpn)
        if ppn is None:
            self.unwritten_reads += 1
            lat = flash.read_page_raw(lpn)
        else:
            lat = flash.read_page(ppn)
        return OpCost(1, 0, 0, lat)

    def flush_all(self) -> OpCost:
        return OpCost()

    def blocks_counted(self) -> int:
        return self.flash.geometry.block_count

    def hit_rates(self):
        return 0.0, 0.0
