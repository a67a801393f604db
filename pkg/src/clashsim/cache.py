"""Dual-space write cache with direct block mapping.

The cache sits in front of a flash device that maps logical block n
straight onto physical block n, so it needs no translation table at
all. Two SRAM regions absorb writes:

  * p-space holds individual pages, tagged by logical page number,
  * b-space holds a few whole blocks, tagged by logical block number.

Writes enter p-space unless their block is already buffered in
b-space, in which case the b-space slot absorbs them directly. When
p-space is full, the largest set of cached pages belonging to one
logical block is evicted as a group. The group lands in b-space,
either in a free slot, or by swapping places with a resident block
that holds fewer pages than the group (a switch: pure SRAM traffic,
no flash work), or after flushing the least recently used resident
block to flash.

Only a flush touches flash, and it is the only source of erases:
still-valid flash pages of the victim block are read back (late
merge), the block is erased once, and the merged content is written
sequentially. Reads never allocate cache space.
"""

from dataclasses import dataclass

from .flash import FlashState, OutOfRange, _VALID


@dataclass(frozen=True)
class CacheConfig:
    p_capacity_pages: int = 128
    b_capacity_blocks: int = 2
    b_policy: str = "lru"  # lru | fifo | lfu

    def __post_init__(self):
        if self.p_capacity_pages < 1 or self.b_capacity_blocks < 1:
            raise ValueError("cache capacities must be at least 1")
        if self.b_policy not in ("lru", "fifo", "lfu"):
            raise ValueError(f"unknown b-space policy {self.b_policy!r}")


@dataclass(frozen=True)
class OpCost:
    """Flash work triggered by one cache or FTL operation.

    latency_us is the synchronous part the issuing request waits for.
    deferred_us is work the device completes off the request path
    (garbage collection, merges); it still occupies the device and can
    delay later requests, but does not stretch this one.
    """

    flash_reads: int = 0
    flash_writes: int = 0
    flash_erases: int = 0
    latency_us: float = 0.0
    deferred_us: float = 0.0

    def __add__(self, other):
        return OpCost(self.flash_reads + other.flash_reads,
                      self.flash_writes + other.flash_writes,
                      self.flash_erases + other.flash_erases,
                      self.latency_us + other.latency_us,
                      self.deferred_us + other.deferred_us)


ZERO_COST = OpCost()


class BlockEntry:
    """One b-space slot: a logical block plus the set of cached offsets."""

    __slots__ = ("block", "pages", "last_use", "inserted", "hits")

    def __init__(self, block, pages, stamp):
        self.block = block
        self.pages = pages          # set of in-block offsets
        self.last_use = stamp
        self.inserted = stamp
        self.hits = 0


def cache_metadata_bytes(config: CacheConfig, pages_per_block: int):
    """SRAM bookkeeping estimate for the given cache shape.

    4-byte tag per p-space page; 4-byte tag plus a presence bitmap
    (one bit per page) per b-space block.
    """
    per_block = 4 + pages_per_block / 8
    total = config.p_capacity_pages * 4 + config.b_capacity_blocks * per_block
    return int(total) if total == int(total) else total


class DualCache:
    """Cache state plus hit/miss and flush bookkeeping."""

    def __init__(self, flash: FlashState, config: CacheConfig = None,
                 logical_blocks: int = None):
        self.flash = flash
        self.config = config or CacheConfig()
        # blocks the direct mapping can reach; spare blocks beyond this
        # exist physically but are never addressed
        self.logical_blocks = (logical_blocks if logical_blocks is not None
                               else flash.geometry.block_count)
        if self.logical_blocks > flash.geometry.block_count:
            raise ValueError("logical space larger than the device")
        self._ppb = flash.geometry.pages_per_block
        self._logical_pages = self.logical_blocks * self._ppb
        self._p = {}            # logical block -> set of cached lpns
        self.p_size = 0
        self._b = {}            # logical block -> BlockEntry
        self._stamp = 0
        # stats
        self.read_lookups = 0
        self.read_hits = 0
        self.write_lookups = 0
        self.write_hits = 0
        self.unwritten_reads = 0
        self.switches = 0
        self.flushes = 0
        self.merge_reads = 0
        self.last_flushed = None

    # -- introspection used by tests and metrics ----------------------

    @property
    def p_entries(self):
        """Set of all lpns currently cached in p-space."""
        out = set()
        for grp in self._p.values():
            out |= grp
        return out

    @property
    def b_entries(self):
        return dict(self._b)

    def cached_lpns(self):
        """Every lpn the cache holds, across both spaces."""
        out = self.p_entries
        for e in self._b.values():
            base = e.block * self._ppb
            out |= {base + off for off in e.pages}
        return out

    def blocks_counted(self) -> int:
        return self.logical_blocks

    def metadata_bytes(self):
        return cache_metadata_bytes(self.config, self._ppb)

    # -- internals -----------------------------------------------------

    def _next_stamp(self):
        self._stamp += 1
        return self._stamp

    def _touch(self, entry):
        entry.last_use = self._next_stamp()
        entry.hits += 1

    def _cost(self, reads, writes, erases):
        lat = self.flash.latencies
        return OpCost(reads, writes, erases,
                      reads * lat.read_us + writes * lat.write_us
                      + erases * lat.erase_us)

    # -- public operations ----------------------------------------------

    def handle_read(self, lpn: int) -> OpCost:
        """Serve one logical page read.

        Cache hits are free. A miss reads the direct-mapped flash page
        and changes nothing in the cache. A miss on a page that was
        never written still costs one flash read (the device returns
        garbage) and is counted in unwritten_reads.
        """
        if not 0 <= lpn < self._logical_pages:
            raise OutOfRange(f"lpn {lpn} outside logical space")
        self.read_lookups += 1
        lb = lpn // self._ppb
        grp = self._p.get(lb)
        if grp is not None and lpn in grp:
            self.read_hits += 1
            return ZERO_COST
        e = self._b.get(lb)
        if e is not None and (lpn - lb * self._ppb) in e.pages:
            self.read_hits += 1
            self._touch(e)
            return ZERO_COST
        flash = self.flash
        if flash.page_state[lpn] == _VALID:
            lat = flash.read_page(lpn)
        else:
            self.unwritten_reads += 1
            lat = flash.read_page_raw(lpn)
        return OpCost(1, 0, 0, lat)

    def handle_write(self, lpn: int) -> OpCost:
        """Absorb one logical page write.

        A hit in either space overwrites in place for free. A write to
        a block already buffered in b-space is absorbed there even for
        a page not yet cached: the slot spans the whole block. Other
        misses insert into p-space, evicting a block-grouped victim set
        first when p-space is full. Either way the stale flash copy is
        invalidated afterwards.
        """
        if not 0 <= lpn < self._logical_pages:
            raise OutOfRange(f"lpn {lpn} outside logical space")
        self.write_lookups += 1
        lb = lpn // self._ppb
        grp = self._p.get(lb)
        if grp is not None and lpn in grp:
            self.write_hits += 1
            return ZERO_COST
        e = self._b.get(lb)
        if e is not None:
            off = lpn - lb * self._ppb
            self.write_hits += 1
            if off not in e.pages:
                e.pages.add(off)
                flash = self.flash
                if flash.page_state[lpn] == _VALID:
                    flash.invalidate_page(lpn)
            self._touch(e)
            return ZERO_COST
        cost = ZERO_COST
        if self.p_size == self.config.p_capacity_pages:
            cost = self.place_victims(self.select_pspace_victims())
        grp = self._p.get(lb)
        if grp is None:
            grp = self._p[lb] = set()
        grp.add(lpn)
        self.p_size += 1
        flash = self.flash
        if flash.page_state[lpn] == _VALID:
            flash.invalidate_page(lpn)
        return cost

    def select_pspace_victims(self):
        """Pick the largest same-block page group in p-space.

        Ties go to the lowest logical block number. Returns
        (logical_block, set_of_lpns) without removing anything.
        """
        if not self._p:
            raise RuntimeError("p-space is empty, nothing to select")
        best_lb = -1
        best = None
        for lb, grp in self._p.items():
            if best is None or len(grp) > len(best) or \
                    (len(grp) == len(best) and lb < best_lb):
                best_lb, best = lb, grp
        return best_lb, set(best)

    def place_victims(self, victims) -> OpCost:
        """Move a victim page group from p-space into b-space.

        In order of preference: fold into an already resident entry for
        the same block, take a free slot, switch with a resident block
        holding strictly fewer pages, or flush the least recently used
        resident block and take its slot. Only the flush costs flash
        operations.
        """
        vb, vset = victims
        base = vb * self._ppb
        offs = {lpn - base for lpn in vset}
        cost = ZERO_COST
        resident = self._b.get(vb)
        if resident is not None:
            # same block already buffered: just widen its page set
            resident.pages |= offs
            resident.last_use = self._next_stamp()
        elif len(self._b) < self.config.b_capacity_blocks:
            self._b[vb] = BlockEntry(vb, offs, self._next_stamp())
        else:
            # smallest resident entry, ties to the lowest block number
            sb = min(self._b, key=lambda b: (len(self._b[b].pages), b))
            small = self._b[sb]
            if len(small.pages) < len(vset):
                # switch: resident pages fall back to p-space, victim
                # group takes the slot; no flash traffic involved
                del self._b[sb]
                sbase = sb * self._ppb
                out = {sbase + off for off in small.pages}
                pgrp = self._p.get(sb)
                if pgrp is None:
                    self._p[sb] = out
                else:
                    pgrp |= out
                self.p_size += len(out)
                self.switches += 1
            else:
                cost = self.flush_lru_block()
            self._b[vb] = BlockEntry(vb, offs, self._next_stamp())
        del self._p[vb]
        self.p_size -= len(vset)
        return cost

    def flush_lru_block(self) -> OpCost:
        """Write the coldest b-space block back to flash.

        Late merge: read whatever pages of that block are still valid
        on flash, erase the direct-mapped physical block (the single
        erase this scheme ever issues per flush), then program cached
        plus merged pages in ascending offset order. Offsets past the
        last programmed page stay Free; interior gaps are dead space
        until the next erase.
        """
        if not self._b:
            raise RuntimeError("b-space is empty, nothing to flush")
        policy = self.config.b_policy
        if policy == "lru":
            vb = min(self._b, key=lambda b: self._b[b].last_use)
        elif policy == "fifo":
            vb = min(self._b, key=lambda b: self._b[b].inserted)
        else:  # lfu
            vb = min(self._b, key=lambda b: (self._b[b].hits,
                                             self._b[b].inserted))
        entry = self._b.pop(vb)
        flash = self.flash
        base = vb * self._ppb
        pages = entry.pages
        state = flash.page_state
        merged = [off for off in range(self._ppb)
                  if off not in pages and state[base + off] == _VALID]
        lat = 0.0
        for off in merged:
            lat += flash.read_page(base + off)
        lat += flash.erase_block(vb)
        todo = sorted(pages.union(merged))
        for off in todo:
            while flash.write_cursor[vb] < off:
                flash.skip_page(vb)
            lat += flash.write_page(base + off)
        self.merge_reads += len(merged)
        self.flushes += 1
        self.last_flushed = vb
        return OpCost(len(merged), len(todo), 1, lat)

    def flush_all(self) -> OpCost:
        """Drain the whole cache to flash (end of run bookkeeping)."""
        cost = ZERO_COST
        while self._p:
            cost = cost + self.place_victims(self.select_pspace_victims())
        while self._b:
            cost = cost + self.flush_lru_block()
        return cost
