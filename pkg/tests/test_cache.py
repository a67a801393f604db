"""Dual-space cache: hit/miss paths, largest-group eviction, switch,
LRU flush with late merge, and the SRAM bookkeeping budget."""

import itertools
import random

import pytest

from clashsim.cache import CacheConfig, DualCache, OpCost, ZERO_COST, cache_metadata_bytes
from clashsim.flash import FlashGeometry, FlashState, PageState
from helpers import flash_snapshot, tiny_flash
from reference import RefClash, RefFlash

READ_US, WRITE_US, ERASE_US = 130.9, 405.9, 2000.0


def big_block_cache(p_cap=64, b_cap=1):
    """4 blocks of 64 pages, small p-space, for flush cost arithmetic."""
    flash = FlashState(FlashGeometry(2048, 64, 4))
    return flash, DualCache(flash, CacheConfig(p_cap, b_cap), 4)


def small_cache(p_cap=4, b_cap=1, blocks=4, ppb=4):
    flash = tiny_flash(blocks, ppb)
    return flash, DualCache(flash, CacheConfig(p_cap, b_cap), blocks)


def fill_block_into_bspace(cache, lpns):
    """Write a group into p-space and move it to b-space by hand."""
    for lpn in lpns:
        cache.handle_write(lpn)
    return cache.place_victims(cache.select_pspace_victims())


# -- flush cost pins ------------------------------------------------------

def test_flush_full_block_no_merge():
    flash, cache = big_block_cache()
    fill_block_into_bspace(cache, range(64))
    cost = cache.flush_lru_block()
    assert cost == OpCost(0, 64, 1, pytest.approx(27977.6), 0.0)
    assert all(flash.state_of(p) == PageState.VALID for p in range(64))


def test_flush_with_late_merge_reads():
    flash, cache = big_block_cache()
    fill_block_into_bspace(cache, range(64))
    cache.flush_lru_block()  # flash block 0 now fully valid
    # re-dirty 60 of its pages in the cache, 4 stay valid on flash only
    fill_block_into_bspace(cache, range(4, 64))
    cost = cache.flush_lru_block()
    assert (cost.flash_reads, cost.flash_writes, cost.flash_erases) == (4, 64, 1)
    assert cost.latency_us == pytest.approx(4 * READ_US + 64 * WRITE_US + ERASE_US)
    assert cache.merge_reads == 4


def test_flush_partial_block_leaves_tail_free():
    flash, cache = big_block_cache()
    fill_block_into_bspace(cache, range(10))
    cost = cache.flush_lru_block()
    assert cost == OpCost(0, 10, 1, pytest.approx(2000 + 10 * 405.9), 0.0)
    assert flash.write_cursor[0] == 10
    assert all(flash.state_of(p) == PageState.FREE for p in range(10, 64))


def test_flush_skips_interior_gaps():
    flash, cache = small_cache()
    fill_block_into_bspace(cache, (1, 3))
    cost = cache.flush_lru_block()
    assert (cost.flash_reads, cost.flash_writes, cost.flash_erases) == (0, 2, 1)
    states = [flash.state_of(p) for p in range(4)]
    # gap offsets are dead until the next erase, programmed ones valid
    assert states == [PageState.INVALID, PageState.VALID,
                      PageState.INVALID, PageState.VALID]


def test_flush_cost_matches_op_counts():
    flash, cache = big_block_cache()
    fill_block_into_bspace(cache, range(4, 40))
    cost = cache.flush_lru_block()
    assert cost.latency_us == pytest.approx(
        cost.flash_reads * READ_US + cost.flash_writes * WRITE_US
        + cost.flash_erases * ERASE_US)


# -- hit and miss paths ---------------------------------------------------

def test_write_misses_are_free_until_pspace_fills():
    flash, cache = small_cache(p_cap=4)
    for lpn in (0, 1, 4, 5):
        assert cache.handle_write(lpn) == ZERO_COST
    assert cache.p_size == 4
    assert flash.writes == 0 and flash.erases == 0


def test_write_hit_in_pspace_is_free():
    _, cache = small_cache()
    cache.handle_write(0)
    assert cache.handle_write(0) == ZERO_COST
    assert cache.p_size == 1
    assert cache.write_hits == 1


def test_write_insert_invalidates_valid_flash_copy():
    flash, cache = small_cache()
    fill_block_into_bspace(cache, (0, 1, 2, 3))
    cache.flush_lru_block()
    assert flash.state_of(0) == PageState.VALID
    cache.handle_write(0)
    assert flash.state_of(0) == PageState.INVALID


def test_bspace_write_absorbed_even_for_uncached_offset():
    flash, cache = small_cache()
    fill_block_into_bspace(cache, (0, 1))
    before = (flash.reads, flash.writes, flash.erases)
    assert cache.handle_write(2) == ZERO_COST
    assert (flash.reads, flash.writes, flash.erases) == before
    assert cache.b_entries[0].pages == {0, 1, 2}
    assert cache.write_hits == 1


def test_read_hit_in_pspace_is_free():
    _, cache = small_cache()
    cache.handle_write(5)
    assert cache.handle_read(5) == ZERO_COST
    assert cache.read_hits == 1


def test_read_miss_costs_one_flash_read_and_caches_nothing():
    flash, cache = small_cache()
    fill_block_into_bspace(cache, (0, 1, 2, 3))
    cache.flush_lru_block()
    before_p = cache.p_entries
    cost = cache.handle_read(2)
    assert cost == OpCost(1, 0, 0, pytest.approx(READ_US), 0.0)
    assert cache.p_entries == before_p
    assert not cache.b_entries
    # still a miss the second time
    assert cache.handle_read(2).flash_reads == 1


def test_read_of_never_written_page_is_flagged():
    flash, cache = small_cache()
    cost = cache.handle_read(9)
    assert cost.flash_reads == 1
    assert cache.unwritten_reads == 1


def test_out_of_range_lpn_rejected():
    from clashsim.flash import OutOfRange
    _, cache = small_cache(blocks=2)
    with pytest.raises(OutOfRange):
        cache.handle_write(8)
    with pytest.raises(OutOfRange):
        cache.handle_read(8)


# -- p-space victim selection ---------------------------------------------

def test_select_largest_group():
    _, cache = small_cache(p_cap=8, blocks=4)
    for lpn in (0, 1, 2, 4, 5, 8):
        cache.handle_write(lpn)
    lb, grp = cache.select_pspace_victims()
    assert lb == 0 and grp == {0, 1, 2}


def test_select_tie_goes_to_lowest_block():
    _, cache = small_cache(p_cap=8, blocks=4)
    for lpn in (8, 9, 4, 5):
        cache.handle_write(lpn)
    lb, grp = cache.select_pspace_victims()
    assert lb == 1 and grp == {4, 5}


def test_select_whole_pspace_from_one_block():
    _, cache = small_cache(p_cap=4)
    for lpn in (0, 1, 2, 3):
        cache.handle_write(lpn)
    assert cache.select_pspace_victims() == (0, {0, 1, 2, 3})


# -- placement: fold, free slot, switch, flush ------------------------------

def test_place_free_slot_costs_nothing():
    flash, cache = small_cache(p_cap=4, b_cap=2)
    assert fill_block_into_bspace(cache, (0, 1)) == ZERO_COST
    assert set(cache.b_entries) == {0}
    assert cache.b_entries[0].pages == {0, 1}
    assert flash.erases == 0


def test_writes_to_resident_block_absorbed_not_reinserted():
    _, cache = small_cache(p_cap=4, b_cap=1)
    fill_block_into_bspace(cache, (0, 1))
    for lpn in (2, 3, 0):
        cache.handle_write(lpn)
    assert cache.b_entries[0].pages == {0, 1, 2, 3}
    assert cache.p_size == 0


def test_place_folds_into_resident_entry():
    # the write that triggers an eviction can belong to the block just
    # evicted; its lone page later folds back into the resident entry
    flash = tiny_flash()
    cache = DualCache(flash, CacheConfig(2, 1), 4)
    for lpn in (0, 1, 2):
        cache.handle_write(lpn)
    assert set(cache.b_entries) == {0}
    assert cache.p_entries == {2}
    cache.handle_write(4)
    cost = cache.handle_write(6)  # evicts the {2} group, block 0 resident
    assert cost == ZERO_COST
    assert cache.b_entries[0].pages == {0, 1, 2}
    assert cache.p_entries == {4, 6}
    assert flash.writes == 0 and flash.erases == 0
    assert cache.switches == 0 and cache.flushes == 0


def test_switch_swaps_smaller_resident_for_larger_victims():
    flash, cache = small_cache(p_cap=4, b_cap=1)
    # resident block 0 holds 2 pages
    fill_block_into_bspace(cache, (0, 1))
    # victim group of 3 from block 1
    for lpn in (4, 5, 6):
        cache.handle_write(lpn)
    before = (flash.reads, flash.writes, flash.erases)
    free_before = 4 - cache.p_size
    cost = cache.place_victims(cache.select_pspace_victims())
    assert cost == ZERO_COST
    assert (flash.reads, flash.writes, flash.erases) == before
    assert cache.switches == 1
    # block 1 took the slot, block 0's pages fell back into p-space
    assert set(cache.b_entries) == {1}
    assert cache.b_entries[1].pages == {0, 1, 2}  # offsets of lpns 4..6
    assert cache.p_entries == {0, 1}
    assert 4 - cache.p_size > free_before


def test_no_switch_on_equal_size_flushes_instead():
    flash, cache = small_cache(p_cap=4, b_cap=1)
    fill_block_into_bspace(cache, (0, 1))
    for lpn in (4, 5):
        cache.handle_write(lpn)
    cost = cache.place_victims(cache.select_pspace_victims())
    assert cache.switches == 0
    assert cache.flushes == 1
    assert cost.flash_erases == 1
    assert set(cache.b_entries) == {1}
    assert cache.b_entries[1].pages == {0, 1}


def test_switch_prefers_fewest_pages_then_lowest_block():
    _, cache = small_cache(p_cap=6, b_cap=2, blocks=4)
    fill_block_into_bspace(cache, (4, 5))    # block 1, 2 pages
    fill_block_into_bspace(cache, (8, 9))    # block 2, 2 pages
    for lpn in (0, 1, 2):
        cache.handle_write(lpn)
    cache.place_victims(cache.select_pspace_victims())
    # both residents held 2 < 3; the lower block number got switched out
    assert set(cache.b_entries) == {0, 2}
    assert cache.p_entries == {4, 5}


def test_one_write_cascades_at_most_one_flush():
    flash, cache = small_cache(p_cap=4, b_cap=2)
    rng = random.Random(5)
    for _ in range(3000):
        before = cache.flushes
        cache.handle_write(rng.randrange(16))
        assert cache.flushes - before <= 1


# -- b-space replacement policies -------------------------------------------

def test_lru_flushes_coldest_block():
    _, cache = small_cache(p_cap=4, b_cap=2)
    fill_block_into_bspace(cache, (0, 1))
    fill_block_into_bspace(cache, (4, 5))
    cache.handle_read(0)  # block 0 is now the most recently used
    cache.flush_lru_block()
    assert cache.last_flushed == 1
    assert 0 in cache.b_entries


def test_fifo_ignores_hits():
    flash = tiny_flash()
    cache = DualCache(flash, CacheConfig(4, 2, "fifo"), 4)
    fill_block_into_bspace(cache, (0, 1))
    fill_block_into_bspace(cache, (4, 5))
    cache.handle_read(0)
    cache.flush_lru_block()
    assert cache.last_flushed == 0  # first in, hits notwithstanding


def test_lfu_flushes_fewest_hits():
    flash = tiny_flash()
    cache = DualCache(flash, CacheConfig(4, 2, "lfu"), 4)
    fill_block_into_bspace(cache, (0, 1))
    fill_block_into_bspace(cache, (4, 5))
    cache.handle_read(0)
    cache.flush_lru_block()
    assert cache.last_flushed == 1


def test_unknown_policy_rejected():
    with pytest.raises(ValueError):
        CacheConfig(4, 1, "mru")


# -- metadata accounting ----------------------------------------------------

def test_metadata_bytes_default_shape():
    assert cache_metadata_bytes(CacheConfig(), 64) == 536
    assert cache_metadata_bytes(CacheConfig(), 64) < 1024


def test_metadata_bytes_linearity():
    base = cache_metadata_bytes(CacheConfig(128, 2), 64)
    assert cache_metadata_bytes(CacheConfig(128, 4), 64) == base + 2 * 12
    # per-page tags alone, without any block slots
    assert cache_metadata_bytes(CacheConfig(1, 2), 64) - 4 == 2 * 12


def test_capacity_validation():
    with pytest.raises(ValueError):
        CacheConfig(0, 1)
    with pytest.raises(ValueError):
        CacheConfig(4, 0)


# -- structural invariants --------------------------------------------------

def check_invariants(cache, flash):
    p = cache.p_entries
    assert len(p) == cache.p_size <= cache.config.p_capacity_pages
    assert len(cache.b_entries) <= cache.config.b_capacity_blocks
    ppb = flash.geometry.pages_per_block
    b_lpns = set()
    for blk, entry in cache.b_entries.items():
        assert entry.pages, "resident b-space entry with no pages"
        b_lpns |= {blk * ppb + off for off in entry.pages}
    assert not (p & b_lpns), "page cached in both spaces"
    # absorption caps a resident block's p-space presence at the single
    # page whose write triggered the eviction
    for blk in cache.b_entries:
        assert sum(1 for lpn in p if lpn // ppb == blk) <= 1
    for lpn in p | b_lpns:
        assert flash.state_of(lpn) != PageState.VALID


def test_invariants_hold_through_random_walk():
    flash, cache = small_cache(p_cap=4, b_cap=2)
    rng = random.Random(23)
    for _ in range(4000):
        lpn = rng.randrange(16)
        if rng.random() < 0.7:
            cache.handle_write(lpn)
        else:
            cache.handle_read(lpn)
        check_invariants(cache, flash)


def test_flush_all_drains_everything():
    flash, cache = small_cache(p_cap=4, b_cap=2)
    rng = random.Random(31)
    for _ in range(200):
        cache.handle_write(rng.randrange(16))
    cost = cache.flush_all()
    assert cache.p_size == 0 and not cache.b_entries
    assert cost.flash_erases >= 1
    assert cache.flush_all() == ZERO_COST


# -- reference equivalence on random sequences -------------------------------

@pytest.mark.parametrize("p_cap,b_cap", [(4, 1), (4, 2), (3, 2)])
def test_matches_reference_on_random_write_sequences(p_cap, b_cap):
    rng = random.Random(1000 * p_cap + b_cap)
    lpns = (0, 1, 2, 3, 4, 5, 8, 9)
    for _ in range(1500):
        seq = [rng.choice(lpns) for _ in range(rng.randrange(11))]
        flash = tiny_flash()
        cache = DualCache(flash, CacheConfig(p_cap, b_cap), 4)
        rf = RefFlash(4, 4)
        ref = RefClash(rf, p_cap, b_cap)
        for lpn in seq:
            cache.handle_write(lpn)
            ref.write(lpn)
        cache.flush_all()
        ref.flush_all()
        assert flash_snapshot(flash) == rf.snapshot(), seq


def test_matches_reference_with_reads_interleaved():
    rng = random.Random(77)
    lpns = (0, 1, 2, 3, 4, 5, 8, 9)
    for _ in range(800):
        flash = tiny_flash()
        cache = DualCache(flash, CacheConfig(4, 2), 4)
        rf = RefFlash(4, 4)
        ref = RefClash(rf, 4, 2)
        for _ in range(rng.randrange(12)):
            lpn = rng.choice(lpns)
            if rng.random() < 0.3:
                cache.handle_read(lpn)
                ref.read(lpn)
            else:
                cache.handle_write(lpn)
                ref.write(lpn)
        cache.flush_all()
        ref.flush_all()
        assert flash_snapshot(flash) == rf.snapshot()
