"""NAND flash device model.

Tracks page states, per-block write cursors and erase counts. No data
payloads are stored; the simulator only needs identity and validity of
pages plus the latency of each operation.

Device rules enforced here:
  * a page can only be programmed when it is Free and its offset equals
    the block's write cursor (strict in-order programming),
  * erase works on whole blocks and is the only way back to Free,
  * the device starts completely dirty: every page Invalid, every
    cursor at end of block, zero recorded erases. The first program of
    any block therefore needs an erase first.
"""

from dataclasses import dataclass
from enum import IntEnum


class PageState(IntEnum):
    FREE = 0
    VALID = 1
    INVALID = 2


# plain ints for the hot paths
_FREE = int(PageState.FREE)
_VALID = int(PageState.VALID)
_INVALID = int(PageState.INVALID)


class FlashError(Exception):
    """Base for device rule violations. These indicate caller bugs."""


class OutOfRange(FlashError):
    pass


class ReadOfNonValidPage(FlashError):
    pass


class SequentialViolation(FlashError):
    pass


class NotErased(FlashError):
    pass


class InvalidateFreePage(FlashError):
    pass


@dataclass(frozen=True)
class FlashGeometry:
    """Physical shape of the simulated device.

    block_count is the total number of physical blocks, including any
    over-provisioned blocks beyond the logical space.
    """

    page_size_bytes: int = 2048
    pages_per_block: int = 64
    block_count: int = 8192

    def __post_init__(self):
        if self.page_size_bytes <= 0 or self.pages_per_block <= 0 or self.block_count <= 0:
            raise ValueError("geometry fields must be positive")

    @property
    def total_pages(self) -> int:
        return self.pages_per_block * self.block_count

    @property
    def block_size_bytes(self) -> int:
        return self.page_size_bytes * self.pages_per_block


@dataclass(frozen=True)
class LatencyParams:
    """Per-operation device latencies in microseconds."""

    read_us: float = 130.9
    write_us: float = 405.9
    erase_us: float = 2000.0


class FlashState:
    """Mutable device state plus read/write/erase counters."""

    def __init__(self, geometry: FlashGeometry = None, latencies: LatencyParams = None):
        self.geometry = geometry or FlashGeometry()
        self.latencies = latencies or LatencyParams()
        g = self.geometry
        n = g.total_pages
        ppb = g.pages_per_block
        # completely dirty initial state
        self.page_state = bytearray([_INVALID]) * n
        self.write_cursor = [ppb] * g.block_count
        self.erase_count = [0] * g.block_count
        self.valid_count = [0] * g.block_count
        self.reads = 0
        self.writes = 0
        self.erases = 0
        self._n = n
        self._ppb = ppb

    # -- queries ------------------------------------------------------

    def state_of(self, ppn: int) -> PageState:
        if not 0 <= ppn < self._n:
            raise OutOfRange(f"page {ppn} outside device of {self._n} pages")
        return PageState(self.page_state[ppn])

    def erase_histogram(self):
        """Per-block erase counts, index = block number."""
        return list(self.erase_count)

    # -- operations ---------------------------------------------------

    def read_page(self, ppn: int) -> float:
        """Read one Valid page. Returns the latency in microseconds."""
        if not 0 <= ppn < self._n:
            raise OutOfRange(f"page {ppn} outside device of {self._n} pages")
        if self.page_state[ppn] != _VALID:
            raise ReadOfNonValidPage(f"page {ppn} is not valid")
        self.reads += 1
        return self.latencies.read_us

    def read_page_raw(self, ppn: int) -> float:
        """Read regardless of page state (returns stale or erased data).

        Same cost as a normal read; used when a caller knowingly reads
        a location that holds no live data.
        """
        if not 0 <= ppn < self._n:
            raise OutOfRange(f"page {ppn} outside device of {self._n} pages")
        self.reads += 1
        return self.latencies.read_us

    def write_page(self, ppn: int) -> float:
        """Program one page at the block's write cursor."""
        if not 0 <= ppn < self._n:
            raise OutOfRange(f"page {ppn} outside device of {self._n} pages")
        block = ppn // self._ppb
        off = ppn - block * self._ppb
        if self.page_state[ppn] != _FREE:
            raise NotErased(f"page {ppn} not free, erase the block first")
        if off != self.write_cursor[block]:
            raise SequentialViolation(
                f"offset {off} but block {block} cursor is {self.write_cursor[block]}")
        self.page_state[ppn] = _VALID
        self.write_cursor[block] = off + 1
        self.valid_count[block] += 1
        self.writes += 1
        return self.latencies.write_us

    def skip_page(self, block: int) -> None:
        """Give up the page at the write cursor without programming it.

        In-order programming cannot come back to a skipped offset until
        the next erase, so the page is dead space and is marked Invalid.
        Costs nothing and touches no counter.
        """
        if not 0 <= block < self.geometry.block_count:
            raise OutOfRange(f"block {block} outside device")
        cur = self.write_cursor[block]
        if cur >= self._ppb:
            raise SequentialViolation(f"block {block} has no free pages left")
        self.page_state[block * self._ppb + cur] = _INVALID
        self.write_cursor[block] = cur + 1

    def erase_block(self, block: int) -> float:
        """Erase a whole block: all pages Free, cursor reset."""
        if not 0 <= block < self.geometry.block_count:
            raise OutOfRange(f"block {block} outside device")
        base = block * self._ppb
        self.page_state[base:base + self._ppb] = bytes(self._ppb)  # all FREE
        self.write_cursor[block] = 0
        self.valid_count[block] = 0
        self.erase_count[block] += 1
        self.erases += 1
        return self.latencies.erase_us

    def invalidate_page(self, ppn: int) -> None:
        """Mark a page stale. Metadata only, no latency.

        Valid pages become Invalid, Invalid stays Invalid (idempotent),
        invalidating a Free page is a caller bug.
        """
        if not 0 <= ppn < self._n:
            raise OutOfRange(f"page {ppn} outside device of {self._n} pages")
        st = self.page_state[ppn]
        if st == _VALID:
            self.page_state[ppn] = _INVALID
            self.valid_count[ppn // self._ppb] -= 1
        elif st == _FREE:
            raise InvalidateFreePage(f"page {ppn} is free, nothing to invalidate")
