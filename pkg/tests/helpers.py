"""Shared bits for the test suite: state snapshots comparable against
the reference models in reference.py, and tiny-geometry builders."""

from clashsim.flash import FlashGeometry, FlashState

# FlashState stores PageState ints; the reference models use letters
_CHARS = {0: "F", 1: "V", 2: "I"}


def flash_snapshot(flash):
    """(page states, per-block erase counts, total erases), the same
    shape RefFlash.snapshot() returns."""
    return (tuple(_CHARS[s] for s in flash.page_state),
            tuple(flash.erase_count),
            flash.erases)


def tiny_flash(blocks=4, ppb=4):
    return FlashState(FlashGeometry(2048, ppb, blocks))
