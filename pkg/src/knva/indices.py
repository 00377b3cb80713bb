"""Half-integer basis indices stored as doubled integers.

Basis labels n run over the integers when the genus g is even and over
ZZ + 1/2 when g is odd.  Everything in this package stores such a label as
the exact integer 2*n (the "doubled" value), so that index arithmetic stays
in int and never touches floating point.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .errors import ConfigError


def index_parity(genus: int) -> int:
    """Parity (0 or 1) that every doubled index must have for this genus."""
    return genus % 2


def is_valid_index(genus: int, doubled: int) -> bool:
    return doubled % 2 == index_parity(genus)


def check_index(genus: int, doubled: int) -> int:
    if not is_valid_index(genus, doubled):
        raise ConfigError(
            f"index {fmt_index(doubled)} has the wrong parity for genus {genus}"
        )
    return doubled


def index_range(genus: int, max_doubled: int) -> list[int]:
    """All valid doubled indices d with |d| <= max_doubled, ascending."""
    par = index_parity(genus)
    start = -max_doubled
    if start % 2 != par:
        start += 1
    return list(range(start, max_doubled + 1, 2))


def fmt_index(doubled: int) -> str:
    """Human form: ``3`` for doubled 6, ``-3/2`` for doubled -3."""
    if doubled % 2 == 0:
        return str(doubled // 2)
    return f"{doubled}/2"


_INDEX_RE = re.compile(
    r"""^\s*(?:
        (?P<gh>g/2)(?:\s*(?P<gsign>[+-])\s*(?P<goff>\d+))?   # g/2, g/2-1, g/2+3
        | (?P<frac>-?\d+)\s*/\s*2                            # -3/2
        | (?P<dec>-?\d+\.5)                                  # 6.5
        | (?P<int>-?\d+)                                     # 4
    )\s*$""",
    re.VERBOSE,
)


def parse_index(text: str, genus: int) -> int:
    """Parse an index literal into its doubled value.

    Accepts plain integers, halves written as ``p/2`` or ``p.5``, and the
    anchored forms ``g/2``, ``g/2-1``, ``g/2+3``.
    """
    m = _INDEX_RE.match(text)
    if m is None:
        raise ConfigError(f"cannot parse index {text!r}")
    if m.group("gh"):
        doubled = genus
        if m.group("goff"):
            off = 2 * int(m.group("goff"))
            doubled += off if m.group("gsign") == "+" else -off
    elif m.group("frac") is not None:
        doubled = int(m.group("frac"))
    elif m.group("dec") is not None:
        doubled = int(2 * Fraction(m.group("dec")))
    else:
        doubled = 2 * int(m.group("int"))
    return check_index(genus, doubled)


def parse_window(text: str, genus: int) -> int:
    """Parse a window bound (max |n|) into its doubled value.

    The bound itself must be a valid index for the genus, e.g. ``6.5`` or
    ``13/2`` at genus 1 and ``12`` at genus 0.
    """
    doubled = parse_index(text, genus)
    if doubled <= 0:
        raise ConfigError("window bound must be positive")
    return doubled
