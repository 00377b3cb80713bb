"""The Fock module of the two-point Heisenberg algebra.

States are finite linear combinations of ordered creation monomials

    a_{-n_1+g/2} ... a_{-n_M+g/2} v0,      n_1 >= ... >= n_M > 0,

encoded by their positive integer parts (n_1, ..., n_M); the degree of a
monomial is the sum of its parts.  The vacuum satisfies a_{g/2+h} v0 = 0
for h >= 0 and the central element acts as the identity.

The generator action realizes [a_n, a_m] = bracket(n,m) K with the
calibrated cocycle from :mod:`knva.tables`.  At genus >= 1 two creation
generators need not commute (the cocycle band reaches index pairs on the
creation side), so inserting a generator into an ordered monomial walks it
into position and collects the central corrections on the way; the ordered
monomials remain a basis by the usual ordered-word argument for central
extensions.
"""

from __future__ import annotations

import re
from typing import Iterable

from .errors import ConfigError, KnvaError
from .indices import fmt_index
from .reports import CheckRecord
from .scalars import ScalarContext
from .tables import StructureTables

Monomial = tuple  # non-increasing tuple of positive integer parts


def monomial_degree(mon: Monomial) -> int:
    return sum(mon)


def check_monomial(mon: Iterable[int]) -> Monomial:
    parts = tuple(mon)
    if any(p <= 0 or not isinstance(p, int) for p in parts):
        raise ConfigError(f"monomial parts must be positive integers: {parts}")
    if any(parts[i] < parts[i + 1] for i in range(len(parts) - 1)):
        raise ConfigError(f"monomial parts must be non-increasing: {parts}")
    return parts


class FockVector:
    """Immutable sparse vector over the monomial basis."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: dict | None = None):
        clean = {}
        for mon, c in (terms or {}).items():
            if c != 0:
                clean[mon] = c
        self.terms = clean
        self._hash = None

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(sorted(self.terms.items())))
        return self._hash

    def __eq__(self, other):
        return isinstance(other, FockVector) and self.terms == other.terms

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "FockVector") -> "FockVector":
        out = dict(self.terms)
        for mon, c in other.terms.items():
            acc = out.get(mon)
            out[mon] = c if acc is None else acc + c
        return FockVector(out)

    def __sub__(self, other: "FockVector") -> "FockVector":
        out = dict(self.terms)
        for mon, c in other.terms.items():
            acc = out.get(mon)
            out[mon] = -c if acc is None else acc - c
        return FockVector(out)

    def scale(self, factor) -> "FockVector":
        if factor == 0:
            return FockVector()
        return FockVector({mon: factor * c for mon, c in self.terms.items()})

    def coefficient(self, mon: Monomial):
        return self.terms.get(mon, 0)

    def degree(self) -> int:
        """Maximum degree over the support (error on the zero vector)."""
        if not self.terms:
            raise KnvaError("degree of the zero vector is undefined")
        return max(monomial_degree(m) for m in self.terms)

    def max_abs(self, ctx: ScalarContext):
        return ctx.max_abs(self.terms.values())

    def prune(self, ctx: ScalarContext, tol=None) -> "FockVector":
        return FockVector(
            {m: c for m, c in self.terms.items() if not ctx.is_zero(c, tol)}
        )

    def __repr__(self):  # pragma: no cover - debugging aid
        return "FockVector(" + format_state(self, str) + ")"


def vacuum(ctx: ScalarContext) -> FockVector:
    return FockVector({(): ctx.one()})


def basis_state(ctx: ScalarContext, parts: Iterable[int]) -> FockVector:
    return FockVector({check_monomial(parts): ctx.one()})


def monomials_of_degree(d: int) -> list[Monomial]:
    """All partitions of d as non-increasing tuples."""
    if d == 0:
        return [()]
    out = []

    def rec(remaining: int, cap: int, acc: list):
        if remaining == 0:
            out.append(tuple(acc))
            return
        for p in range(min(cap, remaining), 0, -1):
            acc.append(p)
            rec(remaining - p, p, acc)
            acc.pop()

    rec(d, d, [])
    return out


def monomials_up_to_degree(d: int) -> list[Monomial]:
    out = []
    for k in range(d + 1):
        out.extend(monomials_of_degree(k))
    return out


# ---------------------------------------------------------------------------
# generator action
# ---------------------------------------------------------------------------


def part_to_index(genus: int, part: int) -> int:
    """Creation generator index (doubled) of a part: a_{g/2 - p}."""
    return genus - 2 * part


def index_to_part(genus: int, n2: int) -> int:
    return (genus - n2) // 2


def apply_generator(tables: StructureTables, n2: int, v: FockVector) -> FockVector:
    """Act with the generator a_n on a state.

    Creation indices (n < g/2) insert into the ordered word, collecting
    central corrections while walking past smaller generators; indices
    n >= g/2 commute rightward until they annihilate the vacuum.
    """
    genus = tables.genus
    if (n2 - genus) % 2 != 0:
        raise ConfigError(f"generator index {fmt_index(n2)} invalid for genus {genus}")
    ctx = tables.ctx
    out: dict = {}

    def insert(m2: int, word: Monomial, coeff) -> None:
        # a_m applied to the ordered word `word` (indices ascending), times coeff
        if not word:
            if m2 < genus:
                mon = (index_to_part(genus, m2),)
                acc = out.get(mon)
                out[mon] = coeff if acc is None else acc + coeff
            return
        i2 = part_to_index(genus, word[0])
        if m2 <= i2:
            if m2 >= genus:
                # annihilator reached the right end of nothing to kill
                return
            mon = (index_to_part(genus, m2),) + word
            acc = out.get(mon)
            out[mon] = coeff if acc is None else acc + coeff
            return
        # commute past the first letter: a_m a_i = a_i a_m + bracket(m,i) K
        central = tables.bracket(m2, i2)
        tail = word[1:]
        if central != 0:
            acc_terms = {}
            _accumulate_prefix(acc_terms, (), tail, coeff * central)
            for mon, c in acc_terms.items():
                acc = out.get(mon)
                out[mon] = c if acc is None else acc + c
        # a_i (a_m tail): recurse on the tail, then prepend a_i
        sub = apply_generator_word(tables, m2, tail)
        for mon, c in sub.items():
            _prepend(out, genus, word[0], mon, coeff * c)

    def _accumulate_prefix(store, prefix, word, coeff):
        mon = prefix + word
        acc = store.get(mon)
        store[mon] = coeff if acc is None else acc + coeff

    with ctx.workdps():
        for word, coeff in v.terms.items():
            insert(n2, word, coeff)
    return FockVector(out)


def apply_generator_word(tables: StructureTables, m2: int, word: Monomial) -> dict:
    """a_m applied to a single ordered word; returns {monomial: coeff}."""
    v = FockVector({word: tables.ctx.one()})
    return apply_generator(tables, m2, v).terms


def _prepend(store: dict, genus: int, part: int, mon: Monomial, coeff) -> None:
    """Prepend a part to an already-canonical monomial (part >= its head)."""
    if mon and part < mon[0]:
        raise KnvaError("internal ordering violation in generator insertion")
    key = (part,) + mon
    acc = store.get(key)
    store[key] = coeff if acc is None else acc + coeff


def apply_word(tables: StructureTables, word, v: FockVector) -> FockVector:
    """Apply an ordered product of generators, rightmost factor first."""
    for n2 in reversed(tuple(word)):
        if v.is_zero():
            return v
        v = apply_generator(tables, n2, v)
    return v


# ---------------------------------------------------------------------------
# the translation operator
# ---------------------------------------------------------------------------


def apply_T(tables: StructureTables, v: FockVector, _cache: dict | None = None) -> FockVector:
    """The translation operator, defined recursively on the monomial basis.

    T v0 = 0 and T(a_u w) = [T, a_u] w + a_u (T w), where the bracket is
    read off the derivative expansion: [T, a_u] = sum_n zeta[u,n] a_n.
    """
    ctx = tables.ctx
    cache = _cache if _cache is not None else {}
    with ctx.workdps():
        out = FockVector()
        for mon, coeff in v.terms.items():
            out = out + _apply_T_monomial(tables, mon, cache).scale(coeff)
    return out


def _apply_T_monomial(tables: StructureTables, mon: Monomial, cache: dict) -> FockVector:
    if mon in cache:
        return cache[mon]
    if not mon:
        result = FockVector()
    else:
        genus = tables.genus
        u2 = part_to_index(genus, mon[0])
        tail = mon[1:]
        tail_vec = FockVector({tail: tables.ctx.one()})
        result = FockVector()
        for n2, z in tables.zeta_row(u2).items():
            result = result + apply_generator(tables, n2, tail_vec).scale(z)
        sub = _apply_T_monomial(tables, tail, cache)
        if not sub.is_zero():
            result = result + apply_generator(tables, u2, sub)
    cache[mon] = result
    return result


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------


def check_admissibility(tables: StructureTables, v: FockVector) -> CheckRecord:
    """Minimal n0 in the window with a_n v = 0 for all tested n >= n0."""
    genus = tables.genus
    ctx = tables.ctx
    if v.is_zero():
        return CheckRecord("admissibility", True, params={"n0": fmt_index(genus)})
    top = tables.extent2
    min_n2 = None
    last_nonzero = None
    n2 = genus
    while n2 <= top:
        try:
            img = apply_generator(tables, n2, v).prune(ctx)
        except KnvaError:
            break
        if not img.is_zero():
            last_nonzero = n2
        n2 += 2
    n0 = genus if last_nonzero is None else last_nonzero + 2
    return CheckRecord(
        "admissibility",
        True,
        params={"n0": fmt_index(n0), "tested_up_to": fmt_index(top)},
    )


# ---------------------------------------------------------------------------
# state literals
# ---------------------------------------------------------------------------

_STATE_RE = re.compile(r"^\s*((?:a\[-?\d+\])*)\s*\|0>\s*$")
_PART_RE = re.compile(r"a\[(-?\d+)\]")


def parse_state(text: str, ctx: ScalarContext) -> FockVector:
    """Parse a literal like ``a[-3]a[-1]|0>`` (offsets relative to g/2)."""
    m = _STATE_RE.match(text)
    if m is None:
        raise ConfigError(f"cannot parse state literal {text!r}")
    offsets = [int(x) for x in _PART_RE.findall(m.group(1))]
    if any(o >= 0 for o in offsets):
        raise ConfigError("state literals use creation offsets a[-p] with p > 0")
    parts = sorted((-o for o in offsets), reverse=True)
    return basis_state(ctx, parts)


def format_monomial(mon: Monomial) -> str:
    return "".join(f"a[-{p}]" for p in mon) + "|0>"


def format_state(v: FockVector, scalar_fmt) -> str:
    if v.is_zero():
        return "0"
    pieces = []
    for mon in sorted(v.terms, key=lambda m: (monomial_degree(m), m)):
        pieces.append(f"({scalar_fmt(v.terms[mon])})*{format_monomial(mon)}")
    return " + ".join(pieces)
