"""Truncated Laurent expansions of tensor forms at one of the two marked points.

A :class:`LaurentExpansion` holds the local data of a weight-``lam`` form,

    (c_lead * z^lead + ... + c_trunc * z^trunc + unknown) (dz)^lam,

in the distinguished local coordinate at P+ or P-.  Coefficients beyond
``trunc`` are *unknown*, not zero; every operation propagates the faithful
window pessimistically and extracting a coefficient outside it is an error,
never a silent zero.

Residues are pure coefficient extraction.  The coefficient of z^(-1) of a
weight-1 expansion is reported with orientation +1 at P+ and -1 at P-, so
that the global residue of a form with poles only at the two marked points
can be computed, and cross-checked, at either point.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import (
    FaithfulWindowError,
    PointMismatchError,
    WeightError,
)
from .scalars import Mode, Scalar, check_same_mode


class Point(enum.Enum):
    PLUS = "plus"
    MINUS = "minus"

    @property
    def orientation(self) -> int:
        return 1 if self is Point.PLUS else -1


@dataclass(frozen=True)
class LaurentExpansion:
    """Truncated local expansion of a weight-``lam`` form at ``point``.

    Invariant: ``len(coeffs) == trunc - lead + 1``.  ``lead`` is the lowest
    stored exponent; leading entries may be zero after subtractions, use
    :meth:`normalized` to trim exact zeros.
    """

    point: Point
    lam: int
    lead: int
    coeffs: tuple
    trunc: int
    mode: Mode

    def __post_init__(self):
        if len(self.coeffs) != self.trunc - self.lead + 1:
            raise ValueError(
                f"coeffs length {len(self.coeffs)} != trunc-lead+1 "
                f"({self.trunc}-{self.lead}+1)"
            )

    # -- accessors -------------------------------------------------------

    def coefficient(self, exponent: int) -> Scalar:
        """Coefficient of z^exponent; exponents above trunc are an error."""
        if exponent > self.trunc:
            raise FaithfulWindowError(
                f"exponent {exponent} beyond faithful window (trunc {self.trunc})"
            )
        if exponent < self.lead:
            return _zero(self.mode)
        return self.coeffs[exponent - self.lead]

    def nonzero_items(self):
        for i, c in enumerate(self.coeffs):
            if c != 0:
                yield self.lead + i, c

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def normalized(self) -> "LaurentExpansion":
        """Trim exactly-zero leading coefficients (never by tolerance)."""
        i = 0
        while i < len(self.coeffs) and self.coeffs[i] == 0:
            i += 1
        if i == 0:
            return self
        if i == len(self.coeffs):
            # keep a single zero coefficient at the truncation order
            return LaurentExpansion(
                self.point, self.lam, self.trunc, (self.coeffs[-1],), self.trunc, self.mode
            )
        return LaurentExpansion(
            self.point, self.lam, self.lead + i, self.coeffs[i:], self.trunc, self.mode
        )

    # -- arithmetic --------------------------------------------------------

    def scale(self, factor: Scalar) -> "LaurentExpansion":
        return LaurentExpansion(
            self.point,
            self.lam,
            self.lead,
            tuple(factor * c for c in self.coeffs),
            self.trunc,
            self.mode,
        )

    def shift(self, k: int) -> "LaurentExpansion":
        """Multiply by z^k (no weight change)."""
        return LaurentExpansion(
            self.point, self.lam, self.lead + k, self.coeffs, self.trunc + k, self.mode
        )

    def with_weight(self, lam: int) -> "LaurentExpansion":
        return LaurentExpansion(
            self.point, lam, self.lead, self.coeffs, self.trunc, self.mode
        )

    def truncate(self, trunc: int) -> "LaurentExpansion":
        """Restrict the faithful window to ``trunc`` (must shrink)."""
        if trunc >= self.trunc:
            return self
        if trunc < self.lead:
            raise FaithfulWindowError("truncation below leading exponent")
        return LaurentExpansion(
            self.point,
            self.lam,
            self.lead,
            self.coeffs[: trunc - self.lead + 1],
            trunc,
            self.mode,
        )

    def __add__(self, other: "LaurentExpansion") -> "LaurentExpansion":
        _check_compatible(self, other)
        if self.lam != other.lam:
            raise WeightError(f"cannot add weights {self.lam} and {other.lam}")
        lead = min(self.lead, other.lead)
        trunc = min(self.trunc, other.trunc)
        if trunc < lead:
            raise FaithfulWindowError("empty faithful window in addition")
        zero = _zero(self.mode)
        coeffs = []
        for e in range(lead, trunc + 1):
            a = self.coeffs[e - self.lead] if self.lead <= e <= self.trunc else zero
            b = other.coeffs[e - other.lead] if other.lead <= e <= other.trunc else zero
            coeffs.append(a + b)
        return LaurentExpansion(self.point, self.lam, lead, tuple(coeffs), trunc, self.mode)

    def __sub__(self, other: "LaurentExpansion") -> "LaurentExpansion":
        return self + other.scale(_minus_one(self.mode))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        terms = ", ".join(f"z^{e}:{c}" for e, c in self.nonzero_items())
        return (
            f"LaurentExpansion({self.point.value}, weight={self.lam}, "
            f"[{terms}], trunc={self.trunc})"
        )


def _zero(mode: Mode) -> Scalar:
    from fractions import Fraction

    if mode is Mode.EXACT:
        return Fraction(0)
    import mpmath

    return mpmath.mpc(0)


def _minus_one(mode: Mode) -> Scalar:
    from fractions import Fraction

    if mode is Mode.EXACT:
        return Fraction(-1)
    import mpmath

    return mpmath.mpc(-1)


def _check_compatible(a: LaurentExpansion, b: LaurentExpansion) -> None:
    if a.point is not b.point:
        raise PointMismatchError(
            f"expansions at {a.point.value} and {b.point.value} cannot be combined"
        )
    check_same_mode(a.mode, b.mode)


def expansion_from_items(
    point: Point,
    lam: int,
    items: dict[int, Scalar] | Sequence[tuple[int, Scalar]],
    trunc: int,
    mode: Mode,
) -> LaurentExpansion:
    """Build an expansion from sparse (exponent -> coefficient) data."""
    items = dict(items)
    zero = _zero(mode)
    lead = min(items) if items else trunc
    if max(items, default=trunc) > trunc:
        raise FaithfulWindowError("item exponent beyond requested trunc")
    coeffs = [items.get(e, zero) for e in range(lead, trunc + 1)]
    return LaurentExpansion(point, lam, lead, tuple(coeffs), trunc, mode)


def series_mul(a: LaurentExpansion, b: LaurentExpansion) -> LaurentExpansion:
    """Product of two expansions at the same point.

    The result has weight ``a.lam + b.lam``, lead ``a.lead + b.lead`` and is
    faithful up to ``min(a.trunc + b.lead, b.trunc + a.lead)``.
    """
    return series_mul_capped(a, b, None)


def series_mul_capped(
    a: LaurentExpansion, b: LaurentExpansion, max_exponent: int | None
) -> LaurentExpansion:
    """Like :func:`series_mul` but optionally truncating the output early.

    Residue extraction only needs low-order coefficients of a product, so
    callers can cap the output exponent and skip most of the convolution.
    """
    _check_compatible(a, b)
    lead = a.lead + b.lead
    trunc = min(a.trunc + b.lead, b.trunc + a.lead)
    if max_exponent is not None:
        trunc = min(trunc, max_exponent)
    if trunc < lead:
        raise FaithfulWindowError("empty faithful window in product")
    zero = _zero(a.mode)
    out = [zero] * (trunc - lead + 1)
    for ea, ca in a.nonzero_items():
        if ea + b.lead > trunc:
            continue
        base = ea + b.lead - lead
        top = min(len(b.coeffs), trunc - ea - b.lead + 1)
        for j in range(top):
            cb = b.coeffs[j]
            if cb != 0:
                out[base + j] = out[base + j] + ca * cb
    return LaurentExpansion(a.point, a.lam + b.lam, lead, tuple(out), trunc, a.mode)


def product_coefficient(
    a: LaurentExpansion, b: LaurentExpansion, exponent: int
) -> Scalar:
    """Coefficient of z^exponent in a*b without forming the full product."""
    _check_compatible(a, b)
    trunc = min(a.trunc + b.lead, b.trunc + a.lead)
    if exponent > trunc:
        raise FaithfulWindowError(
            f"product coefficient at {exponent} beyond faithful window {trunc}"
        )
    total = _zero(a.mode)
    lo = max(a.lead, exponent - b.trunc)
    hi = min(a.trunc, exponent - b.lead)
    for e in range(lo, hi + 1):
        ca = a.coeffs[e - a.lead]
        if ca != 0:
            cb = b.coeffs[exponent - e - b.lead]
            if cb != 0:
                total = total + ca * cb
    return total


def residue_at(a: LaurentExpansion) -> Scalar:
    """Oriented residue: coefficient of z^(-1), sign -1 at the minus point.

    Requires weight 1 and the exponent -1 inside the faithful window.
    """
    if a.lam != 1:
        raise WeightError(f"residue of a weight-{a.lam} expansion; weight 1 required")
    if a.trunc < -1:
        raise FaithfulWindowError("coefficient z^-1 beyond faithful window")
    c = a.coefficient(-1)
    return c if a.point is Point.PLUS else -c


def residue_of_product(a: LaurentExpansion, b: LaurentExpansion) -> Scalar:
    """Oriented residue of a*b, computed as a single convolution row."""
    if a.lam + b.lam != 1:
        raise WeightError(
            f"residue of a weight-{a.lam + b.lam} product; weight 1 required"
        )
    c = product_coefficient(a, b, -1)
    return c if a.point is Point.PLUS else -c


def raw_derivative(a: LaurentExpansion) -> LaurentExpansion:
    """Coefficientwise d/dz, ignoring the tensor weight (internal helper)."""
    coeffs = []
    for e, c in zip(range(a.lead, a.trunc + 1), a.coeffs):
        coeffs.append(e * c)
    return LaurentExpansion(
        a.point, a.lam, a.lead - 1, tuple(coeffs), a.trunc - 1, a.mode
    )


def d_function(a: LaurentExpansion) -> LaurentExpansion:
    """Exterior derivative of a function: weight 0 -> weight 1."""
    if a.lam != 0:
        raise WeightError(f"d of a weight-{a.lam} expansion; weight 0 required")
    return raw_derivative(a).with_weight(1)


def lie_derivative(e: LaurentExpansion, g: LaurentExpansion) -> LaurentExpansion:
    """Lie derivative of the weight-``lam`` form g along the vector field e.

    In local coordinates: (e*g' + lam*g*e') (dz)^lam.
    """
    if e.lam != -1:
        raise WeightError(f"vector field must have weight -1, got {e.lam}")
    _check_compatible(e, g)
    lam = g.lam
    first = series_mul(e, raw_derivative(g))
    if lam == 0:
        return first.with_weight(0)
    second = series_mul(raw_derivative(e), g).scale(
        _scalar_int(lam, g.mode)
    )
    return (first + second).with_weight(lam)


def _scalar_int(k: int, mode: Mode) -> Scalar:
    from fractions import Fraction

    if mode is Mode.EXACT:
        return Fraction(k)
    import mpmath

    return mpmath.mpc(k)


def max_coefficient_difference(
    a: LaurentExpansion,
    b: LaurentExpansion,
    abs_fn: Callable,
    lo: int | None = None,
    hi: int | None = None,
):
    """Max |a_e - b_e| over the overlap of the faithful windows.

    ``lo``/``hi`` optionally restrict the compared exponent range.
    """
    _check_compatible(a, b)
    lo_e = max(a.lead, b.lead) if lo is None else lo
    lo_e = min(lo_e, a.lead, b.lead)
    hi_e = min(a.trunc, b.trunc) if hi is None else min(hi, a.trunc, b.trunc)
    best = None
    for e in range(lo_e, hi_e + 1):
        d = abs_fn(a.coefficient(e) - b.coefficient(e))
        if best is None or d > best:
            best = d
    return best
