"""Scalar arithmetic in two modes: exact rationals and big complex floats.

A whole atlas (and everything derived from it) is either exact or
approximate; the two modes never mix.  Exact scalars are
:class:`fractions.Fraction`, approximate scalars are :class:`mpmath.mpc`
values carried at an explicit working precision.

Serialization formats (used by every file this package writes):

* exact:       ``"p/q"`` in lowest terms, q > 0;
* big complex: ``"(re,im)@digits"`` with decimal mantissas printed to the
  stated number of significant digits.
"""

from __future__ import annotations

import enum
import re
from fractions import Fraction
from typing import Union

import mpmath
from mpmath import mp

from .errors import ConfigError, ModeMismatchError

Scalar = Union[Fraction, mpmath.mpc]


class Mode(enum.Enum):
    EXACT = "exact"
    COMPLEX = "complex"


def check_same_mode(a: Mode, b: Mode) -> Mode:
    if a is not b:
        raise ModeMismatchError(f"cannot mix scalar modes {a.value} and {b.value}")
    return a


class ScalarContext:
    """Mode plus precision bookkeeping for one atlas and its derived data.

    ``precision`` is the advertised number of decimal digits; arithmetic is
    carried out at ``working_dps`` which includes guard digits for series
    recursions.  ``tolerance`` is the single comparison knob: 0 in exact
    mode, 10**(-precision/2) otherwise unless overridden.
    """

    def __init__(
        self,
        mode: Mode,
        precision: int | None = None,
        tolerance: Fraction | float | None = None,
        working_dps: int | None = None,
    ):
        self.mode = mode
        if mode is Mode.EXACT:
            self.precision = None
            self.working_dps = 15
            self.tolerance = Fraction(0) if tolerance is None else tolerance
        else:
            if precision is None or precision < 1:
                raise ConfigError("complex mode requires a positive precision")
            self.precision = int(precision)
            self.working_dps = (
                int(working_dps) if working_dps else 2 * self.precision + 20
            )
            if self.working_dps < self.precision + 10:
                raise ConfigError("working_dps must exceed precision + 10")
            if tolerance is None:
                with mp.workdps(self.working_dps):
                    self.tolerance = mpmath.mpf(10) ** (-self.precision / 2)
            else:
                self.tolerance = tolerance

    # -- constructors --------------------------------------------------

    def zero(self) -> Scalar:
        return Fraction(0) if self.mode is Mode.EXACT else mpmath.mpc(0)

    def one(self) -> Scalar:
        return Fraction(1) if self.mode is Mode.EXACT else mpmath.mpc(1)

    def from_int(self, k: int) -> Scalar:
        return Fraction(k) if self.mode is Mode.EXACT else mpmath.mpc(k)

    def from_fraction(self, q: Fraction) -> Scalar:
        if self.mode is Mode.EXACT:
            return q
        with mp.workdps(self.working_dps):
            return mpmath.mpc(q.numerator) / q.denominator

    def zero_mag(self):
        """Additive identity for residual magnitudes (real-valued)."""
        return Fraction(0) if self.mode is Mode.EXACT else mpmath.mpf(0)

    def workdps(self):
        """Context manager pinning mpmath to this context's working precision.

        Every public operation that does scalar arithmetic on stored values
        must run inside this context; stored mpc values are exact binary
        data, but new arithmetic rounds at the ambient mpmath precision.
        """
        return mp.workdps(self.working_dps)

    # -- predicates ----------------------------------------------------

    def is_zero(self, x: Scalar, tol: Scalar | None = None) -> bool:
        if self.mode is Mode.EXACT:
            return x == 0
        t = self.tolerance if tol is None else tol
        with mp.workdps(self.working_dps):
            return mpmath.fabs(x) <= t

    def abs(self, x: Scalar):
        if self.mode is Mode.EXACT:
            return abs(x)
        with mp.workdps(self.working_dps):
            return mpmath.fabs(x)

    def max_abs(self, values) -> Scalar:
        best = None
        for v in values:
            a = self.abs(v)
            if best is None or a > best:
                best = a
        if best is None:
            return Fraction(0) if self.mode is Mode.EXACT else mpmath.mpf(0)
        return best

    # -- serialization -------------------------------------------------

    def format(self, x: Scalar) -> str:
        if self.mode is Mode.EXACT:
            f = Fraction(x)
            return f"{f.numerator}/{f.denominator}"
        digits = (self.precision or 15) + 10
        with mp.workdps(self.working_dps):
            z = mpmath.mpc(x)
            re_s = mpmath.nstr(z.real, digits, show_zero_exponent=False)
            im_s = mpmath.nstr(z.imag, digits, show_zero_exponent=False)
        return f"({re_s},{im_s})@{digits}"

    def parse(self, text: str) -> Scalar:
        return parse_scalar(text, self)

    def residual_str(self, x) -> str:
        """Short human form of a residual magnitude."""
        if self.mode is Mode.EXACT:
            f = Fraction(x)
            return "0" if f == 0 else f"{f.numerator}/{f.denominator}"
        with mp.workdps(self.working_dps):
            return mpmath.nstr(mpmath.mpf(x), 3)


_EXACT_RE = re.compile(r"^\s*(-?\d+)\s*/\s*(\d+)\s*$")
_COMPLEX_RE = re.compile(r"^\s*\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)\s*@\s*(\d+)\s*$")


def parse_scalar(text: str, ctx: ScalarContext) -> Scalar:
    m = _EXACT_RE.match(text)
    if m is not None:
        if ctx.mode is not Mode.EXACT:
            raise ModeMismatchError(f"exact scalar {text!r} in a complex-mode file")
        den = int(m.group(2))
        if den == 0:
            raise ConfigError(f"zero denominator in scalar {text!r}")
        return Fraction(int(m.group(1)), den)
    m = _COMPLEX_RE.match(text)
    if m is not None:
        if ctx.mode is not Mode.COMPLEX:
            raise ModeMismatchError(f"complex scalar {text!r} in an exact-mode file")
        with mp.workdps(ctx.working_dps):
            return mpmath.mpc(mpmath.mpf(m.group(1)), mpmath.mpf(m.group(2)))
    raise ConfigError(f"cannot parse scalar {text!r}")


def parse_complex_literal(text: str, working_dps: int) -> mpmath.mpc:
    """Parse a user-facing complex literal like ``0+1i`` or ``-0.23+0.11i``."""
    s = text.strip().replace(" ", "")
    s = s.replace("i", "j").replace("J", "j")
    with mp.workdps(working_dps):
        try:
            return mpmath.mpmathify(s)
        except Exception as exc:
            raise ConfigError(f"cannot parse complex number {text!r}") from exc
