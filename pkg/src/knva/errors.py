"""Exception hierarchy shared by all knva modules."""

from __future__ import annotations


class KnvaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(KnvaError):
    """Invalid configuration, geometry, or file input."""


class ModeMismatchError(KnvaError):
    """Exact and approximate scalars were mixed in one computation."""


class PointMismatchError(KnvaError):
    """Local expansions at different marked points were combined."""


class WeightError(KnvaError):
    """A tensor weight precondition was violated."""


class FaithfulWindowError(KnvaError):
    """A requested coefficient lies outside the faithful truncation window."""


class WindowOverflowError(KnvaError):
    """A computation needs basis indices or table entries outside the
    constructed index window."""


class SingularSystemError(KnvaError):
    """A basis-section linear solve was singular; the marked points are in
    non-generic position or the precision is insufficient."""


class PrecisionError(KnvaError):
    """Computed residuals exceed the configured tolerance, indicating that
    the working precision is too low for the requested window."""
