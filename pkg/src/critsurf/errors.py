"""Semantic exception hierarchy.

The CLI maps these onto its exit codes (usage 1, data 2, cache 3), so
library code should raise the most specific class that applies instead
of bare ValueError/RuntimeError.
"""


class CritsurfError(Exception):
    """Base class for all errors raised by this package."""


class InputError(CritsurfError, ValueError):
    """Arguments violate a documented contract (domain, shape, flags)."""


class DataError(CritsurfError):
    """A dataset cannot be used: ingestion failure, missing values,
    or a sample that does not match the calibrated surfaces."""


class CacheError(CritsurfError):
    """A surface cache file is unreadable, has the wrong version or
    schema, or fails the stored invariants."""


class CalibrationError(CritsurfError):
    """Monte-Carlo calibration could not produce a valid local level.

    Defensive: with a sane configuration the search always succeeds,
    because shrinking the local level drives the global size to zero.
    """
