"""Exception hierarchy shared across the package.

Every domain error derives from CitetrendError so callers (notably the
CLI) can distinguish data/model problems from programming errors.
"""


class CitetrendError(Exception):
    """Base class for all citetrend domain errors."""
