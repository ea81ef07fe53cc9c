"""Exception types shared across the package."""


class ApgfError(Exception):
    """Base class for all apgf errors."""


class ValidationError(ApgfError):
    """Bad input: shapes, value ranges, config fields, preconditions."""


class GraphFormatError(ValidationError):
    """A graph file failed structural validation; the message names the field."""


class NumericError(ApgfError):
    """A computation produced non-finite values."""


class CapExceededError(ApgfError):
    """Brute-force search refused above the node cap; raise the cap explicitly."""
