"""Exception types raised by the treelets package.

Every error that reflects bad input or configuration derives from
``ValueError`` so callers (and the CLI) can treat them uniformly.
"""


class TreeletError(Exception):
    """Base class for package errors."""


class ShapeError(TreeletError, ValueError):
    """Input has the wrong number of rows, columns or dimensions."""


class DataError(TreeletError, ValueError):
    """Input values are unusable (non-finite, asymmetric, ...)."""


class ConfigError(TreeletError, ValueError):
    """Invalid parameter, grid or generator specification."""


class DegenerateError(TreeletError, ValueError):
    """A score or model is undefined for the given input."""
