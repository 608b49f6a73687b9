"""Exception types shared across the package."""

import numpy as np


class DensityRidgeError(Exception):
    """Base class for all package errors."""


class InputError(DensityRidgeError, ValueError):
    """Invalid arguments: wrong shapes, non-finite values, violated preconditions."""


class NumericalError(DensityRidgeError, ArithmeticError):
    """A numerical routine failed; ``point`` holds the offending state if known."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = None if point is None else tuple(float(v) for v in np.ravel(point))


class ConnectivityError(DensityRidgeError):
    """Requested nodes or modes are not connected in the neighbourhood graph.

    Widen the neighbourhood (larger ``k``) or treat the ridge as disconnected.
    """

    def __init__(self, message, components=None):
        super().__init__(message)
        self.components = components
