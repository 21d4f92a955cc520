"""Helpers for validating numpy arrays inside pydantic models."""

from typing import Any, Optional, Sequence

import numpy as np

from ..errors import ShapeMismatchError


def as_array(
    value: Any,
    name: str,
    dtype: Any = np.float64,
    ndim: Optional[int] = None,
    trailing: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """
    Coerce a value to a numpy array and check its rank and trailing dims.

    Args:
        value: Array-like input
        name: Field name used in error messages
        dtype: Target dtype
        ndim: Required number of dimensions
        trailing: Required sizes of the last dimensions

    Returns:
        The converted array (a copy only when conversion requires one)
    """
    array = np.asarray(value, dtype=dtype)
    if ndim is not None and array.ndim != ndim:
        raise ShapeMismatchError(
            f"{name} must have {ndim} dimensions, got shape {array.shape}"
        )
    if trailing:
        got = array.shape[-len(trailing) :]
        if tuple(got) != tuple(trailing):
            raise ShapeMismatchError(
                f"{name} must end with dims {tuple(trailing)}, got shape {array.shape}"
            )
    return array


def require_finite(array: np.ndarray, name: str) -> np.ndarray:
    """Raise if any entry is NaN or infinite."""
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains non-finite values")
    return array
