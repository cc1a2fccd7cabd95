"""Input validation helpers shared by the library entry points."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


def check_finite_scalar(name: str, value: float) -> float:
    """Coerce to float and require a finite value."""
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def check_positive_scalar(name: str, value: float) -> float:
    value = check_finite_scalar(name, value)
    if value <= 0.0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value


def check_in_range(name: str, value: float, lo: float, hi: float,
                   inclusive: bool = True) -> float:
    value = check_finite_scalar(name, value)
    inside = lo <= value <= hi if inclusive else lo < value < hi
    if not inside:
        bracket = "[]" if inclusive else "()"
        raise ValueError(
            f"{name} must lie in {bracket[0]}{lo}, {hi}{bracket[1]}, got {value!r}"
        )
    return value


def check_labels_array(X, name: str = "X") -> np.ndarray:
    """Validate a 1-D array of finite float labels; squeezes column vectors."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 1:
        arr = np.squeeze(arr)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def check_detections(dets: Sequence, require_var: bool = False):
    """Validate a sequence of Detection objects at a pipeline boundary.

    Returns the detections as a list. With ``require_var`` set, reports the
    position of the first detection lacking a variance vector.
    """
    from .suppression import Detection

    out = list(dets)
    for i, det in enumerate(out):
        if not isinstance(det, Detection):
            raise TypeError(
                f"detection {i} is {type(det).__name__}, expected Detection"
            )
        if require_var and det.var is None:
            raise ValueError(
                f"detection {i} has no variance vector but voting is enabled"
            )
    return out
