"""Input validation helpers shared by the estimators and functional API."""

import math
import numbers
import re

import numpy as np

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


def check_int(value, name, min_value=None, max_value=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if min_value is not None and value < min_value:
        raise ValueError(f"{name} must be >= {min_value}, got {value}")
    if max_value is not None and value > max_value:
        raise ValueError(f"{name} must be <= {max_value}, got {value}")
    return value


def check_fraction(value, name="fraction"):
    """Validate a fraction in the half-open interval (0, 1]."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not (0.0 < value <= 1.0) or math.isnan(value):
        raise ValueError(f"{name} must lie in (0, 1], got {value}")
    return value


def check_month(month):
    """Return ``month`` if it is a valid ``YYYY-MM`` string."""
    if not isinstance(month, str):
        raise TypeError(f"month must be a 'YYYY-MM' string, got {month!r}")
    m = _MONTH_RE.match(month)
    if m is None or not 1 <= int(m.group(2)) <= 12:
        raise ValueError(f"invalid month {month!r}; expected 'YYYY-MM'")
    return month


def month_index(month):
    """Number of months since year 0; consecutive calendar months differ by 1."""
    check_month(month)
    return int(month[:4]) * 12 + int(month[5:7]) - 1


def month_from_index(index):
    year, rem = divmod(int(index), 12)
    return f"{year:04d}-{rem + 1:02d}"


def month_range(first, last):
    """Inclusive list of calendar months from ``first`` to ``last``."""
    return [month_from_index(i) for i in range(month_index(first), month_index(last) + 1)]


def check_vector(v, name="vector"):
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_cuts(cuts):
    cuts = [float(c) for c in cuts]
    if not cuts:
        raise ValueError("cuts must be non-empty")
    if any(c < 0 or c > 100 for c in cuts):
        raise ValueError(f"cuts must lie in [0, 100], got {cuts}")
    if any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise ValueError(f"cuts must be strictly increasing, got {cuts}")
    return cuts
