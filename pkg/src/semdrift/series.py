"""Turn raw change series into comparable shape profiles.

Stages, in order: bounded linear interpolation over calendar months,
Savitzky-Golay smoothing, per-profile z-normalisation.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import savgol_filter
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_int, month_from_index, month_index
from .io import write_csv

__all__ = [
    "SmootherConfig",
    "ShapeProfile",
    "interpolate",
    "savgol_smooth",
    "znorm",
    "run_pipeline",
    "ShapeProfiler",
    "write_profiles_csv",
]

# relative spread below which a profile is treated as constant
DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class SmootherConfig:
    """Savitzky-Golay settings.

    ``mode`` selects edge handling: ``"interp"`` fits the polynomial to the
    first/last full window (polynomials up to ``degree`` are reproduced
    exactly everywhere); ``"mirror"`` reflects the series about its ends.
    """

    window: int = 5
    degree: int = 3
    mode: str = "interp"

    def __post_init__(self):
        check_int(self.window, "window", min_value=1)
        check_int(self.degree, "degree", min_value=0)
        if self.window % 2 == 0:
            raise ValueError(f"window must be odd, got {self.window}")
        if self.degree >= self.window:
            raise ValueError(f"degree ({self.degree}) must be < window ({self.window})")
        if self.mode not in ("interp", "mirror"):
            raise ValueError(f"mode must be 'interp' or 'mirror', got {self.mode!r}")


@dataclass(frozen=True)
class ShapeProfile:
    token: str
    months: tuple
    values: np.ndarray
    interpolated: np.ndarray = None
    stages: frozenset = field(default_factory=frozenset)
    degenerate: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "months", tuple(self.months))
        if self.interpolated is None:
            object.__setattr__(self, "interpolated", np.zeros(len(values), dtype=bool))
        if len(self.months) != len(values):
            raise ValueError("months and values differ in length")

    def __len__(self):
        return len(self.values)


def interpolate(series):
    """Fill internal gaps linearly between the first and last observed month.

    Missing scores count as gaps. Nothing is extrapolated past either end.
    """
    obs = series.observed()
    if not obs:
        raise ValueError(f"series for {series.token!r} has no observed scores")
    x = np.array([month_index(m) for m, _ in obs], dtype=np.int64)
    y = np.array([v for _, v in obs], dtype=np.float64)
    grid = np.arange(x[0], x[-1] + 1)
    values = np.interp(grid, x, y)
    values[np.searchsorted(grid, x)] = y  # observed values kept bit-exact
    imputed = ~np.isin(grid, x)
    months = tuple(month_from_index(i) for i in grid)
    return ShapeProfile(series.token, months, values, imputed, frozenset({"interpolated"}))


def savgol_smooth(profile, config=None):
    """Least-squares polynomial smoothing over a sliding window.

    Profiles shorter than the window pass through unchanged.
    """
    config = config or SmootherConfig()
    stages = profile.stages | {"smoothed"}
    if len(profile) < config.window:
        return replace(profile, stages=stages)
    smoothed = savgol_filter(profile.values, config.window, config.degree, mode=config.mode)
    return replace(profile, values=smoothed, stages=stages)


def znorm(profile):
    """Shift to zero mean and scale to unit (population) standard deviation.

    A constant profile maps to zeros with ``degenerate=True``.
    """
    v = profile.values
    stages = profile.stages | {"znormed"}
    mu = v.mean()
    sd = v.std()
    scale = max(1.0, float(np.max(np.abs(v))))
    if sd <= DEGENERATE_RTOL * scale:
        return replace(profile, values=np.zeros_like(v), stages=stages, degenerate=True)
    z = (v - mu) / sd
    return replace(profile, values=z, stages=stages, degenerate=False)


def run_pipeline(series, config=None):
    return znorm(savgol_smooth(interpolate(series), config))


class ShapeProfiler(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping change series to z-normalised shape profiles."""

    def __init__(self, window=5, degree=3, mode="interp"):
        self.window = window
        self.degree = degree
        self.mode = mode

    def fit(self, X=None, y=None):
        self.config_ = SmootherConfig(self.window, self.degree, self.mode)
        return self

    def transform(self, X):
        config = SmootherConfig(self.window, self.degree, self.mode)
        return [run_pipeline(s, config) for s in X]


def write_profiles_csv(profiles, path):
    rows = (
        [p.token, m, float(v), int(flag)]
        for p in profiles
        for m, v, flag in zip(p.months, p.values, p.interpolated)
    )
    return write_csv(path, ["token", "month", "value", "interpolated_flag"], rows)
