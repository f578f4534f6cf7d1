"""Volatility of change series, percentile cohorts and aggregate curves."""

import math
from dataclasses import dataclass, field

import numpy as np

from ._stats import monthly_stats
from ._validation import check_cuts, check_fraction
from .io import parse_float, read_csv, write_csv

__all__ = [
    "VolatilityTable",
    "CohortCurves",
    "volatility",
    "volatility_table",
    "percentile_cohorts",
    "aggregate_curve",
    "cohort_curves",
    "top_fraction",
    "DEFAULT_CUTS",
]

DEFAULT_CUTS = (50, 75, 90, 95, 99)


@dataclass
class VolatilityTable:
    """Per-token volatility; tokens with fewer than two scores sit in ``excluded``."""

    volatility: dict
    n_points: dict
    excluded: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.volatility)

    @property
    def tokens(self):
        return sorted(self.volatility)


@dataclass
class CohortCurves:
    label: str
    points: list  # (month, mean, std, count)
    size: int = 0


def _scores(series):
    if hasattr(series, "observed"):
        return [v for _, v in series.observed()]
    return [v for v in series if v is not None and not math.isnan(v)]


def volatility(series):
    """Population standard deviation of the non-missing change scores."""
    scores = _scores(series)
    if len(scores) < 2:
        raise ValueError(f"volatility needs at least 2 scores, got {len(scores)}")
    return float(np.std(np.asarray(scores, dtype=np.float64)))


def volatility_table(series_list):
    vol, npts, excluded = {}, {}, {}
    for s in series_list:
        n = len(_scores(s))
        if n < 2:
            excluded[s.token] = n
        else:
            vol[s.token] = volatility(s)
            npts[s.token] = n
    return VolatilityTable(vol, npts, excluded)


def _band_label(cut):
    return f"p{cut:g}"


def cohort_labels(cuts=DEFAULT_CUTS):
    cuts = check_cuts(cuts)
    labels = [_band_label(c) for c in cuts]
    if cuts[0] > 0:
        labels.insert(0, f"below_{_band_label(cuts[0])}")
    return labels


def percentiles(table):
    """Volatility percentile of each token, ``100 * rank / (n - 1)``.

    Equal volatilities share the average of their ranks, so the result does
    not depend on token names.
    """
    items = sorted(table.volatility.items(), key=lambda kv: (kv[1], kv[0]))
    n = len(items)
    if n == 1:
        return {items[0][0]: 100.0}
    out = {}
    i = 0
    while i < n:
        j = i
        while j + 1 < n and items[j + 1][1] == items[i][1]:
            j += 1
        for r in range(i, j + 1):
            out[items[r][0]] = 100.0 * (i + j) / (2 * (n - 1))
        i = j + 1
    return out


def percentile_cohorts(table, cuts=DEFAULT_CUTS):
    """Assign each token to the band ``[cut_i, cut_{i+1})`` holding its percentile.

    The last band is closed at 100. Tokens under the first cut are labelled
    ``below_p<cut>`` so the assignment still covers every token.
    """
    cuts = check_cuts(cuts)
    if len(table) == 0:
        raise ValueError("empty volatility table")
    out = {}
    for tok, pct in percentiles(table).items():
        label = f"below_{_band_label(cuts[0])}"
        for c in cuts:
            if pct >= c:
                label = _band_label(c)
        out[tok] = label
    return dict(sorted(out.items()))


def aggregate_curve(series_group, label="all"):
    """Per-calendar-month mean/std/count over the group's non-missing scores."""
    group = list(series_group)
    if not group:
        raise ValueError("empty series group")
    return CohortCurves(label, monthly_stats(s.observed() for s in group), len(group))


def cohort_curves(series_list, assignment, labels=None):
    """One curve per cohort (in ``labels`` order) plus an ``all`` curve."""
    by_token = {s.token: s for s in series_list}
    labels = labels or sorted(set(assignment.values()))
    curves = [aggregate_curve((by_token[t] for t in assignment if t in by_token), "all")]
    for lab in labels:
        members = [by_token[t] for t, c in assignment.items() if c == lab and t in by_token]
        if members:
            curves.append(aggregate_curve(members, lab))
    return curves


def top_fraction(table, fraction=0.10):
    """The ``ceil(fraction * n)`` most volatile tokens, most volatile first."""
    fraction = check_fraction(fraction)
    n = len(table)
    # round first so 0.1 * 530 counts as 53, not 54
    count = math.ceil(round(fraction * n, 9))
    ranked = sorted(table.volatility.items(), key=lambda kv: (-kv[1], kv[0]))
    return [t for t, _ in ranked[:count]]


def write_volatility_csv(table, cohorts, path):
    rows = (
        [t, table.volatility[t], table.n_points[t], cohorts.get(t, "")]
        for t in table.tokens
    )
    return write_csv(path, ["token", "volatility", "n_points", "cohort"], rows)


def read_volatility_csv(path):
    vol, npts = {}, {}
    for row in read_csv(path):
        v = parse_float(row["volatility"])
        if v is None:
            continue
        vol[row["token"]] = v
        npts[row["token"]] = int(row["n_points"])
    return VolatilityTable(vol, npts)


def write_curves_csv(curves, path):
    rows = ([c.label, m, mu, sd, n] for c in curves for m, mu, sd, n in c.points)
    return write_csv(path, ["cohort", "month", "mean", "std", "count"], rows)
