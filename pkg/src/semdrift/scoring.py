"""Anchor-relative local-neighbourhood change scores.

For a token, the first month it appears in is its anchor. Each later month
is compared with the anchor by building two second-order vectors (cosine
similarity of the token to a shared list of neighbour tokens, one vector per
month) and taking their cosine distance, ``1 - cos``.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_int
from .io import fmt_float, parse_float, read_csv, write_csv
from .snapshots import TemporalDataset, TokenFilter, is_emoji

__all__ = [
    "ScoringConfig",
    "NeighborList",
    "SecondOrderVector",
    "ScorePoint",
    "ChangeSeries",
    "InsufficientComponentsError",
    "top_k_neighbors",
    "second_order_pair",
    "change_score",
    "change_series",
    "score_tokens",
    "auto_targets",
    "ChangeScorer",
    "write_series_csv",
    "read_series_csv",
]


class InsufficientComponentsError(ValueError):
    """The shared neighbour index is shorter than ``min_components``."""

    def __init__(self, token, month, n_components, min_components):
        self.token = token
        self.month = month
        self.n_components = n_components
        super().__init__(
            f"{token!r} at {month}: {n_components} shared components < {min_components}"
        )


@dataclass(frozen=True)
class ScoringConfig:
    k: int = 25
    pool: int = 500
    min_components: int = 2
    filter: TokenFilter = field(default_factory=TokenFilter)

    def __post_init__(self):
        check_int(self.k, "k", min_value=1)
        check_int(self.pool, "pool", min_value=self.k)
        check_int(self.min_components, "min_components", min_value=2)


@dataclass(frozen=True)
class NeighborList:
    token: str
    month: str
    neighbors: tuple  # ((token, cosine), ...) best first

    @property
    def tokens(self):
        return [t for t, _ in self.neighbors]


@dataclass(frozen=True)
class SecondOrderVector:
    token: str
    month: str
    index: tuple
    components: np.ndarray


@dataclass(frozen=True)
class ScorePoint:
    """One month of a change series; ``score`` is None when missing."""

    month: str
    score: Optional[float]
    components: int
    reason: Optional[str] = None

    @property
    def missing(self):
        return self.score is None


@dataclass
class ChangeSeries:
    token: str
    anchor_month: str
    points: list

    @property
    def months(self):
        return [p.month for p in self.points]

    def observed(self):
        """(month, score) pairs for non-missing points."""
        return [(p.month, p.score) for p in self.points if p.score is not None]

    def scores(self):
        return np.array([np.nan if p.score is None else p.score for p in self.points])


def _similarities(snapshot, row):
    """Cosine of vocabulary row ``row`` against every row of the snapshot."""
    vecs = snapshot.vectors
    norms = snapshot.norms
    return (vecs @ vecs[row]) / (norms * norms[row])


def top_k_neighbors(snapshot, token, config=None):
    """Rank the ``pool`` nearest tokens, drop filtered ones, keep the first ``k``.

    Ties are broken by lexicographic token order.
    """
    config = config or ScoringConfig()
    row = snapshot.index_of(token)
    sims = _similarities(snapshot, row)
    tokens = snapshot.tokens
    n_other = len(tokens) - 1
    if n_other <= 0:
        return NeighborList(token, snapshot.month, ())

    sims_other = sims.copy()
    sims_other[row] = -np.inf
    if config.pool < n_other:
        # everything tied with the pool-th value survives so ties resolve by token
        threshold = -np.partition(-sims_other, config.pool - 1)[config.pool - 1]
        cand = np.flatnonzero(sims_other >= threshold)
    else:
        cand = np.flatnonzero(np.arange(len(tokens)) != row)
    order = np.lexsort((snapshot.token_rank[cand], -sims_other[cand]))
    ranked = cand[order[: config.pool]]
    kept = ranked[~snapshot.rejected_mask(config.filter)[ranked]][: config.k]
    keep = [(tokens[i], float(min(1.0, max(-1.0, sims[i])))) for i in kept]
    return NeighborList(token, snapshot.month, tuple(keep))


def _profile(snapshot, token, index):
    row = snapshot.index_of(token)
    rows = np.fromiter((snapshot.index_of(t) for t in index), dtype=np.intp, count=len(index))
    vecs = snapshot.vectors
    norms = snapshot.norms
    comps = (vecs[rows] @ vecs[row]) / (norms[rows] * norms[row])
    return np.clip(comps, -1.0, 1.0)


def _shared_index(snap_a, snap_t, nn_a, nn_t):
    union = set(nn_a.tokens) | set(nn_t.tokens)
    return tuple(sorted(t for t in union if t in snap_a and t in snap_t))


def _pair(snap_a, snap_t, token, nn_a, nn_t, config):
    index = _shared_index(snap_a, snap_t, nn_a, nn_t)
    if len(index) < config.min_components:
        raise InsufficientComponentsError(token, snap_t.month, len(index), config.min_components)
    return (
        SecondOrderVector(token, snap_a.month, index, _profile(snap_a, token, index)),
        SecondOrderVector(token, snap_t.month, index, _profile(snap_t, token, index)),
    )


def second_order_pair(snapshot_anchor, snapshot_t, token, config=None):
    """Second-order vectors of ``token`` at both months over one shared index.

    The index is the union of the token's k-NN at both months, restricted to
    tokens present in both vocabularies, in lexicographic order.
    """
    config = config or ScoringConfig()
    for snap in (snapshot_anchor, snapshot_t):
        if token not in snap:
            raise KeyError(f"token {token!r} not in snapshot {snap.month}")
    nn_a = top_k_neighbors(snapshot_anchor, token, config)
    nn_t = top_k_neighbors(snapshot_t, token, config)
    return _pair(snapshot_anchor, snapshot_t, token, nn_a, nn_t, config)


def _distance(va, vt):
    a, b = va.components, vt.components
    if np.array_equal(a, b):
        return 0.0
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        return None
    c = float(a @ b) / (na * nb)
    return min(2.0, max(0.0, 1.0 - c))


def _score(snap_a, snap_t, token, nn_a, nn_t, config):
    if snap_a is snap_t:
        # self-comparison is exactly zero whatever the index size
        return ScorePoint(snap_t.month, 0.0, len(_shared_index(snap_a, snap_t, nn_a, nn_t)))
    try:
        va, vt = _pair(snap_a, snap_t, token, nn_a, nn_t, config)
    except InsufficientComponentsError as exc:
        return ScorePoint(snap_t.month, None, exc.n_components, "insufficient_components")
    d = _distance(va, vt)
    if d is None:
        return ScorePoint(snap_t.month, None, len(va.index), "zero_second_order_vector")
    return ScorePoint(snap_t.month, d, len(va.index))


def change_score(snapshot_anchor, snapshot_t, token, config=None):
    """Cosine distance between the anchor and month-t second-order vectors.

    Returns a :class:`ScorePoint`; failures of the pair construction come back
    as a missing point with a reason rather than an exception.
    """
    config = config or ScoringConfig()
    for snap in (snapshot_anchor, snapshot_t):
        if token not in snap:
            raise KeyError(f"token {token!r} not in snapshot {snap.month}")
    nn_a = top_k_neighbors(snapshot_anchor, token, config)
    nn_t = nn_a if snapshot_t is snapshot_anchor else top_k_neighbors(snapshot_t, token, config)
    return _score(snapshot_anchor, snapshot_t, token, nn_a, nn_t, config)


def change_series(dataset, token, config=None):
    """Score ``token`` in every month it appears in, relative to its first month."""
    config = config or ScoringConfig()
    snaps = [s for s in dataset if token in s]
    if not snaps:
        raise KeyError(f"token {token!r} appears in no snapshot")
    anchor = snaps[0]
    nn_a = top_k_neighbors(anchor, token, config)
    points = []
    for snap in snaps:
        nn_t = nn_a if snap is anchor else top_k_neighbors(snap, token, config)
        points.append(_score(anchor, snap, token, nn_a, nn_t, config))
    return ChangeSeries(token, anchor.month, points)


def _safe_series(dataset, token, config):
    try:
        return change_series(dataset, token, config), None
    except KeyError as exc:
        return None, str(exc.args[0])


def score_tokens(dataset, tokens, config=None, n_jobs=None):
    """Score many tokens; returns ``(series_list, errors)``.

    ``errors`` maps each token that could not be scored to a message. Output
    order follows ``tokens`` regardless of ``n_jobs``.
    """
    config = config or ScoringConfig()
    tokens = list(tokens)
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_safe_series)(dataset, t, config) for t in tokens
    )
    series, errors = [], {}
    for tok, (s, err) in zip(tokens, results):
        if s is None:
            errors[tok] = err
        else:
            series.append(s)
    return series, errors


def auto_targets(dataset):
    """Every token of the target class (emoji) seen anywhere in the dataset."""
    return [t for t in dataset.vocabulary() if is_emoji(t)]


class ChangeScorer(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit`` on a dataset, ``transform`` tokens into series.

    Parameters
    ----------
    k : int, default=25
        Neighbours per second-order vector.
    pool : int, default=500
        Candidate pool ranked before filtering.
    min_components : int, default=2
        Shortest shared index that still yields a score.
    exclude_hashtags, exclude_targets : bool, default=True
        Neighbour filter switches.
    custom_exclusions : iterable of str, optional
    n_jobs : int, optional
        Thread workers used by ``transform``.
    """

    def __init__(self, k=25, pool=500, min_components=2, exclude_hashtags=True,
                 exclude_targets=True, custom_exclusions=None, n_jobs=None):
        self.k = k
        self.pool = pool
        self.min_components = min_components
        self.exclude_hashtags = exclude_hashtags
        self.exclude_targets = exclude_targets
        self.custom_exclusions = custom_exclusions
        self.n_jobs = n_jobs

    def _config(self):
        return ScoringConfig(
            k=self.k,
            pool=self.pool,
            min_components=self.min_components,
            filter=TokenFilter(self.exclude_hashtags, self.exclude_targets,
                               frozenset(self.custom_exclusions or ())),
        )

    def fit(self, X, y=None):
        if not isinstance(X, TemporalDataset):
            raise TypeError(f"ChangeScorer.fit expects a TemporalDataset, got {type(X).__name__}")
        self.config_ = self._config()
        self.dataset_ = X
        return self

    def transform(self, X):
        """Return one :class:`ChangeSeries` per token in ``X``.

        Raises KeyError if any token is absent from every snapshot.
        """
        check_is_fitted(self, "dataset_")
        tokens = [X] if isinstance(X, str) else list(X)
        series, errors = score_tokens(self.dataset_, tokens, self.config_, self.n_jobs)
        if errors:
            raise KeyError(next(iter(errors.values())))
        return series


SERIES_HEADER = ["token", "anchor_month", "month", "score", "components", "reason"]


def series_rows(series):
    for s in series:
        for p in s.points:
            yield [s.token, s.anchor_month, p.month, fmt_float(p.score), str(p.components), p.reason or ""]


def write_series_csv(series, path):
    return write_csv(path, SERIES_HEADER, series_rows(series))


def read_series_csv(path):
    """Inverse of :func:`write_series_csv`; series keep file order."""
    by_token = {}
    for row in read_csv(path):
        tok = row["token"]
        if tok not in by_token:
            by_token[tok] = ChangeSeries(tok, row["anchor_month"], [])
        by_token[tok].points.append(
            ScorePoint(row["month"], parse_float(row["score"]), int(row["components"]),
                       row.get("reason") or None)
        )
    return list(by_token.values())
