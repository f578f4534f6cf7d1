"""Shape similarity between profiles and clustering of change patterns.

Profiles are compared with dynamic time warping. Each token is then encoded
as a binary vector marking its ``m`` most similar other tokens, and those
vectors are grouped by agglomerative clustering.
"""

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.cluster.hierarchy import cut_tree, linkage as scipy_linkage
from scipy.spatial.distance import pdist
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._stats import monthly_stats
from ._validation import check_int
from .io import write_csv
from .series import ShapeProfile, SmootherConfig, run_pipeline

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is optional
    njit = None

__all__ = [
    "dtw_distance",
    "ShapeDistanceMatrix",
    "distance_matrix",
    "NearestShapeFeatures",
    "nearest_shape_features",
    "ClusterReport",
    "CurvePoint",
    "hierarchical_cluster",
    "characteristic_shape",
    "NearestShapeEncoder",
    "ShapeClusterer",
]

LINKAGES = ("average", "complete", "single", "ward", "weighted")


def _dtw_loop(a, b):
    n, m = a.shape[0], b.shape[0]
    inf = np.inf
    prev = np.full(m + 1, inf)
    prev[0] = 0.0
    cur = np.empty(m + 1)
    for i in range(n):
        cur[0] = inf
        ai = a[i]
        for j in range(m):
            best = prev[j]
            if prev[j + 1] < best:
                best = prev[j + 1]
            if cur[j] < best:
                best = cur[j]
            cur[j + 1] = abs(ai - b[j]) + best
        prev, cur = cur, prev
    return prev[m]


_dtw_kernel = njit(nogil=True, cache=False)(_dtw_loop) if njit is not None else _dtw_loop


def _values(x):
    v = x.values if isinstance(x, ShapeProfile) else x
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("DTW needs non-empty 1-D profiles")
    return v


def dtw_distance(a, b):
    """Accumulated cost of the cheapest monotone alignment of ``a`` and ``b``.

    Local cost is ``|a_i - b_j|``; steps are match, insertion and deletion;
    no warping window. Accepts profiles or plain sequences.
    """
    return float(_dtw_kernel(_values(a), _values(b)))


@dataclass(frozen=True)
class ShapeDistanceMatrix:
    tokens: tuple
    distances: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=np.float64)
        if d.shape != (len(self.tokens), len(self.tokens)):
            raise ValueError("distance matrix shape does not match token list")
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "distances", d)


def _row(values, i):
    return [_dtw_kernel(values[i], values[j]) for j in range(i + 1, len(values))]


def distance_matrix(profiles, n_jobs=None):
    """All pairwise DTW distances, tokens in lexicographic order.

    Each unordered pair is computed once; rows of the upper triangle may run
    on parallel threads without affecting the result.
    """
    profiles = sorted(profiles, key=lambda p: p.token)
    if len(profiles) < 2:
        raise ValueError("need at least 2 profiles")
    tokens = [p.token for p in profiles]
    if len(set(tokens)) != len(tokens):
        raise ValueError("duplicate tokens among profiles")
    values = [_values(p) for p in profiles]
    n = len(values)
    rows = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(_row)(values, i) for i in range(n - 1))
    d = np.zeros((n, n))
    for i, row in enumerate(rows):
        d[i, i + 1:] = row
        d[i + 1:, i] = row
    return ShapeDistanceMatrix(tuple(tokens), d)


@dataclass(frozen=True)
class NearestShapeFeatures:
    token: str
    neighbors: tuple
    feature_vector: np.ndarray


def nearest_shape_features(matrix, m=10):
    """One-hot encode each token's ``m`` nearest other tokens.

    Uses only the distance matrix. Ties resolve lexicographically; ``m`` is
    capped at ``len(tokens) - 1``.
    """
    check_int(m, "m", min_value=1)
    tokens = matrix.tokens
    n = len(tokens)
    m = min(m, n - 1)
    out = []
    for i, tok in enumerate(tokens):
        order = sorted((j for j in range(n) if j != i), key=lambda j: (matrix.distances[i, j], tokens[j]))
        chosen = order[:m]
        vec = np.zeros(n, dtype=np.int8)
        vec[chosen] = 1
        out.append(NearestShapeFeatures(tok, tuple(tokens[j] for j in chosen), vec))
    return out


@dataclass(frozen=True)
class CurvePoint:
    cluster: str
    month: str
    mean: float
    std: float
    n_members: int
    kind: str


@dataclass
class ClusterReport:
    tokens: tuple
    assignments: dict
    n_clusters: int
    sizes: list
    linkage: np.ndarray
    characteristic_shapes: list = field(default_factory=list)
    overall_curve: list = field(default_factory=list)

    def members(self, cluster):
        return [t for t in self.tokens if self.assignments[t] == cluster]

    def labels_for(self, tokens):
        return np.array([self.assignments[t] for t in tokens])


def _relabel(raw, tokens):
    """Cluster ids ordered by size (largest first), then by first member token."""
    groups = {}
    for tok, lab in zip(tokens, raw):
        groups.setdefault(int(lab), []).append(tok)
    order = sorted(groups, key=lambda g: (-len(groups[g]), min(groups[g])))
    mapping = {g: new for new, g in enumerate(order)}
    return [mapping[int(lab)] for lab in raw]


def hierarchical_cluster(features, n_clusters, linkage="average"):
    """Agglomerative clustering of feature vectors, cut to ``n_clusters``.

    Distances between feature vectors are Euclidean. Input order does not
    matter: vectors are sorted by token before merging.
    """
    features = sorted(features, key=lambda f: f.token)
    n = len(features)
    n_clusters = check_int(n_clusters, "n_clusters", min_value=1)
    if n_clusters > n:
        raise ValueError(f"n_clusters={n_clusters} exceeds the number of tokens ({n})")
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    tokens = tuple(f.token for f in features)
    if n == 1:
        return ClusterReport(tokens, {tokens[0]: 0}, 1, [1], np.empty((0, 4)))
    X = np.vstack([f.feature_vector for f in features]).astype(np.float64)
    Z = scipy_linkage(pdist(X, metric="euclidean"), method=linkage)
    raw = cut_tree(Z, n_clusters=n_clusters).ravel()
    labels = _relabel(raw, tokens)
    sizes = [labels.count(c) for c in range(n_clusters)]
    return ClusterReport(tokens, dict(zip(tokens, labels)), n_clusters, sizes, Z)


def _curves(label, profiles, series):
    pts = [
        CurvePoint(label, m, mu, sd, n, "znormed")
        for m, mu, sd, n in monthly_stats(zip(p.months, p.values) for p in profiles)
    ]
    if series is not None:
        pts += [
            CurvePoint(label, m, mu, sd, n, "raw")
            for m, mu, sd, n in monthly_stats(s.observed() for s in series)
        ]
    return pts


def characteristic_shape(report, profiles, series=None):
    """Per-cluster mean/std curves aligned on calendar months.

    ``kind="znormed"`` curves average the member profiles; ``kind="raw"``
    curves (only when ``series`` is given) average observed change scores.
    Months average over the members present that month. Fills and returns
    ``report.characteristic_shapes`` and ``report.overall_curve``.
    """
    by_token = {p.token: p for p in profiles}
    raw_by_token = {s.token: s for s in series} if series is not None else None
    missing = [t for t in report.tokens if t not in by_token]
    if missing:
        raise KeyError(f"no profile for clustered tokens {missing[:5]}")
    shapes = []
    for c in range(report.n_clusters):
        members = report.members(c)
        raw = [raw_by_token[t] for t in members] if raw_by_token is not None else None
        shapes += _curves(str(c), [by_token[t] for t in members], raw)
    raw_all = [raw_by_token[t] for t in report.tokens] if raw_by_token is not None else None
    report.characteristic_shapes = shapes
    report.overall_curve = _curves("all", [by_token[t] for t in report.tokens], raw_all)
    return shapes


class NearestShapeEncoder(TransformerMixin, BaseEstimator):
    """Fit DTW distances over profiles; transform to nearest-shape one-hot rows."""

    def __init__(self, n_neighbors=10, n_jobs=None):
        self.n_neighbors = n_neighbors
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        check_int(self.n_neighbors, "n_neighbors", min_value=1)
        self.distance_matrix_ = distance_matrix(X, n_jobs=self.n_jobs)
        self.tokens_ = self.distance_matrix_.tokens
        self.features_ = nearest_shape_features(self.distance_matrix_, self.n_neighbors)
        return self

    def transform(self, X):
        check_is_fitted(self, "features_")
        by_token = {f.token: f.feature_vector for f in self.features_}
        rows = []
        for p in X:
            tok = p.token if isinstance(p, ShapeProfile) else p
            if tok not in by_token:
                raise KeyError(f"token {tok!r} was not seen during fit")
            rows.append(by_token[tok])
        return np.vstack(rows)


class ShapeClusterer(ClusterMixin, BaseEstimator):
    """Full trajectory-shape clustering of change series.

    ``fit`` runs interpolation, smoothing and z-normalisation, DTW distances,
    nearest-shape encoding and agglomerative clustering. ``labels_`` follows
    the order of the input series.

    Parameters
    ----------
    n_clusters : int, default=5
    n_neighbors : int, default=10
        Most similar shapes encoded per token.
    window, degree : int, default=5, 3
        Savitzky-Golay settings.
    smoothing_mode : {"interp", "mirror"}, default="interp"
    linkage : str, default="average"
    n_jobs : int, optional
        Threads used for DTW.
    """

    def __init__(self, n_clusters=5, n_neighbors=10, window=5, degree=3,
                 smoothing_mode="interp", linkage="average", n_jobs=None):
        self.n_clusters = n_clusters
        self.n_neighbors = n_neighbors
        self.window = window
        self.degree = degree
        self.smoothing_mode = smoothing_mode
        self.linkage = linkage
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        series = list(X)
        if len(series) < 2:
            raise ValueError("need at least 2 series to cluster")
        check_int(self.n_clusters, "n_clusters", min_value=1, max_value=len(series))
        config = SmootherConfig(self.window, self.degree, self.smoothing_mode)
        self.profiles_ = [run_pipeline(s, config) for s in series]
        encoder = NearestShapeEncoder(self.n_neighbors, self.n_jobs).fit(self.profiles_)
        self.distance_matrix_ = encoder.distance_matrix_
        self.features_ = encoder.features_
        self.report_ = hierarchical_cluster(self.features_, self.n_clusters, self.linkage)
        characteristic_shape(self.report_, self.profiles_, series)
        self.labels_ = self.report_.labels_for([s.token for s in series])
        return self


def write_distance_matrix_csv(matrix, path):
    rows = ([tok] + [float(x) for x in row] for tok, row in zip(matrix.tokens, matrix.distances))
    return write_csv(path, ["token"] + list(matrix.tokens), rows)


def write_assignments_csv(report, path):
    return write_csv(path, ["token", "cluster"], ([t, report.assignments[t]] for t in report.tokens))


def write_linkage_csv(report, path):
    n = len(report.tokens)

    def label(node):
        return report.tokens[node] if node < n else ""

    rows = (
        [step, int(a), int(b), label(int(a)), label(int(b)), float(dist), int(size)]
        for step, (a, b, dist, size) in enumerate(report.linkage)
    )
    header = ["step", "left_id", "right_id", "left_token", "right_token", "distance", "size"]
    return write_csv(path, header, rows)


def write_shapes_csv(report, path):
    pts = list(report.overall_curve) + list(report.characteristic_shapes)
    rows = ([p.cluster, p.month, p.mean, p.std, p.n_members, p.kind] for p in pts)
    return write_csv(path, ["cluster", "month", "mean", "std", "n_members", "kind"], rows)
