"""Semantic change of tokens across monthly embedding snapshots.

Scores each token's local-neighbourhood drift from its first month,
clusters the resulting trajectories by shape, and summarises volatility
and concreteness of the most changed tokens.
"""

from .cohorts import aggregate_curve, percentile_cohorts, top_fraction, volatility, volatility_table
from .concreteness import concreteness_report, one_sample_ttest, token_concreteness
from .scoring import (
    ChangeScorer,
    ChangeSeries,
    ScoringConfig,
    change_score,
    change_series,
    score_tokens,
    second_order_pair,
    top_k_neighbors,
)
from .series import ShapeProfiler, SmootherConfig, interpolate, run_pipeline, savgol_smooth, znorm
from .shapes import (
    NearestShapeEncoder,
    ShapeClusterer,
    characteristic_shape,
    distance_matrix,
    dtw_distance,
    hierarchical_cluster,
    nearest_shape_features,
)
from .snapshots import EmbeddingSnapshot, TemporalDataset, TokenFilter, cosine, load_dataset, parse_snapshot
from .synthetic import DriftSpec, Pattern, evaluate_recovery, generate

__version__ = "0.1.0"
