"""One test per acceptance criterion; each records a PASS/FAIL line in the summary."""

import json
import time
from collections import Counter

import numpy as np
import pytest

from semdrift._validation import month_from_index, month_index
from semdrift.cli import main
from semdrift.cohorts import VolatilityTable, percentile_cohorts, top_fraction, volatility_table
from semdrift.concreteness import one_sample_ttest
from semdrift.scoring import (
    ChangeSeries,
    ScorePoint,
    ScoringConfig,
    change_score,
    change_series,
    score_tokens,
    top_k_neighbors,
)
from semdrift.series import ShapeProfile, interpolate, savgol_smooth, znorm
from semdrift.shapes import ShapeClusterer, dtw_distance
from semdrift.snapshots import EmbeddingSnapshot, TemporalDataset, TokenFilter
from semdrift.synthetic import Pattern, evaluate_recovery, generate, planted_specs

import reference_data as ref
from conftest import random_snapshot
from oracles import brute_dtw, brute_knn


def test_criterion_1_concreteness_ttest(record_criterion):
    res = one_sample_ttest(ref.ratings(), ref.POPULATION_MEAN)
    ok = 13.0 <= res.t_statistic <= 14.0 and res.p_value < 1e-8
    ok = ok and abs(res.t_statistic - ref.EXPECTED_T) < 1e-4
    record_criterion(1, "concreteness t-test", ok,
                     f"t={res.t_statistic:.4f} (hand {ref.EXPECTED_T}) p={res.p_value:.3g}")
    assert ok


def test_criterion_2_smoother_exactness(record_criterion):
    rng = np.random.default_rng(2)
    x = np.arange(20, dtype=float)
    worst = 0.0
    months = [month_from_index(month_index("2012-01") + i) for i in range(20)]
    for _ in range(100):
        coef = rng.uniform(-1, 1, 4) / np.array([1, 5, 50, 500])
        y = coef[0] + coef[1] * x + coef[2] * x ** 2 + coef[3] * x ** 3
        out = savgol_smooth(ShapeProfile("c", months, y)).values
        worst = max(worst, float(np.max(np.abs(out - y))))
    ok = worst < 1e-9
    record_criterion(2, "smoother exactness", ok, f"max abs error {worst:.2e} over 100 cubics")
    assert ok


def test_criterion_3_dtw_oracle(record_criterion):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(500):
        a = rng.standard_normal(int(rng.integers(1, 7))).tolist()
        b = rng.standard_normal(int(rng.integers(1, 7))).tolist()
        worst = max(worst, abs(dtw_distance(a, b) - brute_dtw(a, b)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 10
    record_criterion(3, "DTW oracle equivalence", ok, f"max diff {worst:.1e}, {elapsed:.2f}s for 500 pairs")
    assert ok


def test_criterion_4_knn_oracle(record_criterion):
    rng = np.random.default_rng(4)
    mismatches = checked = 0
    for i in range(50):
        vocab = int(rng.integers(30, 1001))
        dim = int(rng.integers(2, 65))
        # integer vectors on half the snapshots force exact similarity ties
        snap = random_snapshot(rng, "2012-01", vocab, dim, integer=bool(i % 2))
        # rename a slice as hashtags and emoji so the filter has work to do
        tokens = list(snap.tokens)
        for j in rng.choice(vocab, size=vocab // 5, replace=False):
            tokens[j] = f"#{tokens[j]}" if j % 2 else chr(0x1F400 + int(j))
        snap = EmbeddingSnapshot("2012-01", tokens, snap.vectors)
        table = dict(zip(snap.tokens, snap.vectors))
        k = int(rng.integers(1, 30))
        cfg = ScoringConfig(k=k, pool=int(rng.integers(k, 120)))
        for tok in rng.choice(snap.tokens, size=3, replace=False):
            got = top_k_neighbors(snap, tok, cfg).tokens
            want = [t for t, _ in brute_knn(table, tok, cfg.k, cfg.pool, cfg.filter.rejects)]
            checked += 1
            mismatches += got != want
    ok = mismatches == 0
    record_criterion(4, "k-NN oracle equivalence", ok, f"{checked - mismatches}/{checked} queries identical")
    assert ok


def _turnover_dataset(seed):
    rng = np.random.default_rng(seed)
    snaps = []
    for m in range(6):
        s = random_snapshot(rng, month_from_index(month_index("2013-01") + m), 120, 8)
        table = {t: v for t, v in zip(s.tokens, s.vectors) if rng.random() > 0.1}
        snaps.append(EmbeddingSnapshot.from_mapping(s.month, table))
    return TemporalDataset(tuple(snaps))


def test_criterion_5_anchor_law(record_criterion, small_synthetic, toy_dataset):
    datasets = [small_synthetic.dataset, toy_dataset, _turnover_dataset(0), _turnover_dataset(1)]
    cfg = ScoringConfig(k=10, pool=100)
    nonzero = tokens = 0
    worst = 0.0
    for ds in datasets:
        vocab = sorted(ds.vocabulary())
        series, _ = score_tokens(ds, vocab, cfg)
        scaled, _ = score_tokens(ds.scaled(7.3), vocab, cfg)
        for a, b in zip(series, scaled):
            tokens += 1
            nonzero += a.points[0].score != 0.0 or b.points[0].score != 0.0
            for p, q in zip(a.points, b.points):
                if p.score is None or q.score is None:
                    assert p.score is q.score
                else:
                    worst = max(worst, abs(p.score - q.score))
        # an equal but separately built anchor snapshot also scores exactly 0
        first = ds[ds.months[0]]
        copy = EmbeddingSnapshot(first.month, first.tokens, first.vectors.copy())
        for tok in first.tokens[:20]:
            nonzero += change_score(first, copy, tok, cfg).score != 0.0
    ok = nonzero == 0 and worst <= 1e-9
    record_criterion(5, "anchor law", ok,
                     f"{tokens} tokens, {nonzero} non-zero anchors, max scale diff {worst:.1e}")
    assert ok


def test_criterion_6_planted_recovery(record_criterion):
    t0 = time.perf_counter()
    specs = planted_specs({"STABLE": 10, "SUDDEN_PEAK": 10, "GRADUAL": 10, "SEASONAL": 10},
                          60, seed=7, magnitude=1.0)
    syn = generate(specs, 60, 2000, 32, seed=7)
    ds = syn.dataset
    planted = sorted(syn.labels)
    series, errors = score_tokens(ds, sorted(ds.vocabulary()), n_jobs=1)
    assert not errors
    by_token = {s.token: s for s in series}
    model = ShapeClusterer(n_clusters=4, n_jobs=1).fit([by_token[t] for t in planted])
    agreement = evaluate_recovery(syn.labels, model.report_.assignments)
    vt = volatility_table(series)
    drifting = [t for t in planted if syn.labels[t].pattern is not Pattern.STABLE]
    distractors = [t for t in vt.volatility if t not in syn.labels]
    margin = min(vt.volatility[t] for t in drifting) - max(vt.volatility[t] for t in distractors)
    elapsed = time.perf_counter() - t0
    ok = agreement >= 0.9 and margin > 0 and elapsed < 120
    record_criterion(6, "planted-pattern recovery", ok,
                     f"agreement {agreement:.3f}, sizes {model.report_.sizes}, "
                     f"volatility margin {margin:.3f} over {len(distractors)} distractors, {elapsed:.1f}s")
    assert ok


def test_criterion_7_pipeline_shape(record_criterion):
    rng = np.random.default_rng(7)
    bad_range = bad_norm = checked = i = 0
    while checked < 1000:
        i += 1
        n = int(rng.integers(1, 40))
        start = month_index("2012-01") + int(rng.integers(0, 24))
        points = []
        for j in range(n):
            if rng.random() < 0.25:
                continue
            score = None if rng.random() < 0.1 else float(rng.random() * rng.choice([1e-3, 1, 10]))
            points.append(ScorePoint(month_from_index(start + j), score, 25))
        observed = [p for p in points if p.score is not None]
        if not observed:
            continue
        if i % 10 == 0:
            # constant stretches exercise the degenerate branch
            points = [ScorePoint(p.month, 0.2, 25) for p in observed]
            observed = points
        s = ChangeSeries("x", points[0].month, points)
        prof = interpolate(s)
        bad_range += prof.months[0] != observed[0].month or prof.months[-1] != observed[-1].month
        z = znorm(savgol_smooth(prof))
        checked += 1
        if not z.degenerate:
            bad_norm += abs(z.values.mean()) >= 1e-9 or abs(z.values.std() - 1) >= 1e-9
        else:
            bad_norm += bool(np.any(z.values != 0))
    ok = bad_range == 0 and bad_norm == 0
    record_criterion(7, "pipeline shape properties", ok,
                     f"{checked} series, {bad_range} range violations, {bad_norm} normalisation violations")
    assert ok


def _tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_8_determinism(record_criterion, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "families": {"STABLE": 4, "SUDDEN_PEAK": 4, "GRADUAL": 4, "SEASONAL": 4},
        "months": 24, "vocab_size": 500, "dim": 16, "seed": 8,
    }))
    trees = []
    for run in ("a", "b"):
        base = tmp_path / run
        assert main(["synth", "--spec", str(spec), "--out", str(base / "data")]) == 0
        assert main(["score", "--dataset", str(base / "data"), "--out", str(base / "score"),
                     "--jobs", "4"]) == 0
        assert main(["cluster", "--series", str(base / "score"), "--clusters", "4", "--jobs", "4",
                     "--labels", str(base / "data" / "labels.json"), "--out", str(base / "cluster")]) == 0
        trees.append({d: _tree(base / d) for d in ("score", "cluster")})
    a, b = trees
    n_files = sum(len(t) for t in a.values())
    differ = [f"{d}/{name}" for d in a for name in a[d] if a[d][name] != b[d].get(name)]
    ok = not differ and a.keys() == b.keys() and all(a[d].keys() == b[d].keys() for d in a)
    record_criterion(8, "determinism", ok, f"{n_files} files compared, {len(differ)} differ")
    assert ok


def test_criterion_9_cohort_arithmetic(record_criterion):
    rng = np.random.default_rng(9)
    vals = rng.permutation(np.linspace(0.01, 1.0, 100))
    table = VolatilityTable({f"t{i:03d}": float(v) for i, v in enumerate(vals)}, {})
    counts = Counter(percentile_cohorts(table, [50, 75, 90, 95, 99]).values())
    sizes = [counts[c] for c in ("p50", "p75", "p90", "p95", "p99")]
    top10, top5 = top_fraction(table, 0.10), top_fraction(table, 0.05)
    ok = sizes == [25, 15, 5, 4, 1] and len(top10) == 10 and set(top5) <= set(top10)
    record_criterion(9, "cohort arithmetic", ok,
                     f"sizes {sizes}, top 10% = {len(top10)} tokens, top 5% subset: {set(top5) <= set(top10)}")
    assert ok
