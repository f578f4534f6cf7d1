"""Synthetic temporal embedding datasets with planted drift.

Distractor vectors are seeded random unit vectors grouped into tight
clusters of ``k`` members; they never move between months. Each planted
token gets two distinct clusters A and B and, every month, sits at the
normalised blend ``(1 - w) * A + w * B`` of the two cluster means, where the
weight ``w(t)`` follows the token's drift pattern.
"""

import enum
import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._validation import check_int, check_month, month_from_index, month_index, month_range
from .io import dump_json, sha256_file, sha256_json
from .snapshots import EmbeddingSnapshot, TemporalDataset, save_dataset

__all__ = [
    "Pattern",
    "DriftSpec",
    "SyntheticDataset",
    "GENERATOR_ID",
    "drift_weights",
    "generate",
    "planted_specs",
    "evaluate_recovery",
    "save_synthetic",
    "load_labels",
    "specs_from_json",
]

GENERATOR_ID = "numpy.random.Generator(PCG64)"
SPIKE_MONTHS = 3
DEFAULT_START = "2012-01"


class Pattern(str, enum.Enum):
    STABLE = "STABLE"
    SUDDEN_PEAK = "SUDDEN_PEAK"
    GRADUAL = "GRADUAL"
    SEASONAL = "SEASONAL"


@dataclass(frozen=True)
class DriftSpec:
    """Ground truth for one planted token.

    ``onset_month`` defaults to the first generated month. ``period`` is the
    full seasonal cycle length in months: the first half has weight 0, the
    second half ``magnitude``.
    """

    token: str
    pattern: Pattern
    onset_month: Optional[str] = None
    magnitude: float = 1.0
    period: int = 12
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "pattern", Pattern(self.pattern))
        if self.onset_month is not None:
            check_month(self.onset_month)
        if not 0.0 <= float(self.magnitude) <= 1.0:
            raise ValueError(f"magnitude must lie in [0, 1], got {self.magnitude}")
        check_int(self.period, "period", min_value=2)

    def to_dict(self):
        d = asdict(self)
        d["pattern"] = self.pattern.value
        return d


def drift_weights(spec, months):
    """Blend weight toward prototype B for each month in ``months``."""
    idx = np.array([month_index(m) for m in months])
    onset = month_index(spec.onset_month) if spec.onset_month else int(idx[0])
    if not idx[0] <= onset <= idx[-1]:
        raise ValueError(f"onset {spec.onset_month} outside dataset range {months[0]}..{months[-1]}")
    since = idx - onset
    mag = float(spec.magnitude)
    w = np.zeros(len(idx))
    if spec.pattern is Pattern.SUDDEN_PEAK:
        w[(since >= 0) & (since < SPIKE_MONTHS)] = mag
    elif spec.pattern is Pattern.GRADUAL:
        span = idx[-1] - onset
        if span == 0:
            w[since >= 0] = mag
        else:
            w = np.where(since >= 0, mag * since / span, 0.0)
    elif spec.pattern is Pattern.SEASONAL:
        phase = np.mod(since, spec.period)
        w = np.where((since >= 0) & (2 * phase >= spec.period), mag, 0.0)
    return w


@dataclass
class SyntheticDataset:
    dataset: TemporalDataset
    labels: dict
    vocab_size: int
    dim: int
    seed: int
    parameters: dict = field(default_factory=dict)
    prototypes: dict = field(default_factory=dict)  # token -> (A member tokens, B member tokens)


def _unit(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def generate(specs, months, vocab_size, dim, seed, k=25, cluster_noise=0.5):
    """Build a :class:`SyntheticDataset`.

    ``months`` is a list of ``YYYY-MM`` strings or a count of consecutive
    months starting at 2012-01. ``vocab_size`` counts planted tokens too; the
    remaining distractors are split into clusters of ``k`` tokens.
    """
    specs = [s if isinstance(s, DriftSpec) else DriftSpec(**s) for s in specs]
    if not specs:
        raise ValueError("no drift specs given")
    names = [s.token for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("duplicate planted token names")
    if isinstance(months, int):
        check_int(months, "months", min_value=1)
        start = month_index(DEFAULT_START)
        months = [month_from_index(start + i) for i in range(months)]
    months = [check_month(m) for m in months]
    if any(month_index(b) <= month_index(a) for a, b in zip(months, months[1:])):
        raise ValueError("months must be strictly increasing")
    check_int(dim, "dim", min_value=8)
    check_int(k, "k", min_value=1)
    vocab_size = check_int(vocab_size, "vocab_size", min_value=1)
    n_dist = vocab_size - len(specs)
    n_clusters = n_dist // k if n_dist > 0 else 0
    if n_dist < 2 * k or n_clusters < 2:
        raise ValueError(
            f"vocab_size={vocab_size} leaves {n_dist} distractors; need at least 2*k={2 * k} "
            "to allocate two disjoint prototype subsets"
        )

    rng = np.random.Generator(np.random.PCG64(seed))
    centres = _unit(rng.standard_normal((n_clusters, dim)))
    noise = rng.standard_normal((n_dist, dim)) * (cluster_noise / np.sqrt(dim))
    member_of = np.arange(n_dist) % n_clusters
    distractors = _unit(centres[member_of] + noise)
    dist_names = [f"w{i:05d}" for i in range(n_dist)]
    if set(dist_names) & set(names):
        raise ValueError("planted token names collide with distractor names")

    labels, protos, planted = {}, {}, {}
    for spec in specs:
        tok_rng = rng if spec.seed is None else np.random.Generator(np.random.PCG64(spec.seed))
        a, b = tok_rng.choice(n_clusters, size=2, replace=False)
        members_a = np.flatnonzero(member_of == a)
        members_b = np.flatnonzero(member_of == b)
        proto_a = distractors[members_a].mean(axis=0)
        proto_b = distractors[members_b].mean(axis=0)
        w = drift_weights(spec, months)[:, None]
        planted[spec.token] = _unit((1.0 - w) * proto_a + w * proto_b)
        labels[spec.token] = spec
        protos[spec.token] = (
            tuple(dist_names[i] for i in members_a),
            tuple(dist_names[i] for i in members_b),
        )

    tokens = dist_names + names
    snaps = []
    for t, month in enumerate(months):
        vecs = np.vstack([distractors] + [planted[n][t][None, :] for n in names])
        snaps.append(EmbeddingSnapshot(month, tokens, vecs))
    params = {
        "months": list(months),
        "vocab_size": vocab_size,
        "dim": dim,
        "k": k,
        "cluster_noise": cluster_noise,
        "n_distractors": n_dist,
    }
    return SyntheticDataset(TemporalDataset(tuple(snaps)), labels, vocab_size, dim, seed, params, protos)


def planted_specs(counts, months, seed, magnitude=1.0, period=12, start=DEFAULT_START):
    """Specs for ``counts = {pattern: n}`` with seeded, varied onsets.

    Tokens are named with consecutive pictographic codepoints so the default
    neighbour filter never lets one planted token into another's neighbourhood.
    """
    if isinstance(months, int):
        months = month_range(start, month_from_index(month_index(start) + months - 1))
    n = len(months)
    rng = np.random.Generator(np.random.PCG64(seed))
    codepoints = itertools.count(0x1F400)
    specs = []
    for pattern, count in counts.items():
        pattern = Pattern(pattern)
        for _ in range(count):
            if pattern is Pattern.SUDDEN_PEAK:
                onset = int(rng.integers(n // 6, n - n // 6 - SPIKE_MONTHS))
            elif pattern is Pattern.GRADUAL:
                onset = int(rng.integers(0, max(1, n // 4)))
            elif pattern is Pattern.SEASONAL:
                onset = int(rng.integers(0, min(period, n)))
            else:
                onset = 0
            specs.append(DriftSpec(chr(next(codepoints)), pattern, months[onset], magnitude, period))
    return specs


def evaluate_recovery(labels, assignments):
    """Pairwise agreement between pattern labels and cluster assignments.

    Counts the labelled token pairs that are together in both or apart in
    both, divided by the number of pairs.
    """
    tokens = sorted(labels)
    missing = [t for t in tokens if t not in assignments]
    if missing:
        raise KeyError(f"labelled tokens not clustered: {missing[:5]}")
    pattern = {t: labels[t].pattern if isinstance(labels[t], DriftSpec) else labels[t] for t in tokens}
    pairs = agree = 0
    for a, b in itertools.combinations(tokens, 2):
        pairs += 1
        agree += (pattern[a] == pattern[b]) == (assignments[a] == assignments[b])
    return 1.0 if pairs == 0 else agree / pairs


def save_synthetic(synth, directory):
    """Write snapshots, ``labels.json`` and ``manifest.json`` into ``directory``."""
    directory = Path(directory)
    files = save_dataset(synth.dataset, directory)
    dump_json(directory / "labels.json", {t: s.to_dict() for t, s in synth.labels.items()})
    manifest = {
        "generator": GENERATOR_ID,
        "seed": synth.seed,
        "parameters": synth.parameters,
        "specs_hash": sha256_json([s.to_dict() for s in synth.labels.values()]),
        "files": {p.name: sha256_file(p) for p in files},
    }
    dump_json(directory / "manifest.json", manifest)
    return directory


def load_labels(path):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return {tok: DriftSpec(**d) for tok, d in raw.items()}


def specs_from_json(path):
    """Read a generation request.

    Expected keys: ``specs`` (list of spec objects), ``months`` (count or
    list), ``vocab_size``, ``dim``, ``seed``; optional ``k`` and
    ``cluster_noise``. Instead of ``specs``, ``families`` may map pattern
    names to counts; onsets are then drawn with ``seed``.
    """
    with open(path, encoding="utf-8") as fh:
        req = json.load(fh)
    months = req.get("months", 60)
    if "families" in req:
        specs = planted_specs(req["families"], months, req.get("seed", 0),
                              req.get("magnitude", 1.0), req.get("period", 12))
    else:
        specs = [DriftSpec(**s) for s in req.get("specs", [])]
    return specs, req
