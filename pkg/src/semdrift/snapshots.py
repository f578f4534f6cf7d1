"""Timestamped embedding snapshots: parsing, validation and the temporal dataset.

Snapshot files use the plain-text vector format: a header line ``V D``
followed by ``V`` rows of ``token x1 ... xD``. A dataset is a directory of
such files named ``YYYY-MM.vec``; calendar gaps between files are allowed.
"""

import io
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_month, check_vector, month_from_index, month_index

__all__ = [
    "SnapshotFormatError",
    "EmbeddingSnapshot",
    "TemporalDataset",
    "TokenFilter",
    "is_emoji",
    "cosine",
    "parse_snapshot",
    "read_snapshot",
    "serialize_snapshot",
    "load_dataset",
    "save_dataset",
]

_FIELD_SEP = re.compile(r"[ \t]+")
_FILE_RE = re.compile(r"^(\d{4}-\d{2})\.vec$")


class SnapshotFormatError(ValueError):
    """Raised when a snapshot file or dataset directory is malformed."""


@dataclass(frozen=True, eq=False)
class EmbeddingSnapshot:
    """One month's vocabulary -> vector table.

    Vectors are held as a read-only float64 matrix whose row order follows
    ``tokens``. Row norms are cached because every cosine needs them.
    """

    month: str
    tokens: tuple
    vectors: np.ndarray
    _index: dict = field(init=False, repr=False)
    _norms: np.ndarray = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False)

    def __post_init__(self):
        check_month(self.month)
        vectors = np.array(self.vectors, dtype=np.float64, copy=True)
        tokens = tuple(self.tokens)
        if vectors.ndim != 2 or vectors.shape[0] != len(tokens):
            raise SnapshotFormatError(
                f"{self.month}: expected a ({len(tokens)}, dim) matrix, got shape {vectors.shape}"
            )
        if vectors.shape[1] < 1:
            raise SnapshotFormatError(f"{self.month}: dimension must be positive")
        if not np.all(np.isfinite(vectors)):
            raise SnapshotFormatError(f"{self.month}: non-finite vector component")
        index = {}
        for i, tok in enumerate(tokens):
            if not isinstance(tok, str) or not tok:
                raise SnapshotFormatError(f"{self.month}: invalid token {tok!r}")
            if tok in index:
                raise SnapshotFormatError(f"{self.month}: duplicate token {tok!r}")
            index[tok] = i
        norms = np.sqrt(np.einsum("ij,ij->i", vectors, vectors))
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise SnapshotFormatError(f"{self.month}: zero vector for token {tokens[zero[0]]!r}")
        vectors.setflags(write=False)
        norms.setflags(write=False)
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_norms", norms)
        object.__setattr__(self, "_cache", {})

    @classmethod
    def from_mapping(cls, month, table):
        tokens = list(table)
        if not tokens:
            raise SnapshotFormatError(f"{month}: empty snapshot")
        return cls(month, tokens, np.array([np.asarray(table[t], dtype=np.float64) for t in tokens]))

    @property
    def dim(self):
        return self.vectors.shape[1]

    @property
    def norms(self):
        return self._norms

    @property
    def token_rank(self):
        """Position of each row's token in lexicographic order."""
        rank = self._cache.get("rank")
        if rank is None:
            rank = np.empty(len(self.tokens), dtype=np.intp)
            rank[sorted(range(len(self.tokens)), key=self.tokens.__getitem__)] = np.arange(len(self.tokens))
            rank.setflags(write=False)
            self._cache["rank"] = rank
        return rank

    def rejected_mask(self, token_filter):
        """Boolean row mask of tokens ``token_filter`` rejects; cached per filter."""
        key = ("rejected", token_filter)
        mask = self._cache.get(key)
        if mask is None:
            mask = np.fromiter((token_filter.rejects(t) for t in self.tokens), dtype=bool, count=len(self.tokens))
            mask.setflags(write=False)
            self._cache[key] = mask
        return mask

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self._index

    def index_of(self, token):
        try:
            return self._index[token]
        except KeyError:
            raise KeyError(f"token {token!r} not in snapshot {self.month}") from None

    def vector(self, token):
        return self.vectors[self.index_of(token)]

    def scaled(self, factor):
        """Copy with every vector multiplied by ``factor``."""
        return EmbeddingSnapshot(self.month, self.tokens, self.vectors * factor)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingSnapshot):
            return NotImplemented
        return (
            self.month == other.month
            and self.tokens == other.tokens
            and np.array_equal(self.vectors, other.vectors)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class TemporalDataset:
    """Snapshots sorted strictly ascending by month, sharing one dimension."""

    snapshots: tuple

    def __post_init__(self):
        snaps = tuple(sorted(self.snapshots, key=lambda s: month_index(s.month)))
        if not snaps:
            raise SnapshotFormatError("dataset contains no snapshots")
        for a, b in zip(snaps, snaps[1:]):
            if a.month == b.month:
                raise SnapshotFormatError(f"duplicate month {a.month}")
        dims = {s.dim for s in snaps}
        if len(dims) != 1:
            detail = ", ".join(f"{s.month}:{s.dim}" for s in snaps)
            raise SnapshotFormatError(f"inconsistent dimensions across snapshots ({detail})")
        object.__setattr__(self, "snapshots", snaps)
        object.__setattr__(self, "_by_month", {s.month: s for s in snaps})

    @property
    def dim(self):
        return self.snapshots[0].dim

    @property
    def months(self):
        return [s.month for s in self.snapshots]

    @property
    def gaps(self):
        """Calendar months inside the covered range that have no snapshot."""
        have = {month_index(m) for m in self.months}
        lo, hi = min(have), max(have)
        return [month_from_index(i) for i in range(lo, hi + 1) if i not in have]

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def __getitem__(self, month):
        try:
            return self._by_month[month]
        except KeyError:
            raise KeyError(f"no snapshot for month {month!r}") from None

    def token_months(self, token):
        return [s.month for s in self.snapshots if token in s]

    def vocabulary(self):
        """Sorted union of all snapshot vocabularies."""
        vocab = set()
        for s in self.snapshots:
            vocab.update(s.tokens)
        return sorted(vocab)

    def scaled(self, factor):
        return TemporalDataset(tuple(s.scaled(factor) for s in self.snapshots))

    def __eq__(self, other):
        if not isinstance(other, TemporalDataset):
            return NotImplemented
        return self.snapshots == other.snapshots

    __hash__ = None


# Pictographic blocks plus the joiners / selectors / modifiers that glue
# multi-codepoint emoji sequences together.
_EMOJI_RANGES = (
    (0x1F000, 0x1FAFF),
    (0x2600, 0x27BF),
    (0x2300, 0x23FF),
    (0x2B00, 0x2BFF),
    (0x2190, 0x21FF),
    (0x25A0, 0x25FF),
    (0x2934, 0x2935),
    (0x3030, 0x3030),
    (0x303D, 0x303D),
    (0x3297, 0x3299),
    (0x00A9, 0x00A9),
    (0x00AE, 0x00AE),
    (0x203C, 0x203C),
    (0x2049, 0x2049),
    (0x2122, 0x2122),
    (0x2139, 0x2139),
    (0x24C2, 0x24C2),
)
_EMOJI_GLUE = {0x200D, 0xFE0E, 0xFE0F, 0x20E3}
_TAG_RANGE = (0xE0020, 0xE007F)


def _is_pictographic(cp):
    return any(lo <= cp <= hi for lo, hi in _EMOJI_RANGES)


def is_emoji(token):
    """True when ``token`` consists only of emoji codepoints and sequence glue."""
    seen = False
    for ch in token:
        cp = ord(ch)
        if _is_pictographic(cp):
            seen = True
        elif cp in _EMOJI_GLUE or _TAG_RANGE[0] <= cp <= _TAG_RANGE[1]:
            continue
        else:
            return False
    return seen


@dataclass(frozen=True)
class TokenFilter:
    """Predicate deciding which tokens may serve as neighbours.

    Hashtags are tokens starting with ``#``; the target class is emoji,
    detected from Unicode codepoint ranges.
    """

    exclude_hashtags: bool = True
    exclude_targets: bool = True
    custom_exclusions: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "custom_exclusions", frozenset(self.custom_exclusions or ()))

    def rejects(self, token):
        if self.exclude_hashtags and token.startswith("#"):
            return True
        if token in self.custom_exclusions:
            return True
        return self.exclude_targets and is_emoji(token)

    def __call__(self, token):
        """True when the token is kept."""
        return not self.rejects(token)


def cosine(u, v):
    u = check_vector(u, "u")
    v = check_vector(v, "v")
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine undefined for a zero-norm vector")
    c = float(np.dot(u, v)) / (nu * nv)
    return min(1.0, max(-1.0, c))


def _split(line):
    return [f for f in _FIELD_SEP.split(line.strip("\r\n \t")) if f]


def parse_snapshot(text_stream, month):
    """Parse a ``V D`` header + rows stream into an :class:`EmbeddingSnapshot`.

    ``text_stream`` may be a file object or a string.
    """
    check_month(month)
    if isinstance(text_stream, str):
        text_stream = io.StringIO(text_stream)
    lines = (ln for ln in text_stream if ln.strip())
    try:
        header = _split(next(lines))
    except StopIteration:
        raise SnapshotFormatError(f"{month}: empty snapshot stream") from None
    if len(header) != 2:
        raise SnapshotFormatError(f"{month}: header must be 'V D', got {' '.join(header)!r}")
    try:
        n_rows, dim = int(header[0]), int(header[1])
    except ValueError:
        raise SnapshotFormatError(f"{month}: non-integer header {' '.join(header)!r}") from None
    if n_rows < 1 or dim < 1:
        raise SnapshotFormatError(f"{month}: header counts must be positive")

    tokens = []
    rows = np.empty((n_rows, dim), dtype=np.float64)
    for lineno, line in enumerate(lines, start=2):
        fields = _split(line)
        if len(tokens) == n_rows:
            raise SnapshotFormatError(f"{month}: more than {n_rows} rows declared in header")
        if len(fields) != dim + 1:
            raise SnapshotFormatError(
                f"{month}: line {lineno} has {len(fields)} fields, expected {dim + 1}"
            )
        try:
            rows[len(tokens)] = [float(x) for x in fields[1:]]
        except ValueError:
            raise SnapshotFormatError(f"{month}: line {lineno} has a non-numeric component") from None
        tokens.append(fields[0])
    if len(tokens) != n_rows:
        raise SnapshotFormatError(f"{month}: header declares {n_rows} rows, found {len(tokens)}")
    return EmbeddingSnapshot(month, tokens, rows)


def read_snapshot(path, month=None):
    path = Path(path)
    if month is None:
        m = _FILE_RE.match(path.name)
        if m is None:
            raise SnapshotFormatError(f"cannot infer month from file name {path.name!r}")
        month = m.group(1)
    with open(path, encoding="utf-8") as fh:
        return parse_snapshot(fh, month)


def _fmt(x, precision):
    if precision is None:
        return repr(float(x))
    s = format(float(x), f".{precision}g")
    return "0" if s == "-0" else s


def serialize_snapshot(snapshot, stream=None, precision=None):
    """Write ``snapshot`` in the header + rows format.

    With ``precision=None`` floats are rendered with the shortest repr that
    round-trips exactly; otherwise with ``precision`` significant digits.
    Returns the text when ``stream`` is None.
    """
    out = io.StringIO() if stream is None else stream
    out.write(f"{len(snapshot)} {snapshot.dim}\n")
    for tok, row in zip(snapshot.tokens, snapshot.vectors):
        out.write(tok)
        for x in row:
            out.write(" ")
            out.write(_fmt(x, precision))
        out.write("\n")
    if stream is None:
        return out.getvalue()
    return None


def load_dataset(source):
    """Load a :class:`TemporalDataset` from a directory of ``YYYY-MM.vec`` files.

    ``source`` may also be an iterable of file paths. Files are ordered by
    month, never by listing order.
    """
    if isinstance(source, (str, os.PathLike)):
        directory = Path(source)
        if not directory.is_dir():
            raise SnapshotFormatError(f"dataset directory {directory} does not exist")
        paths = [p for p in directory.iterdir() if _FILE_RE.match(p.name)]
    else:
        paths = [Path(p) for p in source]
    if not paths:
        raise SnapshotFormatError(f"no YYYY-MM.vec snapshot files found in {source}")
    months = {}
    for p in paths:
        m = _FILE_RE.match(p.name)
        if m is None:
            raise SnapshotFormatError(f"snapshot file name {p.name!r} is not YYYY-MM.vec")
        if m.group(1) in months:
            raise SnapshotFormatError(f"duplicate month {m.group(1)}")
        months[m.group(1)] = p
    snaps = [read_snapshot(months[m], m) for m in sorted(months, key=month_index)]
    return TemporalDataset(tuple(snaps))


def save_dataset(dataset, directory, precision=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for snap in dataset:
        path = directory / f"{snap.month}.vec"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            serialize_snapshot(snap, fh, precision)
        written.append(path)
    return written
