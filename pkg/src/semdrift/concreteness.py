"""Concreteness of high-change tokens versus a rating population.

Tokens map to sense lemmas, lemmas to 1-5 concreteness ratings. The most
volatile tokens are scored and compared to the lexicon mean with a
two-sided one-sample t-test.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .cohorts import top_fraction

__all__ = [
    "ConcretenessLexicon",
    "TTestResult",
    "ConcretenessReport",
    "ConcretenessError",
    "betainc_regularized",
    "t_sf_two_sided",
    "one_sample_ttest",
    "token_concreteness",
    "concreteness_report",
    "read_sense_map",
    "read_lexicon",
]

_EPS = 1e-16
_TINY = 1e-300
_MAXIT = 10_000


class ConcretenessError(ValueError):
    def __init__(self, message, unmatched=()):
        self.unmatched = list(unmatched)
        super().__init__(message)


def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _betainc(a, b, x, y):
    # y = 1 - x, passed separately so callers can supply it without cancellation
    if x == 0.0 or y == 0.0:
        return 0.0 if x == 0.0 else 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(y)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


def betainc_regularized(a, b, x):
    """Regularized incomplete beta function I_x(a, b) for a, b > 0."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    return _betainc(a, b, x, 1.0 - x)


def t_sf_two_sided(t, df):
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    t2 = t * t
    p = _betainc(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2))
    return min(1.0, max(0.0, p))


@dataclass(frozen=True)
class TTestResult:
    sample_mean: float
    sample_std: float
    n: int
    t_statistic: float
    p_value: float
    mu: float


def one_sample_ttest(sample, mu):
    """Two-sided one-sample t-test of ``mean(sample) == mu``.

    Uses the ddof=1 sample standard deviation. A zero-variance sample equal
    to ``mu`` gives ``t = 0, p = 1``; a zero-variance sample elsewhere is an
    error because ``t`` is undefined.
    """
    x = np.asarray(list(sample), dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError(f"t-test needs at least 2 observations, got {n}")
    mean = float(x.mean())
    if np.all(x == x[0]):
        mean, s = float(x[0]), 0.0
    else:
        s = float(x.std(ddof=1))
    if s == 0.0:
        if mean == mu:
            return TTestResult(mean, 0.0, n, 0.0, 1.0, float(mu))
        raise ValueError("zero sample variance with mean != mu; t is undefined")
    t = (mean - mu) / (s / math.sqrt(n))
    return TTestResult(mean, s, n, t, t_sf_two_sided(t, n - 1), float(mu))


@dataclass(frozen=True)
class ConcretenessLexicon:
    ratings: dict

    def __post_init__(self):
        if not self.ratings:
            raise ValueError("empty concreteness lexicon")
        bad = {k: v for k, v in self.ratings.items() if not 1.0 <= v <= 5.0}
        if bad:
            raise ValueError(f"ratings outside [1, 5]: {dict(list(bad.items())[:5])}")

    @property
    def population_mean(self):
        return float(np.mean(list(self.ratings.values())))

    @property
    def population_std(self):
        return float(np.std(list(self.ratings.values())))

    def get(self, lemma):
        return self.ratings.get(lemma.lower())


def token_concreteness(token, sense_map, lexicon):
    """Unweighted mean rating of the token's lemmas found in the lexicon, else None."""
    found = [r for r in (lexicon.get(l) for l in sense_map.get(token, ())) if r is not None]
    if not found:
        return None
    return float(np.mean(found))


@dataclass
class ConcretenessReport:
    ttest: TTestResult
    selected: list
    matched: list  # [(token, concreteness)]
    unmatched: list = field(default_factory=list)

    def to_dict(self):
        t = self.ttest
        return {
            "t": t.t_statistic,
            "p": t.p_value,
            "n": t.n,
            "sample_mean": t.sample_mean,
            "sample_std": t.sample_std,
            "mu": t.mu,
            "selected": list(self.selected),
            "matched": [{"token": tok, "concreteness": c} for tok, c in self.matched],
            "unmatched": list(self.unmatched),
        }


def concreteness_report(volatility_table, sense_map, lexicon, fraction=0.10, mu=None):
    """Test whether the most volatile tokens differ in mean concreteness.

    ``mu`` defaults to the lexicon population mean.
    """
    selected = top_fraction(volatility_table, fraction)
    matched, unmatched = [], []
    for tok in selected:
        c = token_concreteness(tok, sense_map, lexicon)
        if c is None:
            unmatched.append(tok)
        else:
            matched.append((tok, c))
    if len(matched) < 2:
        raise ConcretenessError(
            f"only {len(matched)} of {len(selected)} selected tokens have concreteness ratings",
            unmatched,
        )
    mu = lexicon.population_mean if mu is None else float(mu)
    result = one_sample_ttest([c for _, c in matched], mu)
    return ConcretenessReport(result, selected, matched, unmatched)


def _tsv_rows(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if line.strip():
                yield lineno, line.split("\t")


def read_sense_map(path):
    """``token<TAB>lemma1,lemma2,...`` -> {token: [lemma, ...]} (lowercased, deduplicated)."""
    out = {}
    for lineno, fields in _tsv_rows(path):
        if len(fields) > 2:
            raise ValueError(f"{path}:{lineno}: expected 'token<TAB>lemmas'")
        lemmas = fields[1].split(",") if len(fields) == 2 else []
        seen = out.setdefault(fields[0], [])
        for lem in lemmas:
            lem = lem.strip().lower()
            if lem and lem not in seen:
                seen.append(lem)
    return out


def read_lexicon(path):
    """``lemma<TAB>rating`` rows; a non-numeric first row is taken as a header."""
    ratings = {}
    for lineno, fields in _tsv_rows(path):
        if len(fields) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'lemma<TAB>rating'")
        try:
            r = float(fields[1])
        except ValueError:
            if not ratings and lineno == 1:
                continue
            raise ValueError(f"{path}:{lineno}: non-numeric rating {fields[1]!r}") from None
        lemma = fields[0].strip().lower()
        if lemma in ratings:
            raise ValueError(f"{path}:{lineno}: duplicate lemma {lemma!r}")
        ratings[lemma] = r
    return ConcretenessLexicon(ratings)
