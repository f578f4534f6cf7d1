import numpy as np
import pytest

from semdrift.snapshots import EmbeddingSnapshot, TemporalDataset
from semdrift.synthetic import generate, planted_specs

ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(ACCEPTANCE):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {name} -- {detail}")


@pytest.fixture
def record_criterion():
    def record(number, name, ok, detail=""):
        ACCEPTANCE.append((number, name, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} -- {detail}")
        return ok

    return record


def random_snapshot(rng, month, vocab, dim, integer=False, prefix="t"):
    if integer:
        vecs = rng.integers(-2, 3, size=(vocab, dim)).astype(float)
        zero = ~vecs.any(axis=1)
        vecs[zero, 0] = 1.0
    else:
        vecs = rng.standard_normal((vocab, dim))
    tokens = [f"{prefix}{i:04d}" for i in range(vocab)]
    return EmbeddingSnapshot(month, tokens, vecs)


@pytest.fixture
def toy_dataset():
    """Four months; token 'q' is missing in 2012-03."""
    rng = np.random.default_rng(0)
    snaps = []
    for m in ("2012-01", "2012-02", "2012-03", "2012-04"):
        base = random_snapshot(rng, m, 60, 8)
        table = dict(zip(base.tokens, base.vectors))
        if m != "2012-03":
            table["q"] = rng.standard_normal(8)
        snaps.append(EmbeddingSnapshot.from_mapping(m, table))
    return TemporalDataset(tuple(snaps))


@pytest.fixture(scope="session")
def small_synthetic():
    specs = planted_specs({"STABLE": 3, "SUDDEN_PEAK": 3, "GRADUAL": 3, "SEASONAL": 3}, 36, seed=11)
    return generate(specs, 36, 600, 16, seed=11)
