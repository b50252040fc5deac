"""Shared fixtures, hypothesis strategies and the acceptance summary printer."""

import numpy as np
import pytest
from hypothesis import strategies as st

from convflow import AbelianGroup, ProbabilityMeasure

# groups of order <= 12 used by the randomized checks
SMALL_GROUPS = [
    (1,), (2,), (3,), (4,), (2, 2), (5,), (6,), (2, 3), (7,), (8,), (2, 4),
    (2, 2, 2), (9,), (3, 3), (10,), (11,), (12,), (2, 6), (3, 4),
]

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def random_probability(rng, G, min_weight=0.0, support=None):
    """Dirichlet sample on ``support`` (all of G by default), optionally floored."""
    idx = list(G.elements) if support is None else list(support)
    w = np.zeros(G.order)
    p = rng.dirichlet(np.ones(len(idx)))
    if min_weight:
        p = min_weight + (1.0 - min_weight * len(idx)) * p
    w[idx] = p
    return ProbabilityMeasure(G, w)


def random_sparse_probability(rng, G):
    """Random support size, random Dirichlet weights."""
    k = int(rng.integers(1, G.order + 1))
    supp = rng.choice(G.order, size=k, replace=False)
    return random_probability(rng, G, support=supp)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@st.composite
def groups(draw, choices=SMALL_GROUPS):
    return AbelianGroup(draw(st.sampled_from(choices)))


@st.composite
def probabilities(draw, G=None, sparse=True):
    if G is None:
        G = draw(groups())
    raw = draw(st.lists(st.floats(0.0, 1.0), min_size=G.order, max_size=G.order))
    w = np.array(raw)
    if not sparse or w.sum() < 1e-3:
        w = w + 0.05
    return ProbabilityMeasure(G, w / w.sum())


@st.composite
def probability_pairs(draw):
    G = draw(groups())
    return draw(probabilities(G)), draw(probabilities(G))


times = st.floats(0.0, 0.99, allow_nan=False)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
