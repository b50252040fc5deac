import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convflow import (
    AlgebraError,
    DomainError,
    InvalidMeasureError,
    Polynomial,
    PowerSeries,
    ProbabilityMeasure,
    SignedMeasure,
    conv_matrix,
    convolve,
    dirac,
    evaluate_series,
    exponential_series,
    geometric_series,
    make_group,
    neumann_inverse,
    q_map,
    rational_map,
    tv_distance,
    uniform,
)
from convflow.measures import IDENTITY_POLYNOMIAL, power, series_terms, signed_from_json

from conftest import groups, probabilities, probability_pairs, times

Z2, Z4, KLEIN = make_group([2]), make_group([4]), make_group([2, 2])


def brute_convolve(mu, nu):
    """Definition-level convolution through residue arithmetic only."""
    G = mu.group
    out = np.zeros(G.order)
    for g in G.elements:
        for h in G.elements:
            r = tuple((a - b) % n for a, b, n in zip(G.residues(g), G.residues(h), G.cyclic_orders))
            out[g] += mu.weights[G.index(r)] * nu.weights[h]
    return out


# -- construction ------------------------------------------------------------

def test_probability_validation():
    with pytest.raises(InvalidMeasureError):
        ProbabilityMeasure(Z2, [0.6, 0.6])
    with pytest.raises(InvalidMeasureError):
        ProbabilityMeasure(Z2, [1.1, -0.1])
    with pytest.raises(InvalidMeasureError):
        ProbabilityMeasure(Z2, [1.0])
    with pytest.raises(InvalidMeasureError):
        SignedMeasure(Z2, [np.nan, 0.0])
    mu = ProbabilityMeasure(Z2, [0.5 + 1e-13, 0.5])
    assert mu.weights.sum() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(AttributeError):
        mu.weights = np.zeros(2)
    with pytest.raises(ValueError):
        mu.weights[0] = 0.3


def test_dirac_examples():
    assert dirac(Z4, 0).weights.tolist() == [1, 0, 0, 0]
    ab = KLEIN.index((1, 1))
    d = dirac(KLEIN, ab)
    assert d.weights[ab] == 1.0 and d.mass == 1.0
    assert d.to_json() == {"group": {"cyclic": [2, 2]}, "weights": [0.0, 0.0, 0.0, 1.0]}


def test_json_round_trip_bit_exact(rng):
    mu = ProbabilityMeasure(Z4, rng.dirichlet(np.ones(4)))
    back = ProbabilityMeasure.from_json(mu.to_json())
    assert back.weights.tobytes() == mu.weights.tobytes()
    s = mu - uniform(Z4)
    assert signed_from_json(s.to_json()).weights.tobytes() == s.weights.tobytes()


# -- convolution ---------------------------------------------------------------

def test_convolution_examples():
    a, b, ab = 1, 2, 3
    assert convolve(dirac(KLEIN, a), dirac(KLEIN, b)).weights.tolist() == dirac(KLEIN, ab).weights.tolist()
    mu = ProbabilityMeasure(Z4, [0, 0.5, 0, 0.5])
    # oracle: the four pairs 1+1=2, 1+3=0, 3+1=0, 3+3=2 each carry 1/4
    expected = np.zeros(4)
    for i in (1, 3):
        for j in (1, 3):
            expected[(i + j) % 4] += 0.25
    assert np.allclose(convolve(mu, mu).weights, expected, atol=1e-15)
    assert expected.tolist() == [0.5, 0, 0.5, 0]
    with pytest.raises(AlgebraError):
        convolve(dirac(Z4, 0), dirac(KLEIN, 0))


@settings(max_examples=60, deadline=None)
@given(probability_pairs())
def test_convolution_matches_definition(pair):
    mu, nu = pair
    assert np.allclose(convolve(mu, nu).weights, brute_convolve(mu, nu), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_algebra_laws(data):
    G = data.draw(groups())
    mu, nu, rho = (data.draw(probabilities(G)) for _ in range(3))
    e = dirac(G, 0)
    assert tv_distance(convolve(mu, nu), convolve(nu, mu)) <= 1e-10
    assert tv_distance(convolve(convolve(mu, nu), rho), convolve(mu, convolve(nu, rho))) <= 1e-10
    assert tv_distance(convolve(e, mu), mu) <= 1e-10
    assert tv_distance(convolve(uniform(G), mu), uniform(G)) <= 1e-10
    # bilinearity with signed combinations
    s = 0.3 * mu - 1.7 * nu
    assert tv_distance(convolve(s, rho), 0.3 * convolve(mu, rho) - 1.7 * convolve(nu, rho)) <= 1e-10
    assert isinstance(convolve(mu, nu), ProbabilityMeasure)


@st.composite
def supported_probability(draw, G):
    """Random support with weights bounded away from the support threshold."""
    mask = draw(st.lists(st.booleans(), min_size=G.order, max_size=G.order).filter(any))
    raw = draw(st.lists(st.floats(1e-3, 1.0), min_size=G.order, max_size=G.order))
    w = np.where(mask, raw, 0.0)
    return ProbabilityMeasure(G, w / w.sum())


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_support_law(data):
    G = data.draw(groups())
    mu, nu = data.draw(supported_probability(G)), data.draw(supported_probability(G))
    expected = {G.mul(g, h) for g in mu.support() for h in nu.support()}
    assert set(convolve(mu, nu).support()) == expected


def test_power(rng):
    mu = ProbabilityMeasure(Z4, rng.dirichlet(np.ones(4)))
    p = dirac(Z4, 0)
    for n in range(7):
        assert tv_distance(power(mu, n), p) <= 1e-14
        p = convolve(p, mu)


# -- total variation -------------------------------------------------------------

def test_tv_examples():
    assert tv_distance(dirac(Z2, 0), dirac(Z2, 0)) == 0.0
    assert tv_distance(dirac(Z2, 0), dirac(Z2, 1)) == 2.0
    assert tv_distance(ProbabilityMeasure(Z2, [0.75, 0.25]), uniform(Z2)) == 0.5


# -- convolution matrices ---------------------------------------------------------

def test_conv_matrix_examples():
    s = 0.3
    M = conv_matrix(ProbabilityMeasure(Z2, [1 - s, s]))
    assert np.allclose(M, [[1 - s, s], [s, 1 - s]])
    assert np.array_equal(conv_matrix(dirac(KLEIN, 0)), np.eye(4))
    shift = conv_matrix(dirac(Z4, 1))
    for j in range(4):
        e_j = dirac(Z4, j)
        assert np.array_equal(shift @ e_j.weights, convolve(dirac(Z4, 1), e_j).weights)
    assert np.array_equal(shift, np.roll(np.eye(4), 1, axis=0))


@settings(max_examples=60, deadline=None)
@given(probability_pairs())
def test_conv_matrix_is_linear_and_faithful(pair):
    mu, nu = pair
    assert np.allclose(conv_matrix(mu) @ nu.weights, convolve(mu, nu).weights, atol=1e-14)
    s = 2.0 * mu - nu
    assert np.allclose(conv_matrix(s), 2.0 * conv_matrix(mu) - conv_matrix(nu), atol=1e-14)


# -- Neumann inverse ----------------------------------------------------------------

def test_neumann_examples():
    t = 0.4
    inv = neumann_inverse(dirac(KLEIN, 0), t)
    assert np.allclose(inv.weights, dirac(KLEIN, 0).weights / (1 - t), atol=1e-14)
    assert np.allclose(neumann_inverse(uniform(Z4), 0.0).weights, dirac(Z4, 0).weights)
    # even/odd split of sum t^k delta_1^k at t=1/2
    for method in ("solve", "series", "both"):
        inv = neumann_inverse(dirac(Z2, 1), 0.5, method=method)
        assert np.allclose(inv.weights, [4 / 3, 2 / 3], atol=1e-10)
    with pytest.raises(DomainError):
        neumann_inverse(dirac(Z2, 1), 1.0)
    with pytest.raises(ValueError):
        neumann_inverse(dirac(Z2, 1), 0.5, method="lu")


@settings(max_examples=60, deadline=None)
@given(probabilities(), st.floats(0.0, 0.95))
def test_neumann_is_inverse(mu, t):
    G = mu.group
    inv = neumann_inverse(mu, t, method="both")
    lhs = dirac(G, 0) - t * mu
    assert tv_distance(convolve(lhs, inv), dirac(G, 0)) <= 1e-10
    assert inv.mass == pytest.approx(1 / (1 - t), rel=1e-12)


def test_neumann_signed_input(rng):
    s = SignedMeasure(Z4, rng.uniform(-0.2, 0.2, 4))
    inv = neumann_inverse(s, 0.7, method="both")
    assert tv_distance(convolve(dirac(Z4, 0) - 0.7 * s, inv), dirac(Z4, 0)) <= 1e-12


def test_series_terms_minimal():
    for t in (0.1, 0.5, 0.9, 0.99):
        K = series_terms(t, 1e-10)
        assert t ** (K + 1) / (1 - t) < 1e-10
        assert K == 0 or t ** K / (1 - t) >= 1e-10
    assert series_terms(0.0) == 0


# -- power series --------------------------------------------------------------------

def test_exponential_series():
    e = exponential_series()
    assert np.allclose(evaluate_series(e, dirac(Z4, 0)).weights, dirac(Z4, 0).weights, atol=1e-12)
    # delta_1 on Z2 squares to delta_0: even and odd parts of exp give cosh, sinh
    out = evaluate_series(e, dirac(Z2, 1))
    assert isinstance(out, ProbabilityMeasure)
    assert np.allclose(out.weights, [math.cosh(1) / math.e, math.sinh(1) / math.e], atol=1e-12)


def test_geometric_series_matches_flow(rng):
    mu = ProbabilityMeasure(KLEIN, rng.dirichlet(np.ones(4)))
    t = 0.6
    # sum (1-t) t^n mu^n is (1-t)(delta_e - t mu)^-1
    F = evaluate_series(geometric_series(t), mu)
    assert tv_distance(F, (1 - t) * neumann_inverse(mu, t)) <= 1e-9


def test_series_divergence():
    with pytest.raises(DomainError):
        PowerSeries("geometric", scale=1.0, ratio=1.0).truncation_order()
    with pytest.raises(DomainError):
        PowerSeries("bessel")
    finite = PowerSeries("finite", prefix=(0.5, 0.0, 0.5))
    assert finite.truncation_order() == 2
    out = evaluate_series(finite, dirac(Z4, 1))
    assert np.allclose(out.weights, [0.5, 0, 0.5, 0])


# -- polynomials and rational maps ------------------------------------------------------

def test_polynomial_validation():
    with pytest.raises(DomainError):
        Polynomial((0.5, 0.6))
    with pytest.raises(DomainError):
        Polynomial((1.5, -0.5))
    with pytest.raises(DomainError):
        Polynomial(())


def test_rational_map_examples(rng):
    mu = ProbabilityMeasure(Z4, rng.dirichlet(np.ones(4)))
    for t in (0.0, 0.3, 0.9):
        assert tv_distance(rational_map(IDENTITY_POLYNOMIAL, IDENTITY_POLYNOMIAL, t, mu), q_map(t, mu)) <= 1e-10
    one = Polynomial((1.0,))
    S2 = Polynomial((0.5, 0.0, 0.5))
    assert np.allclose(rational_map(one, S2, 0.5, dirac(Z4, 0)).weights, dirac(Z4, 0).weights, atol=1e-14)
    # delta_1^2 = delta_0 on Z2 so S2(delta_1) = delta_0 and the fraction collapses
    assert np.allclose(rational_map(one, S2, 0.5, dirac(Z2, 1)).weights, [1.0, 0.0], atol=1e-14)
    with pytest.raises(DomainError):
        rational_map((1.0,), S2, 0.5, mu)


@settings(max_examples=40, deadline=None)
@given(probabilities(), times, st.lists(st.floats(0, 1), min_size=1, max_size=4),
       st.lists(st.floats(0, 1), min_size=1, max_size=4))
def test_rational_map_is_probability(mu, t, a, b):
    a = np.array(a) + 1e-3
    b = np.array(b) + 1e-3
    S1, S2 = Polynomial(tuple(a / a.sum())), Polynomial(tuple(b / b.sum()))
    out = rational_map(S1, S2, t, mu)
    assert out.weights.min() >= 0 and abs(out.mass - 1) <= 1e-12
