"""Signed and probability measures on a finite abelian group.

Measures are weight vectors indexed by element index. Convolution is
``(mu * nu)(g) = sum_h mu(g h^-1) nu(h)``; the total-variation norm is the sum
of absolute weights, which on a finite group equals both the supremum of
``|int f d(mu - nu)|`` over ``|f| <= 1`` and twice the largest set discrepancy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
import scipy.linalg

from .errors import AlgebraError, DomainError, InvalidMeasureError, NumericalError
from .groups import AbelianGroup, generated_subgroup

EPS_MASS = 1e-12
EPS_ALG = 1e-10
EPS_SUPP = 1e-12


class SignedMeasure:
    """Real weights on the elements of ``group``; immutable."""

    __slots__ = ("group", "weights")

    def __init__(self, group: AbelianGroup, weights):
        w = np.array(weights, dtype=float).reshape(-1)
        if w.shape != (group.order,):
            raise InvalidMeasureError(
                f"expected {group.order} weights, got {w.size}")
        if not np.all(np.isfinite(w)):
            raise InvalidMeasureError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "weights", w)

    def __setattr__(self, name, value):
        raise AttributeError("measures are immutable")

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def support(self, eps: float = EPS_SUPP) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.weights > eps))

    def _check(self, other) -> None:
        if not isinstance(other, SignedMeasure):
            raise TypeError(f"expected a measure, got {type(other).__name__}")
        if other.group != self.group:
            raise AlgebraError(
                f"measures live on different groups {self.group.cyclic_orders} "
                f"and {other.group.cyclic_orders}")

    def __add__(self, other):
        self._check(other)
        return SignedMeasure(self.group, self.weights + other.weights)

    def __sub__(self, other):
        self._check(other)
        return SignedMeasure(self.group, self.weights - other.weights)

    def __neg__(self):
        return SignedMeasure(self.group, -self.weights)

    def __mul__(self, scalar):
        if isinstance(scalar, SignedMeasure):
            return NotImplemented
        return SignedMeasure(self.group, float(scalar) * self.weights)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SignedMeasure(self.group, self.weights / float(scalar))

    def __repr__(self):
        w = np.array2string(self.weights, precision=6, separator=", ")
        return f"{type(self).__name__}({list(self.group.cyclic_orders)}, {w})"

    def to_json(self) -> dict:
        return {"group": self.group.to_json(), "weights": [float(x) for x in self.weights]}


class ProbabilityMeasure(SignedMeasure):
    """Nonnegative weights of unit mass.

    Weights in ``[-tol, 0)`` are clamped to zero and the vector renormalized;
    anything more negative, or a mass further than ``tol`` from one, raises.
    """

    __slots__ = ()

    def __init__(self, group: AbelianGroup, weights, tol: float = EPS_MASS):
        w = np.array(weights, dtype=float).reshape(-1)
        if w.shape == (group.order,) and np.all(np.isfinite(w)):
            if w.min() < -tol:
                raise InvalidMeasureError(f"negative weight {w.min():.3e} in a probability")
            total = w.sum()
            if abs(total - 1.0) > tol:
                raise InvalidMeasureError(f"probability has mass {total!r}")
            w = np.clip(w, 0.0, None)
            w = w / w.sum()
        super().__init__(group, w)

    @classmethod
    def from_json(cls, data) -> "ProbabilityMeasure":
        return cls(*_parse_measure_json(data))


def _parse_measure_json(data):
    if not isinstance(data, dict) or "group" not in data or "weights" not in data:
        raise InvalidMeasureError('measure JSON needs "group" and "weights"')
    group = AbelianGroup.from_json(data["group"])
    return group, data["weights"]


def signed_from_json(data) -> SignedMeasure:
    return SignedMeasure(*_parse_measure_json(data))


def as_probability(mu: SignedMeasure, tol: float = EPS_MASS) -> ProbabilityMeasure:
    if isinstance(mu, ProbabilityMeasure):
        return mu
    return ProbabilityMeasure(mu.group, mu.weights, tol=tol)


def dirac(group: AbelianGroup, g: int) -> ProbabilityMeasure:
    w = np.zeros(group.order)
    w[group.check_element(g)] = 1.0
    return ProbabilityMeasure(group, w)


def uniform(group: AbelianGroup, elements: Sequence[int] | None = None) -> ProbabilityMeasure:
    """Uniform probability on ``elements`` (all of the group by default)."""
    w = np.zeros(group.order)
    if elements is None:
        w[:] = 1.0 / group.order
    else:
        idx = [group.check_element(g) for g in elements]
        w[idx] = 1.0 / len(idx)
    return ProbabilityMeasure(group, w)


def zero(group: AbelianGroup) -> SignedMeasure:
    return SignedMeasure(group, np.zeros(group.order))


def convolve(mu: SignedMeasure, nu: SignedMeasure) -> SignedMeasure:
    """Convolution; a probability when both factors are probabilities."""
    mu._check(nu)
    G = mu.group
    w = np.bincount(G.mul_table.ravel(), weights=np.outer(mu.weights, nu.weights).ravel(),
                    minlength=G.order)
    if isinstance(mu, ProbabilityMeasure) and isinstance(nu, ProbabilityMeasure):
        return ProbabilityMeasure(G, w, tol=1e-9)
    return SignedMeasure(G, w)


def power(mu: SignedMeasure, n: int) -> SignedMeasure:
    """``mu^n`` with ``mu^0 = delta_e``, by repeated squaring."""
    if n < 0:
        raise DomainError("negative convolution power")
    result = dirac(mu.group, 0)
    if not isinstance(mu, ProbabilityMeasure):
        result = SignedMeasure(mu.group, result.weights)
    base = mu
    while n:
        if n & 1:
            result = convolve(result, base)
        n >>= 1
        if n:
            base = convolve(base, base)
    return result


def tv_distance(mu: SignedMeasure, nu: SignedMeasure) -> float:
    mu._check(nu)
    return float(np.abs(mu.weights - nu.weights).sum())


def tv_norm(mu: SignedMeasure) -> float:
    return float(np.abs(mu.weights).sum())


def conv_matrix(mu: SignedMeasure) -> np.ndarray:
    """``M[i, j] = mu(g_i g_j^-1)`` so that ``M @ nu.weights == (mu * nu).weights``."""
    return mu.weights[mu.group.div_table]


def _check_time(t: float) -> float:
    t = float(t)
    if not 0.0 <= t < 1.0:
        raise DomainError(f"time must lie in [0, 1), got {t!r}")
    return t


def series_terms(t: float, eps: float = EPS_ALG) -> int:
    """Smallest ``K`` with geometric tail ``t^(K+1)/(1-t) < eps``."""
    if t == 0.0:
        return 0
    # t**(K+1) < eps*(1-t)
    k = math.ceil(math.log(eps * (1.0 - t)) / math.log(t)) - 1
    k = max(k, 0)
    while t ** (k + 1) / (1.0 - t) >= eps:
        k += 1
    while k > 0 and t ** k / (1.0 - t) < eps:
        k -= 1
    return k


def _neumann_series(mu: SignedMeasure, t: float, eps: float) -> np.ndarray:
    M = conv_matrix(mu)
    term = dirac(mu.group, 0).weights.copy()
    total = term.copy()
    for _ in range(series_terms(t, eps)):
        term = t * (M @ term)
        total += term
    return total


def _neumann_solve(mu: SignedMeasure, t: float) -> np.ndarray:
    G = mu.group
    rhs = dirac(G, 0).weights.copy()
    if isinstance(mu, ProbabilityMeasure):
        # Restrict to the subgroup generated by the support and deflate the
        # uniform eigenvector (eigenvalue 1), whose coefficient is known:
        # the inverse has mass 1/(1-t).
        idx = list(generated_subgroup(G, np.flatnonzero(mu.weights > 0)).elements)
        n = len(idx)
        A = np.eye(n) - t * (conv_matrix(mu)[np.ix_(idx, idx)] - 1.0 / n)
        rhs = rhs[idx] + t / ((1.0 - t) * n)
    else:
        idx = list(G.elements)
        A = np.eye(G.order) - t * conv_matrix(mu)
    try:
        xh = scipy.linalg.solve(A, rhs)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalError(f"linear solve failed for t={t}: {exc}") from exc
    x = np.zeros(G.order)
    x[idx] = xh
    return x


def neumann_inverse(mu: SignedMeasure, t: float, method: Literal["solve", "series", "both"] = "solve",
                    eps: float = EPS_ALG) -> SignedMeasure:
    """Inverse of ``delta_e - t*mu`` in the convolution algebra.

    ``"series"`` sums the Liouville series ``sum t^k mu^k`` up to the order
    where the analytic tail drops below ``eps`` (needs ``||mu|| <= 1``);
    ``"solve"`` solves ``(I - t M(mu)) x = delta_e``; ``"both"`` computes each
    and raises :class:`NumericalError` when they disagree by more than ``eps``.
    """
    t = _check_time(t)
    if method == "solve":
        x = _neumann_solve(mu, t)
    elif method == "series":
        x = _neumann_series(mu, t, eps)
    elif method == "both":
        x = _neumann_solve(mu, t)
        y = _neumann_series(mu, t, eps)
        gap = float(np.abs(x - y).sum())
        if gap > eps:
            raise NumericalError(f"series and solve disagree by {gap:.3e}")
    else:
        raise ValueError(f"unknown method {method!r}")
    return SignedMeasure(mu.group, x)


@dataclass(frozen=True)
class PowerSeries:
    """Coefficients ``a_n`` of ``F(x) = sum a_n x^n``.

    ``kind`` is ``"finite"`` (coefficients given in ``prefix``), ``"geometric"``
    (``a_n = scale * ratio**n``) or ``"exponential"`` (``a_n = scale / n!``).
    """

    kind: str
    prefix: tuple[float, ...] = ()
    scale: float = 1.0
    ratio: float = 0.0

    def __post_init__(self):
        if self.kind not in ("finite", "geometric", "exponential"):
            raise DomainError(f"unknown series kind {self.kind!r}")

    def coefficient(self, n: int) -> float:
        if self.kind == "finite":
            return float(self.prefix[n]) if n < len(self.prefix) else 0.0
        if self.kind == "geometric":
            return self.scale * self.ratio ** n
        return self.scale / math.factorial(n)

    def tail_bound(self, k: int) -> float:
        """Upper bound on ``sum_{n > k} |a_n|``."""
        if self.kind == "finite":
            return float(np.abs(self.prefix[k + 1:]).sum())
        if self.kind == "geometric":
            r = abs(self.ratio)
            if r >= 1.0:
                return math.inf
            return abs(self.scale) * r ** (k + 1) / (1.0 - r)
        # sum_{n>k} 1/n! <= 1/(k+1)! * (k+2)/(k+1)
        return abs(self.scale) / math.factorial(k + 1) * (k + 2) / (k + 1)

    @property
    def nonnegative(self) -> bool:
        if self.kind == "finite":
            return all(a >= 0 for a in self.prefix)
        if self.kind == "geometric":
            return self.scale >= 0 and self.ratio >= 0
        return self.scale >= 0

    def value_at_one(self) -> float:
        if self.kind == "finite":
            return float(sum(self.prefix))
        if self.kind == "geometric":
            if abs(self.ratio) >= 1.0:
                return math.inf
            return self.scale / (1.0 - self.ratio)
        return self.scale * math.e

    def truncation_order(self, eps: float = EPS_ALG) -> int:
        if self.kind == "finite":
            return max(len(self.prefix) - 1, 0)
        if math.isinf(self.tail_bound(0)):
            raise DomainError("coefficient tail diverges")
        k = 0
        while self.tail_bound(k) >= eps:
            k += 1
        return k


def geometric_series(t: float) -> PowerSeries:
    """``(1-t)/(1-t x)``, normalized so ``F(1) = 1``."""
    t = _check_time(t)
    return PowerSeries("geometric", scale=1.0 - t, ratio=t)


def exponential_series() -> PowerSeries:
    """``exp(x - 1)``, normalized so ``F(1) = 1``."""
    return PowerSeries("exponential", scale=math.exp(-1.0))


def evaluate_series(F: PowerSeries, mu: SignedMeasure, eps: float = EPS_ALG) -> SignedMeasure:
    """``sum a_n mu^n`` truncated where the coefficient tail drops below ``eps``.

    Exact truncation control needs ``||mu|| <= 1``, which holds for probabilities.
    The result is a probability when ``mu`` is one, the coefficients are
    nonnegative and ``F(1) = 1``.
    """
    K = F.truncation_order(eps)
    M = conv_matrix(mu)
    term = dirac(mu.group, 0).weights.copy()
    total = F.coefficient(0) * term
    for n in range(1, K + 1):
        term = M @ term
        total = total + F.coefficient(n) * term
    if (isinstance(mu, ProbabilityMeasure) and F.nonnegative
            and abs(F.value_at_one() - 1.0) <= EPS_MASS):
        return ProbabilityMeasure(mu.group, total, tol=max(EPS_MASS, 10 * eps))
    return SignedMeasure(mu.group, total)


@dataclass(frozen=True)
class Polynomial:
    """``S(mu) = a_0 + a_1 mu + ... + a_m mu^m`` with ``a_i >= 0``, ``sum a_i = 1``."""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(a) for a in self.coefficients)
        if not c:
            raise DomainError("polynomial needs at least one coefficient")
        if any(not math.isfinite(a) or a < 0 for a in c):
            raise DomainError("polynomial coefficients must be finite and nonnegative")
        if abs(sum(c) - 1.0) > EPS_MASS:
            raise DomainError(f"polynomial coefficients sum to {sum(c)!r}, not 1")
        object.__setattr__(self, "coefficients", c)

    def __call__(self, mu: ProbabilityMeasure) -> ProbabilityMeasure:
        M = conv_matrix(mu)
        term = dirac(mu.group, 0).weights.copy()
        total = self.coefficients[0] * term
        for a in self.coefficients[1:]:
            term = M @ term
            total = total + a * term
        return ProbabilityMeasure(mu.group, total, tol=1e-9)


IDENTITY_POLYNOMIAL = Polynomial((0.0, 1.0))


def rational_map(S1: Polynomial, S2: Polynomial, t: float, mu: ProbabilityMeasure) -> ProbabilityMeasure:
    """``(1-t) S1(mu) * (delta_e - t S2(mu))^-1``."""
    t = _check_time(t)
    if not isinstance(S1, Polynomial) or not isinstance(S2, Polynomial):
        raise DomainError("rational_map needs Polynomial numerator and denominator")
    mu = as_probability(mu)
    inv = neumann_inverse(S2(mu), t)
    out = (1.0 - t) * convolve(S1(mu), inv)
    return ProbabilityMeasure(mu.group, out.weights, tol=1e-9)

