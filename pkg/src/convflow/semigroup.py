"""The rational flow ``Q_t(mu) = (1-t) mu * (delta_e - t mu)^-1`` and its calculus.

Times compose under ``t1 (+) t2 = 1 - (1-t1)(1-t2)``, for which
``Q_t1 o Q_t2 = Q_{t1 (+) t2}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg

from .errors import DomainError, NumericalError
from .groups import Subgroup, generated_subgroup
from .measures import (
    EPS_ALG,
    ProbabilityMeasure,
    SignedMeasure,
    _check_time,
    as_probability,
    conv_matrix,
    convolve,
    dirac,
    neumann_inverse,
    tv_norm,
)

# computed probabilities carry rounding of order cond(I - tM) * machine eps
_OUTPUT_TOL = 1e-8


def _check_extended(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"time must lie in [0, 1], got {t!r}")
    return t


def delta_compose(t1: float, t2: float) -> float:
    """``1 - (1-t1)(1-t2)`` on the extended time set ``[0, 1]``."""
    t1, t2 = _check_extended(t1), _check_extended(t2)
    return 1.0 - (1.0 - t1) * (1.0 - t2)


def delta_power(t: float, n: int) -> float:
    """``n``-fold composite ``t (+) ... (+) t = 1 - (1-t)^n``."""
    t = _check_extended(t)
    if n < 0:
        raise DomainError(f"power must be >= 0, got {n}")
    return 1.0 - (1.0 - t) ** n


def delta_power_complement(t: float, n: int) -> float:
    """``(1-t)^n``, the distance of the ``n``-fold composite to 1.

    ``delta_power`` rounds to 1.0 once this drops below about 1e-16; pass
    this value as ``q_map(..., complement=...)`` to keep such times usable.
    """
    t = _check_extended(t)
    if n < 0:
        raise DomainError(f"power must be >= 0, got {n}")
    return (1.0 - t) ** n


def _resolve_time(t: float, complement: float | None) -> tuple[float, float]:
    if complement is None:
        t = _check_time(t)
        return t, 1.0 - t
    s = float(complement)
    if not 0.0 < s <= 1.0:
        raise DomainError(f"complement 1-t must lie in (0, 1], got {s!r}")
    t = _check_extended(t)
    if abs((1.0 - s) - t) > 4 * np.finfo(float).eps:
        raise DomainError(f"complement {s!r} inconsistent with t={t!r}")
    return 1.0 - s, s


def q_map(t: float, mu: ProbabilityMeasure,
          method: Literal["solve", "series"] = "solve",
          complement: float | None = None) -> ProbabilityMeasure:
    """Evaluate ``Q_t(mu)``.

    The default solves ``(I - t M(mu)) x = (1-t) mu``, which stays accurate as
    ``t -> 1``; ``"series"`` multiplies by the summed Liouville series instead.
    ``complement`` optionally supplies ``1-t`` exactly, for times closer to 1
    than floating point can represent (``t`` itself may then round to 1.0).
    """
    t, s = _resolve_time(t, complement)
    mu = as_probability(mu)
    if t == 0.0:
        return mu
    G = mu.group
    if method == "solve":
        x = _flow_solve(t, s, mu)
    elif method == "series":
        t = _check_time(t)
        x = (1.0 - t) * convolve(mu, neumann_inverse(mu, t, method="series")).weights
    else:
        raise ValueError(f"unknown method {method!r}")
    return ProbabilityMeasure(G, x, tol=_OUTPUT_TOL)


def _flow_solve(t: float, s: float, mu: ProbabilityMeasure) -> np.ndarray:
    # (I - tM) x = (1-t) mu restricted to the subgroup H generated by the
    # support (P(H) is invariant). The uniform vector on H is an eigenvector
    # of M_H with eigenvalue 1; deflating it with the rank-one term J/|H| uses
    # 1'x = 1 and removes the 1/(1-t) conditioning of the mass direction.
    # The deflated matrix stays invertible even when t rounds to 1.
    G = mu.group
    idx = list(generated_subgroup(G, np.flatnonzero(mu.weights > 0)).elements)
    n = len(idx)
    M = conv_matrix(mu)[np.ix_(idx, idx)]
    A = np.eye(n) - t * (M - 1.0 / n)
    rhs = s * mu.weights[idx] + t / n
    try:
        xh = scipy.linalg.solve(A, rhs)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalError(f"q_map solve failed at t={t}: {exc}") from exc
    x = np.zeros(G.order)
    x[idx] = xh
    return x


def q_iterate(t: float, mu: ProbabilityMeasure, n: int) -> ProbabilityMeasure:
    """``n``-fold composition of ``Q_t`` applied step by step."""
    if n < 0:
        raise DomainError(f"iteration count must be >= 0, got {n}")
    out = as_probability(mu)
    for _ in range(n):
        out = q_map(t, out)
    return out


def modified_cd_residual(t: float, nu: SignedMeasure, mu: SignedMeasure) -> float:
    """TV size of ``(1-t) nu + t nu*mu - mu``."""
    return tv_norm((1.0 - t) * nu + t * convolve(nu, mu) - mu)


def solve_modified_cd(t: float, nu: ProbabilityMeasure) -> ProbabilityMeasure:
    """Unique solution of ``(1-t) nu + t nu*mu = mu``; it coincides with ``Q_t(nu)``."""
    mu_t = q_map(t, nu)
    res = modified_cd_residual(t, nu, mu_t)
    if res > EPS_ALG:
        raise NumericalError(f"modified Choquet-Deny residual {res:.3e} exceeds {EPS_ALG}")
    return mu_t


def generator(mu: SignedMeasure) -> SignedMeasure:
    """Vector field ``chi(mu) = mu*mu - mu``; zero exactly at idempotents."""
    return SignedMeasure(mu.group, convolve(mu, mu).weights - mu.weights)


def sum_zero_basis(n: int) -> np.ndarray:
    """``(n, n-1)`` orthonormal basis of the vectors with zero coordinate sum."""
    if n == 1:
        return np.zeros((1, 0))
    return scipy.linalg.null_space(np.ones((1, n)))


@dataclass(frozen=True)
class DifferentialOperator:
    """Convolution by ``density``: the derivative of ``Q_t`` at ``point``."""

    t: float
    point: ProbabilityMeasure
    density: SignedMeasure

    @property
    def matrix(self) -> np.ndarray:
        return conv_matrix(self.density)

    def apply(self, nu: SignedMeasure) -> SignedMeasure:
        return convolve(self.density, nu)

    def tangent_matrix(self, subgroup: Subgroup | None = None) -> np.ndarray:
        """Matrix on the sum-zero tangent space, optionally of ``P(subgroup)``."""
        M = self.matrix
        if subgroup is not None:
            idx = list(subgroup.elements)
            M = M[np.ix_(idx, idx)]
        B = sum_zero_basis(M.shape[0])
        return B.T @ M @ B


def differential(t: float, mu: ProbabilityMeasure) -> DifferentialOperator:
    """``d_mu Q_t`` = convolution by ``(1-t)(delta_e - t mu)^-2``."""
    t = _check_time(t)
    mu = as_probability(mu)
    inv = neumann_inverse(mu, t)
    return DifferentialOperator(t, mu, (1.0 - t) * convolve(inv, inv))


def fixed_point_differential(t: float, eta: ProbabilityMeasure) -> DifferentialOperator:
    """Closed form at an idempotent ``eta``: ``(1-t) delta_e + (2t-t^2)/(1-t) eta``."""
    t = _check_time(t)
    eta = as_probability(eta)
    density = (1.0 - t) * dirac(eta.group, 0) + ((2 * t - t * t) / (1.0 - t)) * eta
    return DifferentialOperator(t, eta, density)


def _sorted_by_modulus(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((values.imag, values.real, np.abs(values)))
    return values[order]


def tangent_spectrum(t: float, mu: ProbabilityMeasure, subgroup: Subgroup | None = None) -> np.ndarray:
    """Eigenvalues of ``d_mu Q_t`` on the tangent space, ascending modulus."""
    T = differential(t, mu).tangent_matrix(subgroup)
    if T.size == 0:
        return np.zeros(0, dtype=complex)
    try:
        values = scipy.linalg.eigvals(T)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    return _sorted_by_modulus(values)
