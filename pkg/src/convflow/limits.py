"""Asymptotics of convolution powers and of the flow as ``t -> 1``.

Covers reach sets and acyclicity, Haar measures of subgroups, the
Choquet-Deny kernel and co-kernel, fixed points, the basic-set decomposition
of ``P(G)`` into invariant subgroup simplices, stable-set diagnostics and a
non-surjectivity witness for ``Q_t``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import DegenerateMeasureError, DomainError, InconclusiveError, NumericalError
from .groups import AbelianGroup, Subgroup, enumerate_subgroups, generated_subgroup, MAX_ENUMERATION_ORDER
from .measures import (
    EPS_ALG,
    EPS_MASS,
    EPS_SUPP,
    ProbabilityMeasure,
    SignedMeasure,
    _check_time,
    as_probability,
    conv_matrix,
    convolve,
    tv_distance,
)
from .semigroup import fixed_point_differential, q_map, tangent_spectrum

#: Default probe time for empirical limit checks.
PROBE_T = 1.0 - 1e-6
# distinct points of a genuine power cycle sit on disjoint cosets (TV = 2)
_CYCLE_SEPARATION = 1e-6


def _measure_json(mu: SignedMeasure | None):
    return None if mu is None else mu.to_json()


def _complex_json(values) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(values, dtype=complex)]


def _null_space(A: np.ndarray, atol: float) -> np.ndarray:
    """Columns spanning ``{x : A x = 0}``, singular values ``<= atol`` counted as zero."""
    n = A.shape[1]
    if A.size == 0:
        return np.eye(n)
    _, s, vh = scipy.linalg.svd(A)
    rank = int(np.sum(s > atol))
    return vh[rank:].T.copy()


def _support(mu: SignedMeasure) -> tuple[int, ...]:
    supp = mu.support(EPS_SUPP)
    if not supp:
        raise DegenerateMeasureError("measure has empty support")
    return supp


# ---------------------------------------------------------------------------
# reach sets and acyclicity


@dataclass(frozen=True)
class ReachSequence:
    """Sets ``Z_+^m`` for ``m = 1..len(sets)`` up to the first repetition.

    The eventual cycle is ``sets[preperiod:]`` and has length ``period``.
    """

    group: AbelianGroup
    sets: tuple[frozenset, ...]
    preperiod: int
    period: int

    @property
    def cycle(self) -> tuple[frozenset, ...]:
        return self.sets[self.preperiod:]

    def to_json(self) -> dict:
        G = self.group
        return {
            "sets": [[list(G.residues(g)) for g in sorted(s)] for s in self.sets],
            "preperiod": self.preperiod,
            "period": self.period,
        }


def reach_sets(nu: SignedMeasure, m_max: int | None = None) -> ReachSequence:
    """Iterate ``Z_+^{m+1} = Z_+^m . supp(nu)`` until a set repeats."""
    G = nu.group
    supp = np.array(_support(nu))
    current = frozenset(int(g) for g in supp)
    seen = {current: 0}
    sets = [current]
    while True:
        if m_max is not None and len(sets) >= m_max:
            raise InconclusiveError(f"no repeated reach set within {m_max} steps")
        nxt = frozenset(int(x) for x in np.unique(G.mul_table[np.ix_(sorted(current), supp)]))
        if nxt in seen:
            j = seen[nxt]
            return ReachSequence(G, tuple(sets), preperiod=j, period=len(sets) - j)
        seen[nxt] = len(sets)
        sets.append(nxt)
        current = nxt


@dataclass(frozen=True)
class AcyclicityReport:
    acyclic: bool
    witness_N: int | None
    period: int
    H: Subgroup
    reach: ReachSequence

    def to_json(self) -> dict:
        return {
            "acyclic": self.acyclic,
            "witness_N": self.witness_N,
            "period": self.period,
            "H": self.H.to_json(),
            "reach": self.reach.to_json(),
        }


def is_acyclic(nu: SignedMeasure) -> AcyclicityReport:
    """Acyclic iff the reach sets settle on the subgroup generated by the support."""
    seq = reach_sets(nu)
    H = generated_subgroup(nu.group, _support(nu))
    target = frozenset(H.elements)
    acyclic = seq.period == 1 and seq.cycle[0] == target
    witness = None
    if acyclic:
        witness = next(m for m, s in enumerate(seq.sets, start=1) if s == target)
    return AcyclicityReport(acyclic, witness, seq.period, H, seq)


def support_subgroup(mu: SignedMeasure) -> Subgroup:
    """``S(mu)``: the subgroup generated by the support."""
    return generated_subgroup(mu.group, _support(mu))


def haar_on(H: Subgroup) -> ProbabilityMeasure:
    w = np.zeros(H.group.order)
    w[list(H.elements)] = 1.0 / H.order
    return ProbabilityMeasure(H.group, w)


# ---------------------------------------------------------------------------
# convolution powers


@dataclass(frozen=True)
class PowerLimit:
    """Either ``limit`` (powers converge) or ``cycle`` (they accumulate periodically)."""

    limit: ProbabilityMeasure | None
    cycle: tuple[ProbabilityMeasure, ...] | None
    iterations: int

    @property
    def points(self) -> tuple[ProbabilityMeasure, ...]:
        return (self.limit,) if self.limit is not None else self.cycle

    def to_json(self) -> dict:
        return {
            "limit": _measure_json(self.limit),
            "cycle": None if self.cycle is None else [c.to_json() for c in self.cycle],
            "iterations": self.iterations,
        }


def power_limit_oracle(nu: ProbabilityMeasure, tol: float = 1e-12, max_iter: int = 10_000) -> PowerLimit:
    """Brute-force iteration of ``nu^n``.

    Stops at the first ``n`` where ``nu^n`` is within ``tol`` (TV) of
    ``nu^(n-d)`` for some ``d <= |G|``. ``d = 1`` returns the limit; larger
    ``d`` returns the cycle ``nu^(n-d), ..., nu^(n-1)`` rotated so its first
    point carries the most mass at the identity.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    nu = as_probability(nu)
    G = nu.group
    M = conv_matrix(nu)
    window = deque([nu.weights.copy()], maxlen=G.order + 1)
    p = nu.weights.copy()
    for n in range(2, max_iter + 1):
        p = M @ p
        p /= p.sum()
        window.append(p)
        hist = list(window)
        for d in range(1, len(hist)):
            if np.abs(hist[-1] - hist[-1 - d]).sum() > tol:
                continue
            pts = hist[-1 - d:-1]
            if d > 1 and min(np.abs(pts[i] - pts[j]).sum()
                             for i in range(d) for j in range(i)) < _CYCLE_SEPARATION:
                # oscillating approach to a single limit, not a genuine cycle
                break
            if d == 1:
                return PowerLimit(ProbabilityMeasure(G, p, tol=1e-9), None, n)
            start = int(np.argmax([q[0] for q in pts]))
            pts = pts[start:] + pts[:start]
            return PowerLimit(None, tuple(ProbabilityMeasure(G, q, tol=1e-9) for q in pts), n)
    raise InconclusiveError(f"powers neither converged nor cycled within {max_iter} steps")


# ---------------------------------------------------------------------------
# omega-limits


@dataclass(frozen=True)
class LimitReport:
    mu: ProbabilityMeasure
    predicted: tuple[ProbabilityMeasure, ...]
    empirical_distance: float | None
    probe_t: float
    acyclic: bool
    support_subgroup: Subgroup
    cycle_length: int
    solution_basis: np.ndarray = field(repr=False)

    def to_json(self) -> dict:
        return {
            "mu": self.mu.to_json(),
            "predicted": [p.to_json() for p in self.predicted],
            "empirical_distance": self.empirical_distance,
            "probe_t": self.probe_t,
            "acyclic": self.acyclic,
            "support_subgroup": self.support_subgroup.to_json(),
            "cycle_length": self.cycle_length,
            "solution_dimension": int(self.solution_basis.shape[1]),
            "solution_basis": [[float(x) for x in col] for col in self.solution_basis.T],
        }


def _choquet_deny_solutions(points: Sequence[ProbabilityMeasure], H: Subgroup, atol: float) -> np.ndarray:
    # nu supported on H with nu*c = nu for every c; columns are full-length vectors
    G = H.group
    idx = list(H.elements)
    eye = np.eye(len(idx))
    A = np.vstack([conv_matrix(c)[np.ix_(idx, idx)] - eye for c in points])
    basis_h = _null_space(A, atol)
    basis = np.zeros((G.order, basis_h.shape[1]))
    basis[idx] = basis_h
    return basis


def predict_omega_limit(mu: ProbabilityMeasure, probe_t: float = PROBE_T,
                        tol: float = 1e-12, max_iter: int = 10_000) -> LimitReport:
    """Predicted accumulation points of ``Q_t(mu)`` as ``t -> 1``.

    Acyclic measures converge to the Haar measure of ``S(mu)``. Otherwise the
    powers of ``mu`` cycle; every limit point ``nu`` is supported on ``S(mu)``
    and satisfies ``nu * c = nu`` for each cycle point ``c``, and that joint
    linear system is solved. A unique probability solution is reported as the
    prediction; a larger solution space is exposed through ``solution_basis``.
    """
    probe_t = _check_time(probe_t)
    mu = as_probability(mu)
    H = support_subgroup(mu)
    report = is_acyclic(mu)
    if report.acyclic:
        points: tuple[ProbabilityMeasure, ...] = (haar_on(H),)
        cycle_length = 1
    else:
        points = power_limit_oracle(mu, tol, max_iter).points
        cycle_length = len(points)
    basis = _choquet_deny_solutions(points, H, atol=1e-8)
    predicted: tuple[ProbabilityMeasure, ...] = ()
    if report.acyclic:
        predicted = points
    elif basis.shape[1] == 1:
        v = basis[:, 0] / basis[:, 0].sum()
        predicted = (ProbabilityMeasure(mu.group, v, tol=1e-8),)
    distance = None
    if predicted:
        q = q_map(probe_t, mu)
        distance = min(tv_distance(q, p) for p in predicted)
    return LimitReport(mu, predicted, distance, probe_t, report.acyclic, H, cycle_length, basis)


# ---------------------------------------------------------------------------
# Choquet-Deny kernel and co-kernel


@dataclass(frozen=True)
class KernelSpace:
    """Solution set of a Choquet-Deny type linear equation.

    ``kind == "cokernel"``: ``{nu : nu * anchor = nu}``, a linear space with
    ``basis`` (columns). ``kind == "kernel"``: ``{mu : anchor * mu = anchor,
    mass 1}``, the affine space ``particular + span(basis)``; ``particular`` is
    ``None`` when the system is inconsistent.
    """

    kind: str
    anchor: ProbabilityMeasure
    basis: np.ndarray = field(repr=False)
    particular: np.ndarray | None = field(repr=False)
    canonical_point: ProbabilityMeasure | None
    tol: float = EPS_ALG

    @property
    def dimension(self) -> int:
        return int(self.basis.shape[1])

    @property
    def empty(self) -> bool:
        return self.kind == "kernel" and self.particular is None

    def contains(self, mu: ProbabilityMeasure) -> bool:
        mu = as_probability(mu)
        if self.kind == "cokernel":
            return tv_distance(convolve(mu, self.anchor), mu) <= self.tol
        return tv_distance(convolve(self.anchor, mu), self.anchor) <= self.tol

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "anchor": self.anchor.to_json(),
            "dimension": self.dimension,
            "basis": [[float(x) for x in col] for col in self.basis.T],
            "particular": None if self.particular is None else [float(x) for x in self.particular],
            "canonical_point": _measure_json(self.canonical_point),
        }


def cokernel(mu0: ProbabilityMeasure) -> KernelSpace:
    """Null space of ``M(mu0) - I``; always contains the Haar measure of ``S(mu0)``."""
    mu0 = as_probability(mu0)
    A = conv_matrix(mu0) - np.eye(mu0.group.order)
    basis = _null_space(A, EPS_ALG)
    return KernelSpace("cokernel", mu0, basis, None, haar_on(support_subgroup(mu0)))


def kernel(nu0: ProbabilityMeasure) -> KernelSpace:
    """Probabilities ``mu`` with ``nu0 * mu = nu0``."""
    nu0 = as_probability(nu0)
    N = nu0.group.order
    A = np.vstack([conv_matrix(nu0), np.ones((1, N))])
    b = np.concatenate([nu0.weights, [1.0]])
    basis = _null_space(A, EPS_ALG)
    x, *_ = scipy.linalg.lstsq(A, b)
    if np.abs(A @ x - b).sum() > 1e-8:
        return KernelSpace("kernel", nu0, basis, None, None)
    canonical = None
    if x.min() >= -EPS_MASS:
        canonical = ProbabilityMeasure(nu0.group, x, tol=1e-9)
    else:
        lp = scipy.optimize.linprog(np.zeros(N), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        if lp.status == 0:
            canonical = ProbabilityMeasure(nu0.group, lp.x, tol=1e-9)
    return KernelSpace("kernel", nu0, basis, x, canonical)


# ---------------------------------------------------------------------------
# fixed points and basic sets


def fixed_points(G: AbelianGroup, max_order: int = MAX_ENUMERATION_ORDER) -> list[ProbabilityMeasure]:
    """Idempotent probabilities: the Haar measures of all subgroups."""
    points = []
    for H in enumerate_subgroups(G, max_order):
        eta = haar_on(H)
        if tv_distance(convolve(eta, eta), eta) > EPS_ALG:
            raise NumericalError(f"Haar measure of {H.elements} failed idempotency")
        points.append(eta)
    return points


@dataclass(frozen=True)
class BasicSet:
    subgroup: Subgroup
    attractor: ProbabilityMeasure
    invariance_defect: float
    tangent_eigenvalues: np.ndarray = field(repr=False)

    @property
    def attracting(self) -> bool:
        return bool(np.all(np.abs(self.tangent_eigenvalues) < 1.0))

    def to_json(self) -> dict:
        return {
            "subgroup": self.subgroup.to_json(),
            "attractor": self.attractor.to_json(),
            "invariance_defect": self.invariance_defect,
            "tangent_eigenvalues": _complex_json(self.tangent_eigenvalues),
            "attracting": self.attracting,
        }


@dataclass(frozen=True)
class BasicSetDecomposition:
    group: AbelianGroup
    t: float
    entries: tuple[BasicSet, ...]

    def to_json(self) -> dict:
        return {
            "group": self.group.to_json(),
            "t": self.t,
            "entries": [e.to_json() for e in self.entries],
        }


def basic_sets(G: AbelianGroup, t: float = 0.5, samples: int = 8, seed: int = 0,
               max_order: int = MAX_ENUMERATION_ORDER) -> BasicSetDecomposition:
    """One invariant simplex ``P(H)`` per subgroup ``H`` with its Haar attractor.

    Invariance is spot-checked on ``samples`` random members of ``P(H)``
    (``invariance_defect`` is the largest mass ``Q_t`` puts outside ``H``), and
    the attractor is checked through the spectrum of ``d Q_t`` restricted to
    the tangent space of ``P(H)``.
    """
    t = _check_time(t)
    rng = np.random.default_rng(seed)
    entries = []
    for H in enumerate_subgroups(G, max_order):
        eta = haar_on(H)
        idx = list(H.elements)
        outside = np.ones(G.order, dtype=bool)
        outside[idx] = False
        defect = 0.0
        for _ in range(samples):
            w = np.zeros(G.order)
            w[idx] = rng.dirichlet(np.ones(H.order))
            q = q_map(t, ProbabilityMeasure(G, w))
            defect = max(defect, float(np.abs(q.weights[outside]).sum()))
        spectrum = tangent_spectrum(t, eta, H)
        entries.append(BasicSet(H, eta, defect, spectrum))
    return BasicSetDecomposition(G, t, tuple(entries))


# ---------------------------------------------------------------------------
# stable sets


@dataclass(frozen=True)
class StableSetReport:
    eta: ProbabilityMeasure
    mu: ProbabilityMeasure
    in_kernel: bool
    initial_distance: float
    rates: tuple[tuple[float, float], ...]
    sigma: float
    lambda_bound: float | None
    t0: float | None

    @property
    def within_bound(self) -> bool:
        return self.lambda_bound is not None and all(r <= self.lambda_bound for _, r in self.rates)

    def to_json(self) -> dict:
        return {
            "eta": self.eta.to_json(),
            "mu": self.mu.to_json(),
            "in_kernel": self.in_kernel,
            "initial_distance": self.initial_distance,
            "rates": [[t, r] for t, r in self.rates],
            "sigma": self.sigma,
            "lambda_bound": self.lambda_bound,
            "t0": self.t0,
            "within_bound": self.within_bound,
        }


def stable_rate(eta: ProbabilityMeasure, mu: ProbabilityMeasure, t_grid: Sequence[float]) -> StableSetReport:
    """Contraction ratios ``|Q_t(mu) - eta| / |mu - eta|`` over ``t_grid``.

    ``sigma`` is the largest linearization remainder
    ``|Q_t(mu) - eta - dQ_t(mu - eta)| / |mu - eta|`` seen on the grid and the
    reported bound is ``lambda = sigma + 1 - t0`` with ``t0 = min(t_grid)``.
    """
    eta, mu = as_probability(eta), as_probability(mu)
    if tv_distance(convolve(eta, eta), eta) > EPS_ALG:
        raise DomainError("eta must be idempotent")
    ts = sorted(_check_time(t) for t in t_grid)
    in_kernel = tv_distance(convolve(eta, mu), eta) <= EPS_ALG
    d0 = tv_distance(mu, eta)
    if d0 == 0.0 or not ts:
        return StableSetReport(eta, mu, in_kernel, d0, (), 0.0, None, ts[0] if ts else None)
    rates = []
    sigma = 0.0
    delta = mu - eta
    for t in ts:
        q = q_map(t, mu)
        rates.append((t, tv_distance(q, eta) / d0))
        lin = fixed_point_differential(t, eta).apply(delta)
        rem = np.abs(q.weights - eta.weights - lin.weights).sum() / d0
        sigma = max(sigma, float(rem))
    t0 = ts[0]
    return StableSetReport(eta, mu, in_kernel, d0, tuple(rates), sigma, sigma + 1.0 - t0, t0)


# ---------------------------------------------------------------------------
# non-surjectivity


@dataclass(frozen=True)
class WitnessReport:
    """Outcome of solving ``[(1-t) delta_e + t nu] * mu = nu`` for signed ``mu``.

    ``nu`` lies in the image of ``Q_t`` iff the system has a probability
    solution. ``reason`` is one of ``"negative-weight"`` (unique solution with
    a negative entry), ``"inconsistent"`` (no solution at all),
    ``"no-nonnegative-solution"`` (singular, consistent, no probability in the
    solution set) or ``"in-image"``.
    """

    nu: ProbabilityMeasure
    t: float
    solution: SignedMeasure | None
    not_in_image: bool
    reason: str
    residual: float

    @property
    def min_weight(self) -> float | None:
        return None if self.solution is None else float(self.solution.weights.min())

    def to_json(self) -> dict:
        return {
            "nu": self.nu.to_json(),
            "t": self.t,
            "solution": _measure_json(self.solution),
            "min_weight": self.min_weight,
            "not-in-image": self.not_in_image,
            "reason": self.reason,
            "residual": self.residual,
        }


def nonsurjectivity_witness(G: AbelianGroup, nu: ProbabilityMeasure, t: float) -> WitnessReport:
    t = _check_time(t)
    if t == 0.0:
        raise DomainError("witness needs t in (0, 1)")
    nu = as_probability(nu)
    if nu.group != G:
        raise DomainError("measure does not live on the given group")
    N = G.order
    A = (1.0 - t) * np.eye(N) + t * conv_matrix(nu)
    b = nu.weights
    s = scipy.linalg.svdvals(A)
    if s[-1] > 1e-12 * s[0]:
        x = scipy.linalg.solve(A, b)
        res = float(np.abs(A @ x - b).sum())
        sol = SignedMeasure(G, x)
        negative = bool(x.min() < -EPS_MASS)
        return WitnessReport(nu, t, sol, negative, "negative-weight" if negative else "in-image", res)
    x, *_ = scipy.linalg.lstsq(A, b)
    res = float(np.abs(A @ x - b).sum())
    if res > 1e-9:
        return WitnessReport(nu, t, None, True, "inconsistent", res)
    lp = scipy.optimize.linprog(np.zeros(N), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if lp.status == 0:
        return WitnessReport(nu, t, SignedMeasure(G, lp.x), False, "in-image",
                             float(np.abs(A @ lp.x - b).sum()))
    if lp.status != 2:
        raise NumericalError(f"feasibility solve failed: {lp.message}")
    return WitnessReport(nu, t, SignedMeasure(G, x), True, "no-nonnegative-solution", res)
