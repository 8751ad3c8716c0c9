"""Closed-form analysis of a terminating MRP.

Computes the value function, the occupancy (fundamental) matrix, visit
probabilities, one-step variances, the asymptotic (CLT) variances of the
Monte Carlo and temporal-difference estimators, the inverse trajectory
pooling coefficient, and the advantage-estimation bounds.

Notation used throughout: `occupancy[i, j]` is the expected number of visits
to state j for trajectories started at state i, `occupancy_from_d` the same
under the initial distribution, and `one_step_var[j]` the variance of
R + V(next) conditioned on being at state j.
"""

from __future__ import annotations

from dataclasses import dataclass

import warnings

import numpy as np
from scipy.linalg import LinAlgError, LinAlgWarning, lu_factor, lu_solve

from .coupling import check_disjoint
from .errors import (DegenerateRatioError, DisjointViolationError,
                     SingularSystemError, UnknownStateError)
from .mrp import TERMINAL, MrpSpec

PIVOT_TOL = 1e-12


def _lu(a: np.ndarray):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            lu, piv = lu_factor(a, check_finite=False)
    except LinAlgError as e:
        raise SingularSystemError(str(e)) from None
    if np.min(np.abs(np.diag(lu))) < PIVOT_TOL:
        raise SingularSystemError(
            "pivot below threshold: the chain does not terminate from every state")
    return lu, piv


def _q_r_moments(spec: MrpSpec):
    """Non-terminal transition block Q, mean one-step reward, and per-edge
    tables needed for the one-step variance."""
    idx = spec.index()
    n = len(spec.states)
    q = np.zeros((n, n))
    rbar = np.zeros(n)
    for s in spec.states:
        i = idx[s]
        for e in spec.transitions[s]:
            if e.to != TERMINAL:
                q[i, idx[e.to]] += e.p
            rbar[i] += e.p * e.reward.mean
    d = np.zeros(n)
    for s, p in spec.initial:
        d[idx[s]] += p
    return q, rbar, d


@dataclass(eq=False)
class AnalysisReport:
    """Exact quantities for one spec; all arrays are ordered like `states`."""

    spec: MrpSpec
    states: tuple[str, ...]
    values: np.ndarray
    occupancy: np.ndarray
    occupancy_from_d: np.ndarray
    visit_prob: np.ndarray
    one_step_var: np.ndarray
    expected_horizon: np.ndarray

    def __post_init__(self):
        self._index = {s: i for i, s in enumerate(self.states)}

    def idx(self, state: str) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise UnknownStateError(f"unknown state {state!r}") from None

    def value(self, state: str) -> float:
        return float(self.values[self.idx(state)])


def analyze(spec: MrpSpec) -> AnalysisReport:
    """Solve the chain exactly.

    Values solve (I - Q) V = rbar with V(terminal) = 0; the occupancy matrix
    is (I - Q)^-1; visit probabilities use the strong-Markov identity
    P(s in trajectory) = E[N(s)] / E[N(s) | start at s].  Raises
    SingularSystemError when (I - Q) is numerically singular, which signals a
    non-terminating spec.
    """
    q, rbar, d = _q_r_moments(spec)
    n = len(spec.states)
    a = np.eye(n) - q
    lu = _lu(a)
    values = lu_solve(lu, rbar, check_finite=False)
    occupancy = lu_solve(lu, np.eye(n), check_finite=False)

    idx = spec.index()
    vfull = np.append(values, 0.0)  # terminal value
    second = np.zeros(n)
    for s in spec.states:
        i = idx[s]
        for e in spec.transitions[s]:
            j = len(spec.states) if e.to == TERMINAL else idx[e.to]
            step = e.reward.mean + vfull[j]
            second[i] += e.p * (e.reward.variance() + step * step)
    mean_step = rbar + q @ values
    one_step_var = np.maximum(second - mean_step * mean_step, 0.0)

    occupancy_from_d = d @ occupancy
    visit_prob = occupancy_from_d / np.diag(occupancy)
    expected_horizon = occupancy.sum(axis=1)
    return AnalysisReport(spec, spec.states, values, occupancy, occupancy_from_d,
                          visit_prob, one_step_var, expected_horizon)


# ---------------------------------------------------------------------------
# Weightings

def advantage_weighting(s: str, s_prime: str) -> dict[str, float]:
    """The weighting whose value is the advantage of `s` over `s_prime`."""
    if s == s_prime:
        raise ValueError("advantage weighting needs two distinct states")
    return {s: 1.0, s_prime: -1.0}


def _check_weighting(report: AnalysisReport, weighting: dict[str, float]):
    if not weighting or not any(w != 0.0 for w in weighting.values()):
        raise ValueError("weighting must have at least one nonzero entry")
    for s in weighting:
        report.idx(s)


def weighted_value(report: AnalysisReport, weighting: dict[str, float]) -> float:
    """J(weighting) = sum of weight(s) * V(s)."""
    _check_weighting(report, weighting)
    return float(sum(w * report.values[report.idx(s)] for s, w in weighting.items()))


def weighted_occupancy(report: AnalysisReport, weighting: dict[str, float]) -> np.ndarray:
    """Weighted expected visit counts, one entry per state."""
    _check_weighting(report, weighting)
    eta = np.zeros(len(report.states))
    for s, w in weighting.items():
        eta += w * report.occupancy[report.idx(s)]
    return eta


# ---------------------------------------------------------------------------
# Asymptotic (CLT) variances

def mc_asymptotic_variance(report: AnalysisReport, s: str) -> float:
    """n times the limiting MSE of the first-visit Monte Carlo value estimate:
    (1 / P(s in trajectory)) * sum_j E[N(j) | start s] * one_step_var(j)."""
    i = report.idx(s)
    return float(report.occupancy[i] @ report.one_step_var / report.visit_prob[i])


def td_asymptotic_variance(report: AnalysisReport, weighting: dict[str, float]) -> float:
    """n times the limiting MSE of the TD estimate of the weighted value:
    sum_j eta(j)^2 * one_step_var(j) / E[N(j)]."""
    eta = weighted_occupancy(report, weighting)
    return float(np.sum(eta * eta * report.one_step_var / report.occupancy_from_d))


def td_value_asymptotic_variance(report: AnalysisReport, s: str) -> float:
    """TD variance for a point mass at `s` (the per-state corollary)."""
    return td_asymptotic_variance(report, {s: 1.0})


@dataclass(frozen=True)
class PoolingCoefficient:
    """Inverse trajectory pooling coefficient C(s) with its ingredients.

    `pairwise[j]` is C(s, j) = E[N(s -> j)] / E[N(j)], the fraction of
    expected visits to j that follow a first visit to s; `weights[j]` is the
    mixing distribution proportional to E[N(j) | start s] * one_step_var(j).
    When every weight is zero (a noiseless chain) the coefficient is reported
    as 1 with `degenerate` set.
    """

    value: float
    pairwise: np.ndarray
    weights: np.ndarray
    degenerate: bool


def pooling_coefficient(report: AnalysisReport, s: str) -> PoolingCoefficient:
    i = report.idx(s)
    pairwise = report.occupancy[i] * report.visit_prob[i] / report.occupancy_from_d
    raw = report.occupancy[i] * report.one_step_var
    total = raw.sum()
    if total <= 0.0:
        return PoolingCoefficient(1.0, pairwise, np.zeros_like(raw), True)
    weights = raw / total
    return PoolingCoefficient(float(weights @ pairwise), pairwise, weights, False)


def td_mc_ratio(report: AnalysisReport, s: str) -> float:
    """Asymptotic TD/MC mean-squared-error ratio for the value at `s`.

    Equals the inverse trajectory pooling coefficient; raises
    DegenerateRatioError when the MC variance is zero (0/0).
    """
    mc = mc_asymptotic_variance(report, s)
    if mc == 0.0:
        raise DegenerateRatioError(f"MC asymptotic variance at {s!r} is zero")
    return td_value_asymptotic_variance(report, s) / mc


# ---------------------------------------------------------------------------
# Advantage estimation

def mc_advantage_asymptotic_variance(report: AnalysisReport, s: str, s_prime: str) -> float:
    """n times the limiting MSE of the MC advantage estimate, exact.

    The per-state MC errors are correlated when one trajectory can visit both
    states; the covariance equals
    P(first hit s, then s') * Var(return | start s')  (+ symmetric term)
    scaled by the two visit probabilities.  For disjoint pairs this reduces
    to the sum of the per-state variances.
    """
    i, j = report.idx(s), report.idx(s_prime)
    if i == j:
        return 0.0
    var_s = mc_asymptotic_variance(report, s)
    var_sp = mc_asymptotic_variance(report, s_prime)

    ret_var = report.occupancy @ report.one_step_var  # Var(return | start) per state
    hit_sp_from_s = report.occupancy[i, j] / report.occupancy[j, j]
    hit_s_from_sp = report.occupancy[j, i] / report.occupancy[i, i]
    p_s_first = _taboo_visit_prob(report, target=i, taboo=j)
    p_sp_first = _taboo_visit_prob(report, target=j, taboo=i)
    cov = (p_s_first * hit_sp_from_s * ret_var[j]
           + p_sp_first * hit_s_from_sp * ret_var[i])
    cov /= report.visit_prob[i] * report.visit_prob[j]
    return float(var_s + var_sp - 2.0 * cov)


def _taboo_visit_prob(report: AnalysisReport, target: int, taboo: int) -> float:
    """P(a trajectory from the initial distribution hits `target` without
    having hit `taboo` first): visit probability in the chain with the taboo
    state made absorbing."""
    q, _, d = _q_r_moments(report.spec)
    q = q.copy()
    q[taboo, :] = 0.0
    lu = _lu(np.eye(len(q)) - q)
    occ = lu_solve(lu, np.eye(len(q)), check_finite=False)
    return float(d @ occ[:, target] / occ[target, target])


def mc_advantage_lower_bound(report: AnalysisReport, s: str, s_prime: str) -> float:
    """Lower bound on n times the MC advantage MSE for disjoint state pairs:
    sigma^2_min * (E[T | s] / P(s in traj) + E[T | s'] / P(s' in traj)).

    Raises DisjointViolationError when a trajectory can visit both states.
    """
    if not check_disjoint(report.spec, s, s_prime):
        raise DisjointViolationError(
            f"a trajectory can visit both {s!r} and {s_prime!r}")
    i, j = report.idx(s), report.idx(s_prime)
    sig_min = float(np.min(report.one_step_var))
    return sig_min * (report.expected_horizon[i] / report.visit_prob[i]
                      + report.expected_horizon[j] / report.visit_prob[j])


def td_advantage_upper_bound(report: AnalysisReport, s: str, s_prime: str,
                             crossing_time: float) -> float:
    """Upper bound on n times the TD advantage MSE:
    2 * sigma^2_max / min(visit probs) * crossing_time.

    `crossing_time` is the exact trajectory crossing time or any upper bound
    on it (e.g. the Monte Carlo estimate under the independent coupling).
    """
    if crossing_time < 0:
        raise ValueError("crossing_time must be >= 0")
    i, j = report.idx(s), report.idx(s_prime)
    sig_max = float(np.max(report.one_step_var))
    pmin = min(report.visit_prob[i], report.visit_prob[j])
    return 2.0 * sig_max / pmin * crossing_time
