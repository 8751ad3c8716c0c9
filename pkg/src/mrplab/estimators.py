"""The two competing tabular estimators on a batch of trajectories.

First-visit Monte Carlo averages, per state, the cumulative reward observed
after the first visit in each trajectory that reaches the state.  The TD
estimate solves the empirical Bellman equation built from every observed
(state, reward, next state) tuple.  States never visited in the data carry
no estimate; callers decide the policy (the experiment harness redraws).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve

from .errors import SingularSystemError, UndefinedEstimateError, UnknownStateError
from .mrp import Dataset, MrpSpec, dataset_arrays


@dataclass(eq=False)
class TabularEstimate:
    """Per-state value estimates with visit counts and a definedness mask.

    For MC the count is the number of trajectories containing the state; for
    TD it is the total number of visits.  `values` holds NaN where undefined.
    """

    method: str
    states: tuple[str, ...]
    values: np.ndarray
    counts: np.ndarray
    defined: np.ndarray

    def __post_init__(self):
        self._index = {s: i for i, s in enumerate(self.states)}

    def idx(self, state: str) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise UnknownStateError(f"unknown state {state!r}") from None

    def value(self, state: str) -> float:
        i = self.idx(state)
        if not self.defined[i]:
            raise UndefinedEstimateError(
                f"{self.method} estimate at {state!r} is undefined: never visited")
        return float(self.values[i])

    def count(self, state: str) -> int:
        return int(self.counts[self.idx(state)])


def _mc_core(idx: np.ndarray, rew: np.ndarray, n_states: int):
    """First-visit MC on padded index/reward matrices (internal)."""
    sums = np.zeros(n_states)
    counts = np.zeros(n_states, dtype=np.int64)
    if idx.size:
        # suffix sums of rewards; zero padding does not disturb them
        g = np.flip(np.cumsum(np.flip(rew, axis=1), axis=1), axis=1)
        valid = idx >= 0
        rows, cols = np.nonzero(valid)
        st = idx[rows, cols]
        key = rows * n_states + st  # row-major order: first occurrence = first visit
        _, first = np.unique(key, return_index=True)
        first_states = st[first]
        counts += np.bincount(first_states, minlength=n_states)
        sums += np.bincount(first_states, weights=g[rows[first], cols[first]],
                            minlength=n_states)
    defined = counts > 0
    values = np.full(n_states, np.nan)
    values[defined] = sums[defined] / counts[defined]
    return values, counts, defined


def mc_estimate(dataset: Dataset, spec: MrpSpec) -> TabularEstimate:
    """First-visit Monte Carlo: mean over trajectories of the cumulative
    reward strictly after the first visit to each state."""
    idx, rew, _ = dataset_arrays(dataset, spec)
    values, counts, defined = _mc_core(idx, rew, len(spec.states))
    return TabularEstimate("MC", spec.states, values, counts, defined)


def _td_core(idx: np.ndarray, rew: np.ndarray, n_states: int):
    """Empirical Bellman solve on padded index/reward matrices (internal)."""
    valid = idx >= 0
    nxt = np.full_like(idx, n_states)
    nxt[:, :-1] = idx[:, 1:]
    nxt[nxt < 0] = n_states  # padding means the next state is terminal

    cur = idx[valid]
    nx = nxt[valid]
    rw = rew[valid]

    counts = np.bincount(cur, minlength=n_states)
    visited = np.nonzero(counts > 0)[0]
    k = len(visited)
    values = np.full(n_states, np.nan)
    if k:
        local = np.full(n_states + 1, k, dtype=np.int64)
        local[visited] = np.arange(k)
        p_hat = np.zeros((k, k + 1))
        np.add.at(p_hat, (local[cur], local[nx]), 1.0)
        p_hat /= counts[visited][:, None]
        r_hat = np.bincount(cur, weights=rw, minlength=n_states)[visited] / counts[visited]
        try:
            lu, piv = lu_factor(np.eye(k) - p_hat[:, :k], check_finite=False)
        except LinAlgError as e:
            raise SingularSystemError(str(e)) from None
        if np.min(np.abs(np.diag(lu))) < 1e-12:
            raise SingularSystemError("empirical Bellman system is singular")
        values[visited] = lu_solve((lu, piv), r_hat, check_finite=False)
    return values, counts, counts > 0


def td_estimate(dataset: Dataset, spec: MrpSpec) -> TabularEstimate:
    """Tabular TD: solve the empirical Bellman equation on the visited states.

    Transition frequencies and mean one-step rewards use every visit.  Every
    tuple comes from a terminated trajectory, so each visited state keeps a
    positive-probability empirical path to terminal and the system is
    invertible; singularity is raised defensively.
    """
    idx, rew, _ = dataset_arrays(dataset, spec)
    values, counts, defined = _td_core(idx, rew, len(spec.states))
    return TabularEstimate("TD", spec.states, values, counts, defined)


def advantage(est: TabularEstimate, s: str, s_prime: str) -> float:
    """Estimated advantage of `s` over `s_prime`; both must be defined."""
    if s == s_prime:
        est.value(s)
        return 0.0
    return est.value(s) - est.value(s_prime)


def weighted_estimate(est: TabularEstimate, weighting: dict[str, float]) -> float:
    """Weighted combination of per-state estimates."""
    if not weighting or not any(w != 0.0 for w in weighting.values()):
        raise ValueError("weighting must have at least one nonzero entry")
    return float(sum(w * est.value(s) for s, w in weighting.items()))
