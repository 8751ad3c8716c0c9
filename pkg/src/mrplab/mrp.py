"""Terminating Markov reward process model: types, validation, sampling, I/O.

A spec lists non-terminal states, per-state outgoing edges (successor,
probability, reward distribution) and an initial distribution.  The terminal
state is not a member of `states`; edges refer to it by the reserved name
`TERMINAL`.  All types are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError, SpecMismatchError, StepCapError, UnknownStateError
from .rng import Stream, mix64, normal_quantile, units_np

TERMINAL = "__terminal__"

CONSTANT = "constant"
UNIFORM = "uniform-interval"
GAUSSIAN = "gaussian"

_KIND_CODE = {CONSTANT: 0, UNIFORM: 1, GAUSSIAN: 2}

DEFAULT_STEP_CAP = 10_000_000


@dataclass(frozen=True)
class RewardDist:
    """Per-edge reward distribution with closed-form mean and variance.

    kind is one of "constant", "uniform-interval" (mean and half-width) or
    "gaussian" (mean and standard deviation).
    """

    kind: str
    mean: float
    halfwidth: float = 0.0
    sd: float = 0.0

    def __post_init__(self):
        if self.kind not in _KIND_CODE:
            raise ValueError(f"unknown reward kind {self.kind!r}")
        if self.halfwidth < 0:
            raise ValueError("halfwidth must be >= 0")
        if self.sd < 0:
            raise ValueError("sd must be >= 0")

    def variance(self) -> float:
        if self.kind == UNIFORM:
            return self.halfwidth * self.halfwidth / 3.0
        if self.kind == GAUSSIAN:
            return self.sd * self.sd
        return 0.0


def constant(value: float) -> RewardDist:
    return RewardDist(CONSTANT, float(value))


def uniform(mean: float, halfwidth: float) -> RewardDist:
    return RewardDist(UNIFORM, float(mean), halfwidth=float(halfwidth))


def gaussian(mean: float, sd: float) -> RewardDist:
    return RewardDist(GAUSSIAN, float(mean), sd=float(sd))


@dataclass(frozen=True)
class Edge:
    """One outgoing transition: successor state (or TERMINAL), probability,
    reward distribution."""

    to: str
    p: float
    reward: RewardDist


@dataclass(frozen=True)
class MrpSpec:
    """Full model: ordered states, per-state edges, initial distribution."""

    states: tuple[str, ...]
    transitions: dict[str, tuple[Edge, ...]]
    initial: tuple[tuple[str, float], ...]

    def index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    def edges(self, state: str) -> tuple[Edge, ...]:
        try:
            return self.transitions[state]
        except KeyError:
            raise UnknownStateError(f"unknown state {state!r}") from None

    def fingerprint(self) -> str:
        fp = self.__dict__.get("_fp")
        if fp is None:
            fp = hashlib.sha256(dumps_mrp(self).encode()).hexdigest()
            object.__setattr__(self, "_fp", fp)
        return fp


@dataclass(frozen=True)
class Violation:
    """A single validation failure, naming the rule and offending state."""

    rule: str
    state: str | None
    detail: str

    def __str__(self):
        where = self.state if self.state is not None else "<spec>"
        return f"[{self.rule}] {where}: {self.detail}"


def validate(spec: MrpSpec) -> list[Violation]:
    """Check all spec invariants; returns an empty list iff the spec is valid.

    Violations are data, not failures: rule names are "duplicate-state",
    "unknown-state", "bad-probability", "row-sum", "terminal-unreachable",
    "initial-sum", "initial-support" and "initial-unreachable".
    """
    out: list[Violation] = []
    seen: set[str] = set()
    for s in spec.states:
        if s in seen:
            out.append(Violation("duplicate-state", s, "state declared twice"))
        seen.add(s)
        if s == TERMINAL:
            out.append(Violation("unknown-state", s, "terminal sentinel used as a state name"))

    known = set(spec.states)
    for s in spec.states:
        edges = spec.transitions.get(s)
        if edges is None:
            out.append(Violation("row-sum", s, "state has no outgoing transitions"))
            continue
        total = 0.0
        for e in edges:
            if e.to != TERMINAL and e.to not in known:
                out.append(Violation("unknown-state", s, f"edge to undeclared state {e.to!r}"))
            if not (0.0 <= e.p <= 1.0) or not np.isfinite(e.p):
                out.append(Violation("bad-probability", s, f"edge to {e.to!r} has p={e.p!r}"))
            if not np.isfinite(e.reward.mean):
                out.append(Violation("bad-probability", s, f"edge to {e.to!r} has non-finite reward mean"))
            total += e.p
        if abs(total - 1.0) > 1e-12:
            out.append(Violation("row-sum", s, f"outgoing probabilities sum to {total!r}"))
    for s in spec.transitions:
        if s not in known:
            out.append(Violation("unknown-state", s, "transitions declared for undeclared state"))

    if out:
        # structural problems make the graph checks meaningless
        return out

    # reach-terminal: reverse reachability from the terminal sentinel
    can_terminate: set[str] = set()
    frontier = [s for s in spec.states
                if any(e.to == TERMINAL and e.p > 0 for e in spec.transitions[s])]
    can_terminate.update(frontier)
    rev: dict[str, list[str]] = {s: [] for s in spec.states}
    for s in spec.states:
        for e in spec.transitions[s]:
            if e.p > 0 and e.to != TERMINAL:
                rev[e.to].append(s)
    while frontier:
        nxt = []
        for t in frontier:
            for s in rev[t]:
                if s not in can_terminate:
                    can_terminate.add(s)
                    nxt.append(s)
        frontier = nxt
    for s in spec.states:
        if s not in can_terminate:
            out.append(Violation("terminal-unreachable", s, "no positive-probability path to terminal"))

    total = sum(p for _, p in spec.initial)
    if abs(total - 1.0) > 1e-12:
        out.append(Violation("initial-sum", None, f"initial probabilities sum to {total!r}"))
    support = []
    for s, p in spec.initial:
        if s not in known:
            out.append(Violation("initial-support", s, "initial mass on undeclared state"))
        elif not (0.0 <= p <= 1.0) or not np.isfinite(p):
            out.append(Violation("bad-probability", s, f"initial p={p!r}"))
        elif p > 0:
            support.append(s)

    reachable = set(support)
    frontier = support
    while frontier:
        nxt = []
        for s in frontier:
            for e in spec.transitions.get(s, ()):
                if e.p > 0 and e.to != TERMINAL and e.to not in reachable:
                    reachable.add(e.to)
                    nxt.append(e.to)
        frontier = nxt
    for s in spec.states:
        if s not in reachable:
            out.append(Violation("initial-unreachable", s, "zero probability of being visited from the initial distribution"))
    return out


def require_valid(spec: MrpSpec) -> None:
    violations = validate(spec)
    if violations:
        raise InvalidSpecError(violations)


@dataclass(frozen=True)
class Trajectory:
    """One sampled episode: visited non-terminal states and per-step rewards.

    `rewards[t]` is earned on the transition out of `states[t]`, so both
    sequences have equal length and the final transition enters the terminal
    state.
    """

    states: tuple[str, ...]
    rewards: tuple[float, ...]


@dataclass(frozen=True)
class Dataset:
    """A batch of independent trajectories tied to the generating spec."""

    trajectories: tuple[Trajectory, ...]
    spec_fingerprint: str
    seed: int

    def __len__(self):
        return len(self.trajectories)


class Tables:
    """Dense per-spec sampling/analysis tables (internal).

    Successor index `n_states` stands for the terminal state.  The last real
    entry of every cumulative row is forced to exactly 1.0 so a uniform draw
    strictly below 1 always selects a real edge.
    """

    def __init__(self, spec: MrpSpec):
        idx = spec.index()
        n = len(spec.states)
        max_out = max((len(spec.transitions[s]) for s in spec.states), default=1)
        self.n_states = n
        self.cum = np.ones((n, max_out), dtype=np.float64)
        self.succ = np.full((n, max_out), n, dtype=np.int64)
        self.kind = np.zeros((n, max_out), dtype=np.int64)
        self.rmean = np.zeros((n, max_out), dtype=np.float64)
        self.rscale = np.zeros((n, max_out), dtype=np.float64)
        for s in spec.states:
            i = idx[s]
            edges = spec.transitions[s]
            acc = 0.0
            for j, e in enumerate(edges):
                acc += e.p
                self.cum[i, j] = acc
                self.succ[i, j] = n if e.to == TERMINAL else idx[e.to]
                self.kind[i, j] = _KIND_CODE[e.reward.kind]
                self.rmean[i, j] = e.reward.mean
                self.rscale[i, j] = e.reward.halfwidth if e.reward.kind == UNIFORM else e.reward.sd
            self.cum[i, len(edges) - 1] = 1.0

        init_states = [s for s, _ in spec.initial]
        self.init_idx = np.array([idx[s] for s in init_states], dtype=np.int64)
        self.init_cum = np.cumsum(np.array([p for _, p in spec.initial], dtype=np.float64))
        self.init_cum[-1] = 1.0


def _edge_reward(kind: int, mean: float, scale: float, u: float) -> float:
    if kind == 1:
        return mean + scale * (2.0 * u - 1.0)
    if kind == 2:
        return mean + scale * float(normal_quantile(u))
    return mean


def sample_trajectory(spec: MrpSpec, rng: Stream, step_cap: int = DEFAULT_STEP_CAP,
                      _tables: Tables | None = None, _start: int | None = None) -> Trajectory:
    """Sample one episode from the initial distribution until termination.

    Consumes one uniform for the initial state, then exactly two uniforms per
    step (transition, then reward).  Raises StepCapError after `step_cap`
    steps, which signals a near-non-terminating spec.
    """
    t = _tables if _tables is not None else Tables(spec)
    if _start is None:
        u0 = rng.uniform()
        cur = int(t.init_idx[int(np.searchsorted(t.init_cum, u0, side="right"))])
    else:
        cur = _start
    n = t.n_states
    states: list[int] = []
    rewards: list[float] = []
    while cur != n:
        if len(states) >= step_cap:
            raise StepCapError(f"trajectory exceeded step cap {step_cap}")
        states.append(cur)
        u_move = rng.uniform()
        j = int(np.searchsorted(t.cum[cur], u_move, side="right"))
        u_rew = rng.uniform()
        rewards.append(_edge_reward(int(t.kind[cur, j]), float(t.rmean[cur, j]),
                                    float(t.rscale[cur, j]), u_rew))
        cur = int(t.succ[cur, j])
    names = spec.states
    return Trajectory(tuple(names[i] for i in states), tuple(rewards))


def _sample_batch(spec: MrpSpec, n: int, seed: int, step_cap: int = DEFAULT_STEP_CAP,
                  tables: Tables | None = None):
    """Vectorized dataset sampling core.

    Returns (idx, rew, lengths): state-index and reward matrices padded with
    -1 / 0.0, one row per trajectory.  Bit-identical to sampling each
    trajectory sequentially with `Stream(mix64(seed, i))`.
    """
    t = tables if tables is not None else Tables(spec)
    ns = t.n_states
    keys = np.array([mix64(seed, i) for i in range(n)], dtype=np.uint64)
    counters = np.zeros(n, dtype=np.uint64)

    u0 = units_np(keys, counters)
    counters += np.uint64(1)
    cur = t.init_idx[np.searchsorted(t.init_cum, u0, side="right")]

    cols_idx: list[np.ndarray] = []
    cols_rew: list[np.ndarray] = []
    lengths = np.zeros(n, dtype=np.int64)
    active = cur != ns
    step = 0
    while active.any():
        if step >= step_cap:
            raise StepCapError(f"trajectory exceeded step cap {step_cap}")
        col_i = np.full(n, -1, dtype=np.int64)
        col_r = np.zeros(n, dtype=np.float64)

        ks, cs = keys[active], counters[active]
        u_move = units_np(ks, cs)
        u_rew = units_np(ks, cs + np.uint64(1))
        counters[active] += np.uint64(2)

        ca = cur[active]
        rows = t.cum[ca]
        j = (rows <= u_move[:, None]).sum(axis=1)
        sel = (np.arange(len(ca)), j)
        kind = t.kind[ca][sel]
        mean = t.rmean[ca][sel]
        scale = t.rscale[ca][sel]
        r = np.where(kind == 1, mean + scale * (2.0 * u_rew - 1.0),
                     np.where(kind == 2, mean + scale * normal_quantile(u_rew), mean))

        col_i[active] = ca
        col_r[active] = r
        lengths[active] += 1
        cols_idx.append(col_i)
        cols_rew.append(col_r)

        cur = cur.copy()
        cur[active] = t.succ[ca][sel]
        active = cur != ns
        step += 1

    if not cols_idx:
        return (np.full((n, 0), -1, dtype=np.int64), np.zeros((n, 0)), lengths)
    idx = np.stack(cols_idx, axis=1)
    rew = np.stack(cols_rew, axis=1)
    return idx, rew, lengths


def sample_dataset(spec: MrpSpec, n: int, seed: int,
                   step_cap: int = DEFAULT_STEP_CAP) -> Dataset:
    """Sample `n` independent trajectories.

    Trajectory `i` is drawn from the substream with key `mix64(seed, i)`, so
    the output is a pure function of (spec, n, seed) regardless of execution
    order or parallelism.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    require_valid(spec)
    idx, rew, lengths = _sample_batch(spec, n, seed, step_cap)
    names = spec.states
    trajs = []
    for i in range(n):
        li = int(lengths[i])
        trajs.append(Trajectory(tuple(names[j] for j in idx[i, :li]),
                                tuple(float(x) for x in rew[i, :li])))
    return Dataset(tuple(trajs), spec.fingerprint(), seed)


def dataset_arrays(dataset: Dataset, spec: MrpSpec):
    """Convert a dataset to padded index/reward matrices (internal fast path).

    Raises SpecMismatchError when the dataset was sampled from a different
    spec.
    """
    if dataset.spec_fingerprint != spec.fingerprint():
        raise SpecMismatchError("dataset fingerprint does not match spec")
    idx_map = spec.index()
    n = len(dataset.trajectories)
    lengths = np.array([len(tr.states) for tr in dataset.trajectories], dtype=np.int64)
    lmax = int(lengths.max()) if n else 0
    idx = np.full((n, lmax), -1, dtype=np.int64)
    rew = np.zeros((n, lmax), dtype=np.float64)
    for i, tr in enumerate(dataset.trajectories):
        li = lengths[i]
        idx[i, :li] = [idx_map[s] for s in tr.states]
        rew[i, :li] = tr.rewards
    return idx, rew, lengths


# ---------------------------------------------------------------------------
# File format (JSON-shaped text; probabilities with 17 significant digits)

def _f17(x: float) -> str:
    return format(float(x), ".17g")


def _reward_json(r: RewardDist) -> str:
    if r.kind == UNIFORM:
        return ('{"kind": %s, "mean": %s, "halfwidth": %s}'
                % (json.dumps(r.kind), _f17(r.mean), _f17(r.halfwidth)))
    if r.kind == GAUSSIAN:
        return ('{"kind": %s, "mean": %s, "sd": %s}'
                % (json.dumps(r.kind), _f17(r.mean), _f17(r.sd)))
    return '{"kind": %s, "mean": %s}' % (json.dumps(r.kind), _f17(r.mean))


def dumps_mrp(spec: MrpSpec) -> str:
    """Serialize to the MRP file format.

    Top-level keys: `states`, `transitions` (records with `from`, `to`, `p`,
    `reward`) and `initial`.  The terminal sentinel appears only in `to`
    fields.  Output is canonical: fixed key order, declaration order, 17
    significant digits for probabilities.
    """
    lines = ["{"]
    lines.append('"states": [%s],' % ", ".join(json.dumps(s) for s in spec.states))
    rows = []
    for s in spec.states:
        for e in spec.transitions[s]:
            rows.append('{"from": %s, "to": %s, "p": %s, "reward": %s}'
                        % (json.dumps(s), json.dumps(e.to), _f17(e.p), _reward_json(e.reward)))
    lines.append('"transitions": [\n%s\n],' % ",\n".join(rows))
    init = ", ".join('{"state": %s, "p": %s}' % (json.dumps(s), _f17(p))
                     for s, p in spec.initial)
    lines.append('"initial": [%s]' % init)
    lines.append("}")
    return "\n".join(lines)


def loads_mrp(text: str) -> MrpSpec:
    doc = json.loads(text)
    states = tuple(str(s) for s in doc["states"])
    transitions: dict[str, list[Edge]] = {s: [] for s in states}
    for row in doc["transitions"]:
        r = row["reward"]
        kind = r["kind"]
        reward = RewardDist(kind, float(r["mean"]),
                            halfwidth=float(r.get("halfwidth", 0.0)),
                            sd=float(r.get("sd", 0.0)))
        transitions.setdefault(row["from"], []).append(
            Edge(str(row["to"]), float(row["p"]), reward))
    initial = tuple((str(d["state"]), float(d["p"])) for d in doc["initial"])
    return MrpSpec(states, {s: tuple(es) for s, es in transitions.items()}, initial)


def save_mrp(spec: MrpSpec, path) -> None:
    with open(path, "w") as f:
        f.write(dumps_mrp(spec))
        f.write("\n")


def load_mrp(path) -> MrpSpec:
    with open(path) as f:
        return loads_mrp(f.read())
