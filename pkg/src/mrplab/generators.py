"""Benchmark MRP families: random layered chains (optionally cyclic),
meeting-horizon chains, and the page/checkout funnel."""

from __future__ import annotations

from .mrp import TERMINAL, Edge, MrpSpec, RewardDist, constant, uniform
from .rng import Stream, mix64


def _layer_name(layer: int, index: int) -> str:
    return f"s{layer}_{index}"


def gen_layered(width: int, horizon: int, back_prob: float, seed: int) -> MrpSpec:
    """Random layered MRP: `width` states per layer, `horizon - 1` layers.

    Layer t states transition to every layer t+1 state with strictly positive
    random probabilities (independent uniforms on (0.05, 1], normalized); the
    last layer transitions to terminal.  With probability `back_prob` a state
    additionally gets one backward/same-layer edge to a uniformly chosen
    state, carrying probability mass 0.3 with the forward row scaled by 0.7.
    Every edge reward is uniform on [m-1, m+1] with m drawn uniformly from
    [-1, 1].  The initial distribution is uniform over layer 1.
    """
    if width < 1 or horizon < 2 or not (0.0 <= back_prob < 1.0):
        raise ValueError("need width >= 1, horizon >= 2, 0 <= back_prob < 1")
    rng = Stream(mix64(seed))
    layers = horizon - 1
    states = [_layer_name(t, w) for t in range(1, layers + 1) for w in range(1, width + 1)]
    transitions: dict[str, tuple[Edge, ...]] = {}

    for t in range(1, layers + 1):
        for w in range(1, width + 1):
            name = _layer_name(t, w)
            if t < layers:
                raw = [0.05 + 0.95 * rng.uniform() for _ in range(width)]
                tot = sum(raw)
                edges = [Edge(_layer_name(t + 1, i + 1), raw[i] / tot,
                              uniform(2.0 * rng.uniform() - 1.0, 1.0))
                         for i in range(width)]
            else:
                edges = [Edge(TERMINAL, 1.0, uniform(2.0 * rng.uniform() - 1.0, 1.0))]
            if rng.uniform() < back_prob:
                # at most one backward edge per node, uniform over layers <= t
                pick = rng.randint(width * t)
                target = _layer_name(pick // width + 1, pick % width + 1)
                edges = [Edge(e.to, 0.7 * e.p, e.reward) for e in edges]
                edges.append(Edge(target, 0.3, uniform(2.0 * rng.uniform() - 1.0, 1.0)))
            transitions[name] = tuple(edges)

    initial = tuple((_layer_name(1, w), 1.0 / width) for w in range(1, width + 1))
    return MrpSpec(tuple(states), transitions, initial)


def gen_meeting(branches: int, meeting_horizon: int, horizon: int,
                reward: RewardDist) -> MrpSpec:
    """Meeting-horizon MRP: `branches` disjoint deterministic chains that
    merge into one shared chain at step `meeting_horizon`.

    Heads are named `h{i}`, interior branch states `h{i}_{t}`, shared states
    `c{t}`.  Every edge carries the given reward template.  The initial
    distribution is uniform over the heads.  With meeting_horizon == horizon
    the chains never merge; with meeting_horizon == 2 every head feeds the
    shared chain directly.
    """
    k, h, t_hor = branches, meeting_horizon, horizon
    if k < 2 or h < 2 or h > t_hor:
        raise ValueError("need branches >= 2 and 2 <= meeting_horizon <= horizon")

    def branch_state(i: int, t: int) -> str:
        return f"h{i}" if t == 1 else f"h{i}_{t}"

    states: list[str] = []
    transitions: dict[str, tuple[Edge, ...]] = {}
    common = [f"c{t}" for t in range(h, t_hor)]
    first_after_branch = common[0] if common else TERMINAL

    for i in range(1, k + 1):
        chain = [branch_state(i, t) for t in range(1, h)]
        states.extend(chain)
        for a, b in zip(chain, chain[1:]):
            transitions[a] = (Edge(b, 1.0, reward),)
        transitions[chain[-1]] = (Edge(first_after_branch, 1.0, reward),)

    states.extend(common)
    for a, b in zip(common, common[1:]):
        transitions[a] = (Edge(b, 1.0, reward),)
    if common:
        transitions[common[-1]] = (Edge(TERMINAL, 1.0, reward),)

    initial = tuple((branch_state(i, 1), 1.0 / k) for i in range(1, k + 1))
    return MrpSpec(tuple(states), transitions, initial)


def gen_checkout(num_pages: int, click_probs, sale_prob: float) -> MrpSpec:
    """Page/checkout/sale funnel.

    Each of the `num_pages` initial states clicks through to the shared
    checkout state with its own probability, checkout converts to a sale with
    probability `sale_prob`, and entering the sale state earns reward 1.
    """
    click_probs = list(click_probs)
    if len(click_probs) != num_pages:
        raise ValueError("need one click probability per page")
    if not all(0.0 <= p <= 1.0 for p in click_probs) or not (0.0 <= sale_prob <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")

    zero = constant(0.0)
    states = [f"page{i}" for i in range(1, num_pages + 1)] + ["checkout", "sale"]
    transitions: dict[str, tuple[Edge, ...]] = {}
    for i, p in enumerate(click_probs, start=1):
        edges = []
        if p > 0:
            edges.append(Edge("checkout", p, zero))
        if p < 1:
            edges.append(Edge(TERMINAL, 1.0 - p, zero))
        transitions[f"page{i}"] = tuple(edges)
    edges = []
    if sale_prob > 0:
        edges.append(Edge("sale", sale_prob, constant(1.0)))
    if sale_prob < 1:
        edges.append(Edge(TERMINAL, 1.0 - sale_prob, zero))
    transitions["checkout"] = tuple(edges)
    transitions["sale"] = (Edge(TERMINAL, 1.0, zero),)

    initial = tuple((f"page{i}", 1.0 / num_pages) for i in range(1, num_pages + 1))
    return MrpSpec(tuple(states), transitions, initial)
