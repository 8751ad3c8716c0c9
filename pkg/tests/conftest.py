import pytest

import mrplab as m
from mrplab.mrp import Edge, MrpSpec, TERMINAL


@pytest.fixture
def fixture_a():
    """Single state, certain termination, constant reward 1."""
    return MrpSpec(("s0",),
                   {"s0": (Edge(TERMINAL, 1.0, m.constant(1.0)),)},
                   (("s0", 1.0),))


@pytest.fixture
def self_loop_half():
    """s0 loops on itself w.p. 1/2, terminates w.p. 1/2."""
    return MrpSpec(("s0",),
                   {"s0": (Edge("s0", 0.5, m.constant(0.0)),
                           Edge(TERMINAL, 0.5, m.constant(0.0)))},
                   (("s0", 1.0),))


def make_funnel(variance_on_merge: float = 0.0, horizon: int = 3):
    """Two heads into one shared chain; optional gaussian noise on the final
    (merge-chain) edge, deterministic rewards elsewhere."""
    spec = m.gen_meeting(2, 2, horizon, m.constant(0.0))
    if variance_on_merge > 0.0:
        last = spec.states[-1]
        tr = dict(spec.transitions)
        tr[last] = (Edge(TERMINAL, 1.0, m.gaussian(0.0, variance_on_merge ** 0.5)),)
        spec = MrpSpec(spec.states, tr, spec.initial)
    return spec


def make_two_head_chain(m_len: int):
    """Two heads, the second skipping one step: crossing after two steps no
    matter how long the shared tail is."""
    states = ["a", "b"] + [f"s{t}" for t in range(2, m_len + 1)]
    tr = {"a": (Edge("s2", 1.0, m.constant(0.0)),),
          "b": (Edge("s3", 1.0, m.constant(0.0)),)}
    for t in range(2, m_len):
        tr[f"s{t}"] = (Edge(f"s{t + 1}", 1.0, m.constant(0.0)),)
    tr[f"s{m_len}"] = (Edge(TERMINAL, 1.0, m.constant(0.0)),)
    return MrpSpec(tuple(states), tr, (("a", 0.5), ("b", 0.5)))
