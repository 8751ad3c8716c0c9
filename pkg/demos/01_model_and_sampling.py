"""Build a small terminating MRP by hand, validate it, sample trajectories,
and round-trip it through the JSON file format.

The model here is a tiny subscription funnel: a visitor either explores
(possibly looping a while) or leaves; exploring can end in a signup worth 1.
"""

import mrplab as m
from mrplab.mrp import Edge, MrpSpec, TERMINAL
from mrplab.rng import Stream, mix64

spec = MrpSpec(
    states=("landing", "explore", "signup"),
    transitions={
        "landing": (Edge("explore", 0.6, m.constant(0.0)),
                    Edge(TERMINAL, 0.4, m.constant(0.0))),
        "explore": (Edge("explore", 0.5, m.uniform(0.05, 0.05)),
                    Edge("signup", 0.1, m.constant(0.0)),
                    Edge(TERMINAL, 0.4, m.constant(0.0))),
        "signup": (Edge(TERMINAL, 1.0, m.constant(1.0)),),
    },
    initial=(("landing", 1.0),),
)

print("violations:", m.validate(spec))

print("\nfive sampled trajectories:")
for i in range(5):
    tr = m.sample_trajectory(spec, Stream(mix64(0, i)))
    path = " -> ".join(tr.states)
    print(f"  {path}  (total reward {sum(tr.rewards):+.3f})")

ds = m.sample_dataset(spec, n=10_000, seed=7)
lengths = [len(t.states) for t in ds.trajectories]
print(f"\n10k trajectories: mean length {sum(lengths) / len(lengths):.3f}")
print("same seed reproduces byte-identically:",
      m.sample_dataset(spec, 10_000, seed=7) == ds)

text = m.dumps_mrp(spec)
print("\nfile format round-trips:", m.loads_mrp(text) == spec)
print(text.splitlines()[2])
