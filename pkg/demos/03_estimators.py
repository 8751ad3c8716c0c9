"""The two estimators on actual data, including the advantage cancellation.

On a meeting-horizon MRP both heads funnel into a shared chain.  TD's
estimates at the two heads share the chain's estimate, so the shared noise
cancels out of the advantage; Monte Carlo's estimates stay independent and
keep all of it.
"""

import numpy as np

import mrplab as m

spec = m.gen_meeting(branches=2, meeting_horizon=2, horizon=20,
                     reward=m.gaussian(0.0, 1.0))
report = m.analyze(spec)
true_adv = report.value("h1") - report.value("h2")

ds = m.sample_dataset(spec, n=200, seed=12)
td = m.td_estimate(ds, spec)
mc = m.mc_estimate(ds, spec)

print(f"true advantage          {true_adv:+.4f}")
print(f"TD advantage estimate   {m.advantage(td, 'h1', 'h2'):+.4f}")
print(f"MC advantage estimate   {m.advantage(mc, 'h1', 'h2'):+.4f}")

reps, n = 400, 200
errs = {"TD": [], "MC": []}
for rep in range(reps):
    d = m.sample_dataset(spec, n, seed=1000 + rep)
    errs["TD"].append(m.advantage(m.td_estimate(d, spec), "h1", "h2") - true_adv)
    errs["MC"].append(m.advantage(m.mc_estimate(d, spec), "h1", "h2") - true_adv)

print(f"\nover {reps} replications of n={n}:")
for tag in ("TD", "MC"):
    e = np.array(errs[tag])
    print(f"  {tag} advantage MSE  {np.mean(e ** 2):.4f}")
theo_td = m.td_asymptotic_variance(report, m.advantage_weighting("h1", "h2")) / n
theo_mc = m.mc_advantage_asymptotic_variance(report, "h1", "h2") / n
print(f"  asymptotic TD    {theo_td:.4f}")
print(f"  asymptotic MC    {theo_mc:.4f}")
print(f"  predicted gain   {theo_mc / theo_td:.1f}x")
