"""Why temporal-difference estimation can beat Monte Carlo: the webpage
funnel, analyzed exactly.

A hundred page variants feed a single checkout state.  Every page's value
runs through checkout, so an estimator that shares the checkout estimate
across pages pools all the traffic.  The pooling coefficient makes that
intuition exact: it *is* the asymptotic TD/MC mean-squared-error ratio.
"""

import mrplab as m

spec = m.gen_checkout(num_pages=100, click_probs=[0.04] * 100, sale_prob=0.03)
report = m.analyze(spec)

page = "page1"
print(f"V({page})        = {report.value(page):.6f}   (click 0.04 x sale 0.03)")
print(f"V(checkout)     = {report.value('checkout'):.6f}")
print(f"visit P({page})  = {report.visit_prob[report.idx(page)]:.4f}   (1 of 100 pages)")
print(f"visit P(checkout)= {report.visit_prob[report.idx('checkout')]:.4f}")

mc = m.mc_asymptotic_variance(report, page)
td = m.td_value_asymptotic_variance(report, page)
coeff = m.pooling_coefficient(report, page)
print(f"\nMC asymptotic variance  {mc:.4f}")
print(f"TD asymptotic variance  {td:.4f}")
print(f"ratio TD/MC             {td / mc:.4f}")
print(f"pooling coefficient     {coeff.value:.4f}   (identical, by the ratio theorem)")

print("\nwhere the estimator noise lives (top mixing weights):")
order = coeff.weights.argsort()[::-1][:3]
for i in order:
    print(f"  {report.states[i]:<10} weight {coeff.weights[i]:.3f} "
          f"pairwise C {coeff.pairwise[i]:.3f}")

print("\nthe same machinery on a no-pooling instance (disjoint chains):")
disjoint = m.gen_meeting(4, 8, 8, m.gaussian(0.0, 1.0))
r2 = m.analyze(disjoint)
print(f"  pooling coefficient of a head: {m.pooling_coefficient(r2, 'h1').value:.4f} "
      "(TD cannot help)")
