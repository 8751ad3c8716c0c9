"""Run scaled-down versions of the benchmark sweeps and write their CSVs.

Three tables come out of this script:
  horizon.csv  - MSE of both estimators as the layered horizon grows,
                 next to the asymptotic predictions
  meeting.csv  - TD/MC MSE ratios as the meeting horizon varies
  regret.csv   - how often each estimator mis-ranks two states

Full-size parameters (n=2000, 10000 replications, T up to 120) reproduce
the reference experiments; scale `n`, `reps` and the sweep lists up and
expect minutes of runtime.  MRPLAB_THREADS caps worker processes.
"""

from pathlib import Path

import mrplab as m

outdir = Path(__file__).resolve().parent / "out"
outdir.mkdir(exist_ok=True)

horizon = m.ExperimentConfig(kind="horizon-sweep", width=5, t_list=(10, 20, 40),
                             n=400, reps=200, base_seed=1)
rows = m.run_horizon_sweep(horizon)
m.write_outputs(horizon, rows, outdir / "horizon.csv")
print("horizon sweep (advantage MSE):")
for r in rows:
    print(f"  T={r.sweep_var:>4.0f}  empirical TD {r.mse_td_adv:.5f} MC {r.mse_mc_adv:.5f}"
          f"   asymptotic TD {r.theo_td_adv:.5f} MC {r.theo_mc_adv:.5f}")

meeting = m.ExperimentConfig(kind="meeting-sweep", branches=5, horizon=20,
                             h_list=(2, 5, 10, 15, 20), n=200, reps=200, base_seed=2)
ratio_rows = m.run_meeting_sweep(meeting)
m.write_outputs(meeting, ratio_rows, outdir / "meeting.csv")
print("\nmeeting-horizon sweep (TD/MC ratio at a head):")
for r in ratio_rows:
    print(f"  H={r.sweep_var:>4.0f}  empirical {r.ratio_s:.3f}  asymptotic {r.theo_ratio_s:.3f}")

regret = m.ExperimentConfig(kind="regret", width=5, horizon=30, back_prob=0.1,
                            n_list=(50, 200, 800), reps=400, base_seed=3)
regret_rows = m.run_regret(regret)
m.write_outputs(regret, regret_rows, outdir / "regret.csv")
print("\nregret (probability of ranking the two states wrongly):")
for r in regret_rows:
    print(f"  n={r.sweep_var:>5.0f}  TD {r.regret_td:.3f} (approx {r.theo_regret_td:.3f})"
          f"   MC {r.regret_mc:.3f} (approx {r.theo_regret_mc:.3f})")

print(f"\nCSV tables and config sidecars in {outdir}/")
