"""Command-line entry point.

Subcommands: generate | analyze | estimate | crossing | experiment.
Exit codes: 0 success, 1 usage error, 2 spec-validation failure,
3 numerical failure (singular system, step/enumeration cap, cyclic spec for
exact crossing).  Output files are written to a temporary name and renamed,
so no partial files are left behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analysis as an
from . import coupling, estimators, harness
from .errors import (ConfigError, CyclicSpecError, DegenerateAdvantageError,
                     DegenerateRatioError, EnumerationCapError,
                     InfeasibleMarginalsError, InvalidSpecError,
                     SingularSystemError, StepCapError, UnknownStateError)
from .generators import gen_checkout, gen_layered, gen_meeting
from .mrp import (CONSTANT, GAUSSIAN, UNIFORM, MrpSpec, RewardDist, dumps_mrp,
                  load_mrp, sample_dataset, validate)

_NUMERIC_ERRORS = (SingularSystemError, StepCapError, CyclicSpecError,
                   EnumerationCapError, InfeasibleMarginalsError,
                   DegenerateRatioError, DegenerateAdvantageError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _f17(x) -> str:
    return format(float(x), ".17g")


def _load_valid(path) -> MrpSpec:
    if not Path(path).exists():
        raise UsageError(f"no such file: {path}")
    try:
        spec = load_mrp(path)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise InvalidSpecError([f"unparseable MRP file: {e}"]) from None
    violations = validate(spec)
    if violations:
        raise InvalidSpecError(violations)
    return spec


def _reward_from_flags(ns) -> RewardDist:
    kind = ns.reward_kind
    if kind == CONSTANT:
        return RewardDist(CONSTANT, ns.reward_mean)
    if kind == UNIFORM:
        return RewardDist(UNIFORM, ns.reward_mean, halfwidth=ns.reward_halfwidth)
    return RewardDist(GAUSSIAN, ns.reward_mean, sd=ns.reward_sd)


# ---------------------------------------------------------------------------
# Subcommand handlers

def _cmd_generate(ns) -> int:
    if ns.family == "layered":
        for flag in ("width", "horizon", "seed"):
            if getattr(ns, flag) is None:
                raise UsageError(f"--{flag} is required for the layered family")
        spec = gen_layered(ns.width, ns.horizon, ns.p_back, ns.seed)
    elif ns.family == "meeting":
        for flag in ("branches", "meeting_horizon", "horizon"):
            if getattr(ns, flag) is None:
                raise UsageError(f"--{flag.replace('_', '-')} is required for the meeting family")
        spec = gen_meeting(ns.branches, ns.meeting_horizon, ns.horizon,
                           _reward_from_flags(ns))
    else:
        for flag in ("pages", "click_probs", "sale_prob"):
            if getattr(ns, flag) is None:
                raise UsageError(f"--{flag.replace('_', '-')} is required for the checkout family")
        probs = [float(x) for x in ns.click_probs.split(",")]
        if len(probs) == 1:
            probs = probs * ns.pages
        spec = gen_checkout(ns.pages, probs, ns.sale_prob)
    _atomic_write(ns.output, dumps_mrp(spec) + "\n")
    print(f"wrote {ns.output} ({len(spec.states)} states)")
    return 0


def _cmd_analyze(ns) -> int:
    spec = _load_valid(ns.mrp)
    report = an.analyze(spec)
    if ns.state:
        for s in ns.state:
            if s not in report.states:
                raise UsageError(f"unknown state {s!r}")
            c = an.pooling_coefficient(report, s)
            print(f"state {s}")
            print(f"  value                  {report.value(s):.12g}")
            print(f"  visit probability      {report.visit_prob[report.idx(s)]:.12g}")
            print(f"  expected horizon       {report.expected_horizon[report.idx(s)]:.12g}")
            print(f"  pooling coefficient    {c.value:.12g}"
                  + (" (degenerate: no one-step noise)" if c.degenerate else ""))
            print(f"  MC asymptotic variance {an.mc_asymptotic_variance(report, s):.12g}")
            print(f"  TD asymptotic variance {an.td_value_asymptotic_variance(report, s):.12g}")
    if ns.output:
        _write_report(report, ns.output)
        print(f"wrote {ns.output}")
    elif not ns.state:
        for s in report.states:
            print(f"{s},{_f17(report.value(s))}")
    return 0


def _write_report(report: an.AnalysisReport, path) -> None:
    if str(path).endswith(".json"):
        doc = {
            "states": list(report.states),
            "values": [float(x) for x in report.values],
            "occupancy": [[float(x) for x in row] for row in report.occupancy],
            "occupancy_from_d": [float(x) for x in report.occupancy_from_d],
            "visit_prob": [float(x) for x in report.visit_prob],
            "one_step_var": [float(x) for x in report.one_step_var],
            "expected_horizon": [float(x) for x in report.expected_horizon],
        }
        _atomic_write(path, json.dumps(doc, indent=1) + "\n")
        return
    lines = ["state,value,visit_prob,one_step_var,expected_horizon,"
             "occupancy_from_d,pooling_coefficient,mc_asym_var,td_asym_var"]
    for s in report.states:
        i = report.idx(s)
        lines.append(",".join([
            s, _f17(report.values[i]), _f17(report.visit_prob[i]),
            _f17(report.one_step_var[i]), _f17(report.expected_horizon[i]),
            _f17(report.occupancy_from_d[i]),
            _f17(an.pooling_coefficient(report, s).value),
            _f17(an.mc_asymptotic_variance(report, s)),
            _f17(an.td_value_asymptotic_variance(report, s)),
        ]))
    _atomic_write(path, "\n".join(lines) + "\n")


def _cmd_estimate(ns) -> int:
    spec = _load_valid(ns.mrp)
    dataset = sample_dataset(spec, ns.n, ns.seed)
    methods = ("MC", "TD") if ns.method == "both" else (ns.method.upper(),)
    lines = ["state,method,estimate,count"]
    for method in methods:
        est = (estimators.mc_estimate(dataset, spec) if method == "MC"
               else estimators.td_estimate(dataset, spec))
        for s in spec.states:
            i = est.idx(s)
            val = _f17(est.values[i]) if est.defined[i] else ""
            lines.append(f"{s},{method},{val},{int(est.counts[i])}")
    text = "\n".join(lines) + "\n"
    if ns.output:
        _atomic_write(ns.output, text)
        print(f"wrote {ns.output}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_crossing(ns) -> int:
    spec = _load_valid(ns.mrp)
    for s in (ns.src, ns.dst):
        if s not in spec.states:
            raise UsageError(f"unknown state {s!r}")
    if ns.mc:
        est, se = coupling.crossing_time_upper(spec, ns.src, ns.dst, ns.n, ns.seed)
        print(f"H_upper({ns.src}, {ns.dst}) = {est:.12g}  "
              f"(standard error {se:.6g}, n={ns.n}, independent coupling)")
        return 0
    try:
        result = coupling.solve_crossing(spec, ns.src, ns.dst, cap=ns.cap)
    except CyclicSpecError as e:
        raise CyclicSpecError(f"{e}; use --mc for a Monte Carlo upper bound") from None
    except EnumerationCapError as e:
        raise EnumerationCapError(f"{e}; use --mc for a Monte Carlo upper bound") from None
    print(f"H({ns.src}, {ns.dst}) = {result.optimal_cost:.12g}")
    print(f"plan support size = {result.support_size()}")
    return 0


def _cmd_experiment(ns) -> int:
    doc = {}
    if ns.config:
        if not Path(ns.config).exists():
            raise UsageError(f"no such file: {ns.config}")
        with open(ns.config) as f:
            doc = json.load(f)
    overrides = {
        "kind": ns.kind, "width": ns.width, "branches": ns.branches,
        "horizon": ns.horizon, "back_prob": ns.p_back, "n": ns.n,
        "reps": ns.reps, "base_seed": ns.seed,
        "t_list": _int_list(ns.t_list), "h_list": _int_list(ns.h_list),
        "n_list": _int_list(ns.n_list),
        "targets": tuple(ns.targets.split(",")) if ns.targets else None,
        "out": ns.output,
    }
    for key, val in overrides.items():
        if val is not None:
            doc[key] = val
    if "kind" not in doc:
        raise UsageError("experiment kind missing (flag --kind or config file)")
    if doc["kind"] in ("sample-sweep", "regret"):
        # these default to the reference cyclic layered instance
        doc.setdefault("horizon", 120)
        doc.setdefault("back_prob", 0.1)
    try:
        cfg = harness.ExperimentConfig.from_json_dict(doc)
    except TypeError as e:
        raise ConfigError(str(e)) from None
    if not cfg.out:
        raise UsageError("output path missing (-o or config field 'out')")
    rows = harness.run_experiment(cfg)
    harness.write_outputs(cfg, rows, cfg.out)
    print(f"wrote {cfg.out} ({len(rows)} rows)")
    return 0


def _int_list(text):
    if text is None:
        return None
    return tuple(int(x) for x in text.split(","))


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mrplab", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="generate a benchmark MRP file")
    g.add_argument("--family", required=True, choices=("layered", "meeting", "checkout"))
    g.add_argument("--width", type=int, help="states per layer (layered)")
    g.add_argument("--horizon", type=int, help="horizon T (layered, meeting)")
    g.add_argument("--p-back", type=float, default=0.0, help="backward edge probability (layered)")
    g.add_argument("--seed", type=int, help="generator seed (layered)")
    g.add_argument("--branches", type=int, help="number of disjoint chains (meeting)")
    g.add_argument("--meeting-horizon", type=int, help="merge step H (meeting)")
    g.add_argument("--reward-kind", default=GAUSSIAN,
                   choices=(CONSTANT, UNIFORM, GAUSSIAN), help="meeting reward template")
    g.add_argument("--reward-mean", type=float, default=0.0)
    g.add_argument("--reward-sd", type=float, default=1.0)
    g.add_argument("--reward-halfwidth", type=float, default=1.0)
    g.add_argument("--pages", type=int, help="number of pages (checkout)")
    g.add_argument("--click-probs", help="comma list, or one value for all pages (checkout)")
    g.add_argument("--sale-prob", type=float, help="checkout-to-sale probability")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=_cmd_generate)

    a = sub.add_parser("analyze", help="exact values, variances and pooling coefficients")
    a.add_argument("mrp")
    a.add_argument("--state", action="append", help="print a summary for this state (repeatable)")
    a.add_argument("-o", "--output", help="write the full report (.csv or .json)")
    a.set_defaults(func=_cmd_analyze)

    e = sub.add_parser("estimate", help="run the MC/TD estimators on sampled data")
    e.add_argument("mrp")
    e.add_argument("--n", type=int, required=True, help="number of trajectories")
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--method", default="both", choices=("mc", "td", "both"))
    e.add_argument("-o", "--output", help="CSV path (default: stdout)")
    e.set_defaults(func=_cmd_estimate)

    c = sub.add_parser("crossing", help="trajectory crossing time between two states")
    c.add_argument("mrp")
    c.add_argument("--from", dest="src", required=True)
    c.add_argument("--to", dest="dst", required=True)
    c.add_argument("--exact", action="store_true", help="exact transportation solve (default)")
    c.add_argument("--mc", action="store_true", help="Monte Carlo upper bound instead")
    c.add_argument("--n", type=int, default=1000, help="pairs for --mc")
    c.add_argument("--seed", type=int, default=0, help="seed for --mc")
    c.add_argument("--cap", type=int, default=coupling.DEFAULT_ATOM_CAP,
                   help="atom cap for exact enumeration")
    c.set_defaults(func=_cmd_crossing)

    x = sub.add_parser(
        "experiment", help="run a replication sweep to CSV",
        epilog="MRPLAB_THREADS caps worker processes (default: machine "
               "parallelism); results are byte-identical for any value. "
               "sample-sweep and regret default to the cyclic layered "
               "instance (width 5, horizon 120, back-probability 0.1).")
    x.add_argument("--config", help="JSON config mirroring ExperimentConfig fields")
    x.add_argument("--kind", choices=harness.KINDS)
    x.add_argument("--width", type=int)
    x.add_argument("--branches", type=int)
    x.add_argument("--horizon", type=int)
    x.add_argument("--p-back", type=float)
    x.add_argument("--n", type=int)
    x.add_argument("--reps", type=int)
    x.add_argument("--seed", type=int)
    x.add_argument("--t-list", help="comma list of horizons")
    x.add_argument("--h-list", help="comma list of meeting horizons")
    x.add_argument("--n-list", help="comma list of sample sizes")
    x.add_argument("--targets", help="two target states, comma separated")
    x.add_argument("-o", "--output")
    x.set_defaults(func=_cmd_experiment)
    return p


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # --help prints and exits 0
        return int(e.code or 0)
    try:
        return ns.func(ns)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (ConfigError, UnknownStateError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except InvalidSpecError as e:
        print("spec validation failed:", file=sys.stderr)
        for v in e.violations:
            print(f"  {v}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
