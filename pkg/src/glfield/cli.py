"""Command-line front end: ``glfield <subcommand> --config cfg.json ...``.

Exit codes: 0 success, 1 engine error, 2 configuration or precondition
error, 3 a verification check failed (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from glfield import io, plotting, studies
from glfield.errors import ConfigError, DomainError, GLFieldError, KindError, PreconditionError
from glfield.field import solve_neural_field
from glfield.network import load_config, serialize
from glfield.ph import solve_ph_fixed_point
from glfield.rmf import default_jobs, simulate_rmf

STUDIES = ("poc", "tlln", "tail", "chenstein", "lln-k")


def _jobs(args) -> int:
    if os.environ.get("GLFIELD_JOBS"):
        return default_jobs()
    return args.jobs or default_jobs()


def _setup(args):
    spec, run = load_config(args.config)
    if args.seed is not None:
        run = run.replace(seed=args.seed)
    out = Path(args.out_dir)
    dirs = io.output_dirs(out)
    (out / "config.json").write_text(serialize(spec, run))
    manifest = io.ExperimentManifest(args.command, str(args.config), run.seed)
    return spec, run, out, dirs, manifest


def cmd_simulate_rmf(args) -> int:
    spec, run, out, dirs, manifest = _setup(args)
    if args.trials is not None:
        run = run.replace(trials=args.trials)
    threshold = getattr(args, "threshold", None)
    results = simulate_rmf(spec, run, threshold=threshold, jobs=_jobs(args))
    io.write_sites(dirs["logs"] / "sites.csv", spec.sites(run.K))
    n_events = 0
    for r in results:
        tag = f"{r.trial:04d}"
        io.write_event_log(dirs["logs"] / f"events_{tag}.csv", r.log)
        io.write_routing(dirs["logs"] / f"routing_{tag}.csv", r.log)
        io.write_trajectory(dirs["logs"] / f"trajectory_{tag}.csv", r.sample_times, r.lam)
        n_events += len(r.log)
    manifest.write(out)
    print(f"{len(results)} trials, {n_events} events -> {out}")
    return 0


def cmd_simulate_rmf_threshold(args) -> int:
    return cmd_simulate_rmf(args)


def _write_solution(rates, report, dirs, name, title):
    rates.to_csv(dirs["fields"] / f"{name}.csv")
    (dirs["reports"] / "fixed_point.json").write_text(report.to_json())
    plotting.plot_rate_field(rates, dirs["plots"] / f"{name}.svg", title=title)


def cmd_solve_ph(args) -> int:
    spec, run, out, dirs, manifest = _setup(args)
    rates, report = solve_ph_fixed_point(spec, run, args.iterations, args.trials or 10_000,
                                         alpha=args.alpha, jobs=_jobs(args))
    _write_solution(rates, report, dirs, "rates", "Poisson-hypothesis mean rates")
    manifest.write(out)
    print(f"converged={report.converged} deltas={[round(d, 6) for d in report.deltas]}")
    return 0


def cmd_solve_field(args) -> int:
    spec, run, out, dirs, manifest = _setup(args)
    sol = solve_neural_field(spec, run, Q=args.nodes, n_iter=args.iterations,
                             trials_per_iter=args.trials or 10_000, alpha=args.alpha, jobs=_jobs(args))
    _write_solution(sol.rates, sol.report, dirs, "field", "neural field mean rates")
    io.write_rows(dirs["fields"] / "weights.csv",
                  [{"x": float(x), "q": float(q)} for x, q in zip(sol.rates.sites, sol.weights)])
    manifest.write(out)
    print(f"converged={sol.report.converged} deltas={[round(d, 6) for d in sol.report.deltas]}")
    return 0


def _verify(args, spec, run, dirs):
    jobs = _jobs(args)
    kw = {"jobs": jobs}
    plots = dirs["plots"]
    if args.study == "poc":
        if args.trials:
            kw["n_samples"] = args.trials
        if args.iterations:
            kw["ph_iter"] = args.iterations
        if args.fp_trials:
            kw["ph_trials"] = args.fp_trials
        st = studies.poc_scaling_study(spec, run, **kw)
        rep = studies.poc_report(st)
        plotting.plot_scaling(st.M_list, [e.value for e in st.tv], st.fit, plots / "poc_tv.svg", "M",
                              "TV distance", ci=[e.ci for e in st.tv], ref_slope=-0.5)
    elif args.study == "tlln":
        if args.trials:
            kw["trials"] = args.trials
        fit = studies.tlln_study(spec, run, **kw)
        rep = studies.tlln_report(fit)
        plotting.plot_scaling(fit.x, fit.y, fit, plots / "tlln.svg", "M", "TLLN metric", ref_slope=-0.5)
    elif args.study == "tail":
        if args.trials:
            kw["n_samples"] = args.trials
        lam, rows = studies.tail_study(spec, run, **kw)
        rep = studies.tail_report(rows)
        plotting.plot_tail(lam, rows, plots / "tail.svg")
    elif args.study == "chenstein":
        if args.trials:
            kw["trials"] = args.trials
        terms, fit = studies.chenstein_study(spec, run, **kw)
        rep = studies.chenstein_report(terms, fit)
        if fit is not None:
            plotting.plot_scaling(fit.x, fit.y, fit, plots / "chenstein.svg", "M", "term1 + term2",
                                  ref_slope=-0.5)
    else:
        if args.trials:
            kw["trials"] = args.trials
        if args.iterations:
            kw["n_iter"] = args.iterations
        if args.fp_trials:
            kw["field_trials"] = args.fp_trials
        st = studies.lln_k_study(spec, run, **kw)
        rep = studies.lln_k_report(st)
        rows = st.aggregate.rows()
        io.write_rows(dirs["logs"] / "lln_k.csv", rows)
        (dirs["reports"] / "lln_k_conditions.json").write_text(json.dumps(st.conditions, indent=2))
        st.solution.rates.to_csv(dirs["fields"] / "field.csv")
        K = [r["K"] for r in rows]
        err = [max(r["abs_err"], 1e-300) for r in rows]
        plotting.plot_scaling(K, err, None, plots / "lln_k_error.svg", "K", "|E A^K - target|",
                              ref_slope=-1.0)
        if st.fit is not None:
            plotting.plot_scaling(K, st.fit.y, st.fit, plots / "lln_k_variance.svg", "K", "Var A^K",
                                  ref_slope=-1.0)
    return rep


def cmd_verify(args) -> int:
    spec, run, out, dirs, manifest = _setup(args)
    rep = _verify(args, spec, run, dirs)
    name = args.study.replace("-", "_")
    (dirs["reports"] / f"verify_{name}.json").write_text(rep.to_json())
    manifest.write(out)
    for c in rep.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: metric={c.metric:.6g} "
              f"bound_or_slope={c.bound_or_slope:.6g} tol={c.tolerance:.3g}")
    return 0 if rep.passed else 3


def cmd_grid_info(args) -> int:
    spec, run = load_config(args.config)
    levels = args.levels or run.K
    grids = spec.grids(levels)
    info = {"domain": [spec.domain.lo, spec.domain.hi], "anchor": grids.anchor,
            "levels": [{"K": k, "fill_distance": grids.fill_distance(k),
                        "new_point": float(grids.points[k - 1])} for k in range(1, levels + 1)]}
    print(json.dumps(info, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="glfield", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", required=True, help="JSON configuration file")
        if out:
            sp.add_argument("--seed", type=int, help="override run.seed")
            sp.add_argument("--out-dir", default="out", help="output directory (default: out)")
            sp.add_argument("--jobs", type=int, help="worker threads (GLFIELD_JOBS overrides)")
        return sp

    s = common(sub.add_parser("simulate-rmf", help="exact replica-mean-field simulation"))
    s.add_argument("--threshold", type=float, help="reset level C (threshold variant)")
    s.add_argument("--trials", type=int, help="override run.trials")
    s.set_defaults(func=cmd_simulate_rmf)

    s = common(sub.add_parser("simulate-rmf-threshold", help="threshold replica-mean-field simulation"))
    s.add_argument("--threshold", type=float, required=True, help="reset level C")
    s.add_argument("--trials", type=int, help="override run.trials")
    s.set_defaults(func=cmd_simulate_rmf_threshold)

    for name, func, what in (("solve-ph", cmd_solve_ph, "Poisson-hypothesis fixed point"),
                             ("solve-field", cmd_solve_field, "neural-field fixed point")):
        s = common(sub.add_parser(name, help=what))
        s.add_argument("--iterations", type=int, default=8, help="Picard iterations (default 8)")
        s.add_argument("--trials", type=int, help="Monte Carlo trials per iteration (default 10000)")
        s.add_argument("--alpha", type=float, default=0.5, help="damping (default 0.5)")
        if name == "solve-field":
            s.add_argument("--nodes", type=int, default=17, help="quadrature nodes Q (default 17)")
        s.set_defaults(func=func)

    s = common(sub.add_parser("verify", help="run a verification study"))
    s.add_argument("--study", required=True, choices=STUDIES)
    s.add_argument("--trials", type=int, help="study sample size (meaning depends on the study)")
    s.add_argument("--iterations", type=int, help="fixed-point iterations")
    s.add_argument("--fp-trials", type=int, help="trials per fixed-point iteration")
    s.set_defaults(func=cmd_verify)

    s = common(sub.add_parser("grid-info", help="print the nested grids D_K"), out=False)
    s.add_argument("--levels", type=int, help="number of grid levels (default run.K)")
    s.set_defaults(func=cmd_grid_info)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "iterations", None) is not None and args.iterations < 1:
        print("error: --iterations must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, PreconditionError, DomainError, KindError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GLFieldError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
