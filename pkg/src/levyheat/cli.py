"""levyheat command line.

    levyheat COMMAND [--config PATH] [--set key=value ...] [--out DIR]
                     [--jobs N] [--seed S] [--override-existence-gate]

Exit status: 0 success, 1 validation error, 2 numerical failure, 3 verify FAIL.
"""

import argparse
from importlib import resources
import os
from pathlib import Path
import sys

import numpy as np

from . import analysis as an
from .bounds import c_dab
from .config import dump, load, load_file, with_overrides
from .errors import NumericalError, ValidationError
from .kernel import (KernelHandle, LevySymbolSpec, chapman_kolmogorov_residual,
                     kernel_scaling_residual, total_mass)
from .measure import cloud_header, cloud_rows, fmt, write_csv
from .seeding import replica_rng
from .solver import solve_compensated, solve_noncompensated

COMMANDS = ("kernel-check", "sample-prm", "solve", "moments", "increments", "holder", "bounds",
            "verify", "lyapunov")
KERNEL_TOL = 1e-6


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser():
    p = _Parser(prog="levyheat", description="Stochastic heat equations with Poisson noise.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="scenario file (flat key = value)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key; repeatable")
    p.add_argument("--out", help="output directory (default $LEVYHEAT_OUT or ./levyheat-out)")
    p.add_argument("--jobs", type=int, default=None, help="replica worker processes")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides run.seed)")
    p.add_argument("--override-existence-gate", action="store_true",
                   help="run scenarios that fail existence gating; results are labeled ungated")
    return p


def demo_config():
    return resources.files("levyheat").joinpath("data/demo.cfg").read_text(encoding="utf-8")


def _setup(args):
    if args.config == "demo.cfg" and not Path(args.config).exists():
        scenario, run = load(demo_config().splitlines(), args.set, source="demo.cfg")
    elif args.config:
        scenario, run = load_file(args.config, args.set)
    else:
        scenario, run = load([], args.set, source="defaults")
    if args.seed is not None:
        if args.seed < 0:
            raise ValidationError("--seed must be nonnegative")
        scenario, run = with_overrides(scenario, run, seed=args.seed)
    if args.override_existence_gate:
        scenario, run = with_overrides(scenario, run, override_gate=True)
    out = Path(args.out or os.environ.get("LEVYHEAT_OUT") or "levyheat-out")
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective.cfg").write_text(dump(scenario, run), encoding="utf-8", newline="\n")
    jobs = args.jobs if args.jobs is not None else an.available_jobs()
    if jobs < 1:
        raise ValidationError("--jobs must be at least 1")
    return scenario, run, out, jobs


def _plot(out, name, csv, using, xlabel, ylabel, logscale=False):
    lines = ["set datafile separator ','", f"set xlabel '{xlabel}'", f"set ylabel '{ylabel}'",
             "set key autotitle columnhead"]
    if logscale:
        lines.append("set logscale xy")
    lines.append(f"plot '{csv}' using {using} with linespoints")
    (out / f"{name}.gp").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# commands


def cmd_kernel_check(scenario, run, out, jobs):
    k = KernelHandle(LevySymbolSpec(scenario.alpha, scenario.d))
    rng = replica_rng(run.seed, 0)
    n = 1000
    s = rng.uniform(0.1, 10.0, n)
    t = rng.uniform(0.05, 5.0, n)
    x = rng.uniform(-5.0, 5.0, n) if scenario.d == 1 else rng.uniform(-5.0, 5.0, (n, scenario.d))
    scaling = max(kernel_scaling_residual(k, a, b, y) for a, b, y in zip(s, t, x))
    ck = max(chapman_kolmogorov_residual(k, a, b)
             for a, b in rng.uniform(0.05, 2.0, (20, 2))) if scenario.d == 1 else 0.0
    mass = max(abs(total_mass(k, tt) - 1.0) for tt in (0.01, 0.1, 1.0, 10.0)) if scenario.d == 1 else 0.0
    rows = [["scaling", fmt(scaling)], ["chapman_kolmogorov", fmt(ck)], ["normalization", fmt(mass)]]
    write_csv(out / "kernel_check.csv", ["check", "residual"], rows)
    worst = max(scaling, ck, mass)
    print(f"kernel-check alpha={scenario.alpha} method={k.method} scaling={scaling:.3e} "
          f"ck={ck:.3e} normalization={mass:.3e} max={worst:.3e}")
    if not worst <= KERNEL_TOL:
        raise NumericalError(f"kernel identity residual {worst:.3e} exceeds {KERNEL_TOL}")
    return 0


def cmd_sample_prm(scenario, run, out, jobs):
    cloud = scenario.sample(replica_rng(run.seed, 0))
    write_csv(out / "cloud.csv", cloud_header(scenario.d), cloud_rows(cloud))
    expected = scenario.window().volume * scenario.measure().total_mass
    print(f"sample-prm events={len(cloud)} expected={expected:.6g}")
    return 0


def cmd_solve(scenario, run, out, jobs):
    gated = scenario.gate()
    cloud = scenario.sample(replica_rng(run.seed, 0))
    if scenario.noise == "compensated":
        f = solve_compensated(cloud, scenario.kernel(), scenario.sigma(), scenario.config())
        times, xs, values = f.times, f.xs, f.values
        tail = f"iterations={f.iterations} residual={f.residual:.3e}"
    else:
        sol = solve_noncompensated(cloud, scenario.kernel(), scenario.sigma(), scenario.config())
        nt = max(1, int(round(scenario.T / scenario.dt)))
        nx = max(2, int(round(2 * scenario.L / scenario.dx))) + 1
        times = np.linspace(0.0, scenario.T, nt + 1)
        xs = np.linspace(-scenario.L, scenario.L, nx)
        values = sol.on_lattice(times, xs)
        write_csv(out / "events.csv", cloud_header(scenario.d) + ["u_left"],
                  cloud_rows(cloud, [sol.u_left]))
        tail = "iterations=1 residual=0 (exact event recursion)"
    det = np.asarray(scenario.deterministic(*np.meshgrid(times, xs, indexing="ij")))
    rows = ([fmt(t), fmt(x), fmt(v), fmt(d)]
            for t, row, drow in zip(times, values, det) for x, v, d in zip(xs, row, drow))
    write_csv(out / "field.csv", ["t", "x", "u", "deterministic"], rows)
    _plot(out, "field", "field.csv", "2:3", "x", "u")
    label = "gated" if gated else "ungated"
    print(f"solve noise={scenario.noise} events={len(cloud)} {tail} "
          f"max_dev_from_deterministic={float(np.max(np.abs(values - det))):.3e} {label}")
    return 0


def _p(scenario, run):
    return run.p or scenario.p


def cmd_moments(scenario, run, out, jobs):
    times = np.linspace(0.0, scenario.T, run.n_times)
    est = an.mc_moments(scenario, _p(scenario, run), times, run.x, run.replicas, run.seed, jobs)
    an.write_moments(out / "moments.csv", est)
    _plot(out, "moments", "moments.csv", "1:2", "t", "E|u|^p")
    last = est[-1]
    print(f"moments p={last.p} replicas={run.replicas} t={last.t:.6g} "
          f"moment={last.value:.6g} stderr={last.stderr:.3g}")
    return 0


def _series(scenario, run, jobs):
    return an.increment_series(scenario, run.t1, run.t2, run.x, run.replicas, run.seed, K=run.K,
                               p=_p(scenario, run), jobs=jobs)


def _report(scenario, run, jobs):
    if _p(scenario, run) != scenario.p:
        raise ValidationError(f"analytic bounds exist for p={scenario.p} with {scenario.noise} noise")
    series = _series(scenario, run, jobs)
    norm = run.norm if run.norm is not None else series.norm.value
    bounds = an.scenario_bounds(scenario, run.t1, series.lags, norm)
    return series, an.continuity_verdict(series, bounds), norm


def cmd_increments(scenario, run, out, jobs):
    series, report, norm = _report(scenario, run, jobs)
    report.write(out / "increments.csv")
    _plot(out, "increments", "increments.csv", "1:2", "lag", "E|increment|^p", logscale=True)
    print(f"increments p={series.p} lags={len(series.lags)} replicas={run.replicas} "
          f"norm={norm:.6g} dominated={report.dominated} trend={report.trend}")
    return 0


def cmd_holder(scenario, run, out, jobs):
    series = _series(scenario, run, jobs)
    fit = an.holder_exponent(series)
    write_csv(out / "holder.csv", ["lag", "estimate", "stderr"],
              [[fmt(h), fmt(e), fmt(s)] for h, e, s in zip(series.lags, series.estimates, series.stderrs)])
    write_csv(out / "holder_fit.csv", ["quantity", "value"],
              [["slope", fmt(fit.slope)], ["band", fmt(fit.band)], ["points", str(fit.points)],
               ["exponent", fmt(fit.exponent) if fit.exponent is not None else "none"],
               ["verdict", fit.verdict]])
    _plot(out, "holder", "holder.csv", "1:2", "lag", "E|increment|^p", logscale=True)
    print(f"holder slope={fit.slope:.6g} band={fit.band:.3g} verdict={fit.verdict}")
    return 0


def cmd_bounds(scenario, run, out, jobs):
    if run.norm is not None:
        norm = run.norm
    else:
        norm = _series(scenario, run, jobs).norm.value
    b = an.scenario_bounds(scenario, run.t1, [run.t2 - run.t1], norm)[0]
    b.write(out / "bounds.csv")
    parts = " ".join(f"{k}={v:.6g}" for k, v in b.parts.items())
    extra = ""
    try:
        c = c_dab(scenario.d, scenario.alpha, scenario.beta, scenario.envelope())
        extra = f" C_dab={c:.6g} contraction={scenario.contraction():.6g}"
    except ValidationError:
        pass
    print(f"bounds {parts} total={b.total:.6g} norm={norm:.6g}{extra}")
    return 0


def cmd_verify(scenario, run, out, jobs):
    series, report, norm = _report(scenario, run, jobs)
    report.write(out / "verify.csv")
    _plot(out, "verify", "verify.csv", "1:2", "lag", "E|increment|^p", logscale=True)
    print(f"verify p={series.p} replicas={run.replicas} dominated={report.dominated} "
          f"trend={report.trend} verdict={report.verdict}")
    return 0 if report.verdict == "PASS" else 3


def cmd_lyapunov(scenario, run, out, jobs):
    times = np.linspace(0.0, scenario.T, run.n_times)
    est = an.lyapunov_proxy(scenario, _p(scenario, run), run.x, times, run.replicas, run.seed,
                            run.tail_fraction, jobs)
    an.write_moments(out / "lyapunov.csv", est.moments)
    write_csv(out / "lyapunov_fit.csv", ["quantity", "value"],
              [["slope", fmt(est.slope)], ["stderr", fmt(est.stderr)], ["label", est.label]])
    _plot(out, "lyapunov", "lyapunov.csv", "1:(log($2))", "t", "ln E|u|^p")
    print(f"lyapunov slope={est.slope:.6g} stderr={est.stderr:.3g} ({est.label})")
    return 0


HANDLERS = {
    "kernel-check": cmd_kernel_check, "sample-prm": cmd_sample_prm, "solve": cmd_solve,
    "moments": cmd_moments, "increments": cmd_increments, "holder": cmd_holder,
    "bounds": cmd_bounds, "verify": cmd_verify, "lyapunov": cmd_lyapunov,
}


def run(argv=None):
    try:
        args = build_parser().parse_args(argv)
        scenario, params, out, jobs = _setup(args)
        return HANDLERS[args.command](scenario, params, out, jobs)
    except ValidationError as exc:
        print(f"levyheat: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"levyheat: numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"levyheat: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
