"""``freqflux`` command line: thin wiring from JSON inputs to CSV outputs.

Exit codes: 0 ok, 2 usage, 3 bad input, 4 numerical failure, 5 I/O error.
Every file is written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .aggregation import SubnetSpec, aggregation_experiment
from .coi import weights_for
from .diagnostics import WeightedSource, dominance_analysis, lindeberg_ratio, normality_report
from .dynsim import compare_estimators, parse_event, simulate
from .errors import InputError, NumericalError
from .netmodel import load_case, resolve_case
from .powerflow import solve_power_flow
from .sensitivity import sensitivities_at, simplified_at
from .stochastic import load_scenario, monte_carlo, scenario_map, simulate_path

log = logging.getLogger("freqflux")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4, 5


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    write_atomic(path, buf.getvalue())
    log.info("wrote %s", path)
    return path


def write_matrix(path: Path, corner, labels, mat):
    header = [corner] + [str(b) for b in labels]
    return write_csv(path, header, ([lab, *row] for lab, row in zip(labels, mat)))


def _load_net(ref):
    return load_case(resolve_case(ref))


# subcommands --------------------------------------------------------------


def cmd_solve_pf(args):
    net = _load_net(args.case)
    op = solve_power_flow(net)
    rows = zip(net.bus_ids, op.v, np.degrees(op.theta), op.p, op.q)
    write_csv(args.out / "pf.csv", ["bus", "v_pu", "theta_deg", "p_pu", "q_pu"], rows)
    print(f"converged in {op.meta['iterations']} iterations, mismatch {op.meta['mismatch']:.2e} pu")


def cmd_sensitivities(args):
    net = _load_net(args.case)
    ids = net.bus_ids
    if args.simplified:
        sw = simplified_at(net)
        h, k, meta = sw.H, sw.K, {"form": "simplified", **sw.meta}
    else:
        sens = sensitivities_at(net, solve_power_flow(net))
        h, k, meta = sens.H, sens.K, {"form": "full", **sens.meta}
    write_matrix(args.out / "H.csv", "H[rad/s per pu/s]", ids, h)
    write_matrix(args.out / "K.csv", "K[rad/s per pu/s]", ids, k)
    rows = [(key, val) for key, val in meta.items() if np.isscalar(val)]
    write_csv(args.out / "sensitivities_meta.csv", ["key", "value"], rows)


def cmd_coi_weights(args):
    net = _load_net(args.case)
    w = weights_for(net)
    rows = [*zip(net.bus_ids, w.c), ("alpha", w.alpha)]
    write_csv(args.out / "coi_weights.csv", ["bus", "c_pu_per_pu"], rows)


def _simulate_inputs(args):
    """A ``simulate`` target is either a case file or a scenario with events."""
    path = resolve_case(args.case)
    doc = _read_json(path)
    if "buses" in doc:
        return load_case(path), list(args.event or []), args.dt, args.tend
    if "case" not in doc:
        raise InputError(f"{path}: neither a case nor a simulation scenario")
    net = load_case(resolve_case(doc["case"], path.parent))
    events = list(args.event or doc.get("events", []))
    dt = args.dt if args.dt is not None else float(doc.get("dt", 0.005))
    tend = args.tend if args.tend is not None else float(doc.get("t_end", 40.0))
    return net, events, dt, tend


def cmd_simulate(args):
    net, event_specs, dt, tend = _simulate_inputs(args)
    events = [parse_event(e, net) for e in event_specs]
    op = solve_power_flow(net)
    traj = simulate(net, events, dt=dt if dt is not None else 0.005, t_end=tend if tend is not None else 40.0, op=op)
    ids = net.bus_ids
    mids = [ids[m.bus] for m in net.machines]
    header = ["t_s", "omega_coi_true_pu", "omega_coi_est_full_pu", "omega_coi_est_simplified_pu", "kinetic_energy_pu_s"]
    header += [f"omega_g{b}_pu" for b in mids] + [f"delta_g{b}_rad" for b in mids]
    for name, unit in (("v", "pu"), ("theta", "rad"), ("p", "pu"), ("q", "pu"), ("omega_bus", "pu")):
        header += [f"{name}{b}_{unit}" for b in ids]
    cols = [
        traj.t[:, None],
        traj.omega_coi_true[:, None],
        traj.omega_coi_est_full[:, None],
        traj.omega_coi_est_simplified[:, None],
        traj.kinetic_energy[:, None],
        traj.omega_g,
        traj.delta,
        traj.v,
        traj.theta,
        traj.p,
        traj.q,
        traj.omega_bus,
    ]
    write_csv(args.out / "trajectory.csv", header, np.hstack(cols))
    rep = compare_estimators(traj, net, op)
    write_csv(
        args.out / "estimator_errors.csv",
        ["estimator", "rms_error_pu", "max_error_pu"],
        [("full", rep.rms_full, rep.max_full), ("simplified", rep.rms_simplified, rep.max_simplified)],
    )
    print(f"rms error full {rep.rms_full:.3e} pu, simplified {rep.rms_simplified:.3e} pu")


def _scenario(args):
    sc = load_scenario(resolve_case(args.scenario))
    if args.seed is not None:
        from dataclasses import replace

        sc = replace(sc, base_seed=args.seed)
    return sc


def _moment_rows(label, mom):
    return [
        (label, "n", mom.n),
        (label, "mean_pu", mom.mean),
        (label, "variance_pu2", mom.variance),
        (label, "skewness", mom.skewness),
        (label, "excess_kurtosis", mom.excess_kurtosis),
    ]


def cmd_montecarlo(args):
    sc = _scenario(args)
    ens = monte_carlo(sc, threads=args.threads)
    keys = list(ens.summaries[0])
    unit = {"mean": "_pu", "var": "_pu2"}
    write_csv(args.out / "mc_paths.csv", [k + unit.get(k.rsplit("_", 1)[-1], "") for k in keys],
              ([s[k] for k in keys] for s in ens.summaries))
    write_csv(args.out / "mc_d_omega.csv", ["d_omega_coi_pu"], ([x] for x in ens.d_omega))
    rows = _moment_rows("d_omega", ens.moments_d_omega) + _moment_rows("omega_dev", ens.moments_omega)
    write_csv(args.out / "mc_moments.csv", ["series", "statistic", "value"], rows)
    m = ens.moments_d_omega
    print(f"{sc.n_paths} paths, {m.n} increments, skew {m.skewness:.4f}, excess kurtosis {m.excess_kurtosis:.4f}")


def _stats_rows(label, rep):
    return [(label, k, v) for k, v in rep.as_rows()]


def _lindeberg_rows(label, res):
    return [
        (label, "epsilon", res.epsilon),
        (label, "ratio", res.ratio),
        (label, "threshold", res.threshold),
        (label, "passed", res.passed),
        (label, "varsigma_pu", res.varsigma),
    ]


def _clt_subnet(args, doc, base_dir):
    sub = dict(doc["subnet"])
    valid = {f.name for f in fields(SubnetSpec)}
    unknown = set(sub) - valid
    if unknown:
        raise InputError(f"unknown subnet fields: {sorted(unknown)}")
    for key in ("r_range", "x_range"):
        if key in sub:
            sub[key] = tuple(sub[key])
    if args.seed is not None:
        sub["seed"] = args.seed
    elif "base_seed" in doc:
        sub.setdefault("seed", int(doc["base_seed"]))
    net = load_case(resolve_case(doc.get("case", "ieee14.json"), base_dir))
    res = aggregation_experiment(net, SubnetSpec(**sub))
    rows = _lindeberg_rows("uniform", res.lindeberg_uniform)
    stats_rows = _stats_rows("uniform", res.uniform)
    if res.dominant is not None:
        rows += _lindeberg_rows("dominant", res.lindeberg_dominant)
        stats_rows += _stats_rows("dominant", res.dominant)
    write_csv(args.out / "clt_lindeberg.csv", ["case", "quantity", "value"], rows)
    write_csv(args.out / "clt_stats.csv", ["case", "statistic", "value"], stats_rows)
    shares = res.weights**2 / np.sum(res.weights**2)
    write_csv(args.out / "clt_dominance.csv", ["source", "weight_pu_per_pu", "equal_variance_share"],
              ((f"load{i}", w, s) for i, (w, s) in enumerate(zip(res.weights, shares))))
    for label, rep, lind in (("uniform", res.uniform, res.lindeberg_uniform), ("dominant", res.dominant, res.lindeberg_dominant)):
        if rep is not None:
            print(f"{label}: Lindeberg ratio {lind.ratio:.4f} ({'pass' if lind.passed else 'fail'}), "
                  f"JB p {rep.jb_pvalue:.3g}, excess kurtosis {rep.excess_kurtosis:.3f}")


def cmd_clt_check(args):
    path = resolve_case(args.scenario)
    doc = _read_json(path)
    if "subnet" in doc:
        return _clt_subnet(args, doc, path.parent)
    sc = _scenario(args)
    pmap = scenario_map(sc)
    paths = [simulate_path(sc, pmap, i) for i in range(sc.n_paths)]
    incs = np.vstack([p.increments for p in paths])
    w = pmap.source_weights(sc.noise)
    labels = paths[0].labels
    ids = sc.network.bus_ids
    sources = [WeightedSource(f"bus{ids[b]}:{c}", w[j], sample=incs[:, j]) for j, (b, c) in enumerate(labels)]
    res = lindeberg_ratio(sources, epsilon=args.epsilon)
    rows = dominance_analysis(pmap, sc.noise, variances=incs.var(axis=0))
    write_csv(
        args.out / "clt_dominance.csv",
        ["source", "weight_pu_per_pu", "variance_pu2", "share", "skew_sign"],
        ((f"bus{ids[r.bus]}:{r.component}", r.weight, r.variance, r.share, r.skew_sign) for r in rows),
    )
    write_csv(args.out / "clt_lindeberg.csv", ["case", "quantity", "value"], _lindeberg_rows("scenario", res))
    print(f"Lindeberg ratio {res.ratio:.4f} ({'pass' if res.passed else 'fail'}); top source bus{ids[rows[0].bus]}:{rows[0].component}")


def _read_sample(path, column):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if column is None:
                idx = 0
            elif column in header:
                idx = header.index(column)
            else:
                raise InputError(f"{path}: no column {column!r}")
            values = [float(row[idx]) for row in reader if row]
    except FileNotFoundError:
        raise InputError(f"sample file not found: {path}") from None
    except (ValueError, IndexError, StopIteration) as exc:
        raise InputError(f"{path}: unreadable sample ({exc})") from None
    return np.array(values)


def cmd_stats(args):
    x = _read_sample(args.sample, args.column)
    rep = normality_report(x, bins=args.bins)
    write_csv(args.out / "stats.csv", ["statistic", "value"], rep.as_rows())
    write_csv(args.out / "qq.csv", ["theoretical_std_normal", "empirical_sample_units"], zip(rep.qq_theoretical, rep.qq_empirical))
    write_csv(args.out / "histogram.csv", ["bin_left", "bin_right", "count"],
              zip(rep.hist_edges[:-1], rep.hist_edges[1:], rep.hist_counts))
    print(f"n {rep.n}, skew {rep.skewness:.4f}, excess kurtosis {rep.excess_kurtosis:.4f}, JB p {rep.jb_pvalue:.3g}")


def _read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


# parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
    common.add_argument("--threads", type=int, default=1, help="cap on Monte-Carlo worker threads")
    common.add_argument("--seed", type=int, default=None, help="override the scenario base seed (u64)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="freqflux", description="Propagation of power injections to bus and CoI frequencies.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve-pf", parents=[common], help="Newton-Raphson power flow")
    s.add_argument("case")
    s.set_defaults(func=cmd_solve_pf)

    s = sub.add_parser("sensitivities", parents=[common], help="H and K sensitivity matrices")
    s.add_argument("case")
    s.add_argument("--simplified", action="store_true", help="short-circuit (no-load) approximation")
    s.set_defaults(func=cmd_sensitivities)

    s = sub.add_parser("coi-weights", parents=[common], help="CoI weights c and offset alpha")
    s.add_argument("case")
    s.set_defaults(func=cmd_coi_weights)

    s = sub.add_parser("simulate", parents=[common], help="time-domain simulation with load events")
    s.add_argument("case", help="case file, or a scenario file with events")
    s.add_argument("--event", action="append", help="e.g. ramp:bus=4,rate=0.1,t0=10,dur=10 (repeatable)")
    s.add_argument("--dt", type=float, default=None, help="step in s (default 0.005)")
    s.add_argument("--tend", type=float, default=None, help="end time in s (default 40)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("montecarlo", parents=[common], help="stochastic ensemble from a scenario")
    s.add_argument("scenario")
    s.set_defaults(func=cmd_montecarlo)

    s = sub.add_parser("clt-check", parents=[common], help="Lindeberg ratio and dominance table")
    s.add_argument("scenario")
    s.add_argument("--epsilon", type=float, default=0.1)
    s.set_defaults(func=cmd_clt_check)

    s = sub.add_parser("stats", parents=[common], help="normality report for a CSV sample")
    s.add_argument("sample")
    s.add_argument("--column", default=None, help="column name (default: first)")
    s.add_argument("--bins", type=int, default=50)
    s.set_defaults(func=cmd_stats)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"freqflux: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.threads < 1:
        print("freqflux: usage error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("freqflux: usage error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        args.func(args)
    except InputError as exc:
        print(f"freqflux: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"freqflux: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"freqflux: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main():
    sys.exit(run())
