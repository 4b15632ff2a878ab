"""Command-line entry point: ``gvc-randlab <subcommand> [flags]``.

Any flag can also come from ``--config FILE``, a plain ``key=value`` file
whose keys are the long flag names (``muf=0.005``, ``n=200``...).  Flags
given on the command line win over the file.  ``GVC_RANDLAB_SEED`` sets
the default seed.

Exit status is 0 only when every requested computation and cross-check
passed, 1 when a check failed, 2 for invalid input.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analytics, experiments, oracle
from .io import (
    IngestError,
    fmt,
    ingest_table,
    measure_empirical,
    svg_scatter,
    write_csv,
    write_json,
    write_svg,
)
from .measures import MeasureError, true_measures
from .model import Disorder, ModelError, ModelParams, ViolationPolicy, build_pair, instance_rng, sample_table

log = logging.getLogger("gvc_randlab")

FORMATS = {"csv", "json", "svg"}
SCATTER_KINDS = [k.value for k in experiments.RECORD_KINDS]


class UsageError(Exception):
    pass


def _float_list(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _int_list(text):
    out = []
    for t in str(text).split(","):
        t = t.strip()
        if not t:
            continue
        if ":" in t:
            a, b = t.split(":")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(t))
    return out


def _formats(text):
    got = {t.strip() for t in str(text).split(",") if t.strip()}
    bad = got - FORMATS
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s) {sorted(bad)}; choose from {sorted(FORMATS)}")
    return got


def read_config(path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _model_flags(p, n=100, mu=1.0, muf=0.1):
    p.add_argument("--n", type=int, default=n, help="number of sectors N")
    p.add_argument("--mu", type=float, default=mu, help="rate of flow entries (mean 1/mu)")
    p.add_argument("--muf", type=float, default=muf, help="rate of final demand (mean 1/mu_f)")
    p.add_argument("--disorder", choices=[d.value for d in Disorder], default="exp")
    p.add_argument("--mu-prime", type=float, default=1.0, help="log-normal flows: log-mean")
    p.add_argument("--sigma", type=float, default=1.0, help="log-normal flows: log-sd")
    p.add_argument("--muf-prime", type=float, default=6.67, help="log-normal demand: log-mean")
    p.add_argument("--sigma-f", type=float, default=1.0, help="log-normal demand: log-sd")
    p.add_argument("--sparsity", type=float, default=0.0, help="probability a flow entry is zero")
    p.add_argument("--instances", type=int, default=1000, help="ensemble size m")
    p.add_argument("--sector", type=int, default=7, help="tracked sector, 1-based")
    p.add_argument("--policy", choices=[v.value for v in ViolationPolicy], default="flag",
                   help="what to do with draws having negative value added")
    p.add_argument("--preset", choices=sorted(experiments.PRESETS), help="named reference configuration")


def _common_flags(p, formats="csv,json"):
    p.add_argument("--config", help="key=value file of defaults")
    p.add_argument("--seed", type=int, default=int(os.environ.get("GVC_RANDLAB_SEED", "0")))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--format", type=_formats, default=formats, help="comma list of csv,json,svg")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gvc-randlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (("simulate", "run an ensemble and write per-instance records"),
                        ("scatter", "fit a scatter between two measures of an ensemble")):
        p = sub.add_parser(name, help=help_)
        _model_flags(p)
        _common_flags(p, "csv,json,svg" if name == "scatter" else "csv,json")
        if name == "scatter":
            p.add_argument("--x", choices=SCATTER_KINDS, default="U1")
            p.add_argument("--y", choices=SCATTER_KINDS, default="D1")

    p = sub.add_parser("sparsity", help="(U1, D1) slope as flow entries are zeroed")
    _model_flags(p, n=200, muf=0.005)
    _common_flags(p)
    p.add_argument("--sparsities", type=_float_list, default="0,0.08,0.3")

    p = sub.add_parser("analytic", help="closed-form moments, C_N and slope on a grid")
    p.add_argument("--n", type=_int_list, default="200", help="comma list; a:b ranges allowed")
    p.add_argument("--mu", type=_float_list, default="1")
    p.add_argument("--muf", type=_float_list, default="0.001")
    p.add_argument("--preset", choices=["table1", "curve"])
    _common_flags(p, "csv")

    p = sub.add_parser("table1", help="Monte Carlo vs analytic covariance rows")
    p.add_argument("--instances", type=int, default=10_000)
    p.add_argument("--sector", type=int, default=7)
    p.add_argument("--rows", help="semicolon list of mu,muf,n triples (default: the five reference rows)")
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--z-max", type=float, default=5.0)
    _common_flags(p)

    p = sub.add_parser("curve", help="C_N for N = 1..n_max")
    p.add_argument("--n-max", type=int, default=500)
    p.add_argument("--pairs", help="semicolon list of mu,muf pairs (default: the four legend pairs)")
    _common_flags(p, "csv")

    p = sub.add_parser("oracle-check", help="quadrature, Monte Carlo and Neumann cross-checks")
    p.add_argument("--tolerance", type=float, help="override every relative tolerance")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--z-max", type=float, default=4.0)
    p.add_argument("--k", type=_int_list, default="2,3,5,11,51,101,201,401,502")
    _common_flags(p, "csv")

    p = sub.add_parser("ingest", help="validate an empirical I-O table")
    p.add_argument("path")
    p.add_argument("--table-format", default="csv")
    p.add_argument("--rtol", type=float, default=1e-6)
    _common_flags(p, "json")

    p = sub.add_parser("measure", help="U1, D1 and rank-1 estimators of an empirical table")
    p.add_argument("path")
    p.add_argument("--table-format", default="csv")
    p.add_argument("--rtol", type=float, default=1e-6)
    _common_flags(p)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = read_config(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
        known = {a.dest for a in subparser._actions}  # noqa: SLF001
        unknown = sorted(set(values) - known)
        if unknown:
            raise UsageError(f"{args.config}: unknown key(s) {unknown} for '{args.command}'")
        subparser.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


# -- helpers -----------------------------------------------------------------


def _spec_from_args(args) -> experiments.EnsembleSpec:
    if args.preset:
        if args.preset not in experiments.PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {sorted(experiments.PRESETS)}")
        spec = experiments.PRESETS[args.preset]
        return replace(spec, params=replace(spec.params, seed=args.seed), policy=args.policy)
    params = ModelParams(
        n_sectors=args.n,
        mu=args.mu,
        mu_f=args.muf,
        disorder=args.disorder,
        mu_prime=args.mu_prime,
        sigma=args.sigma,
        mu_f_prime=args.muf_prime,
        sigma_f=args.sigma_f,
        sparsity=args.sparsity,
        seed=args.seed,
    )
    return experiments.EnsembleSpec(params, args.instances, args.sector - 1, args.policy)


def _params_meta(spec: experiments.EnsembleSpec) -> dict:
    p = spec.params
    meta = {
        "n": p.n_sectors,
        "disorder": p.disorder.value,
        "sparsity": p.sparsity,
        "seed": p.seed,
        "instances": spec.instances,
        "sector": spec.sector_index + 1,
        "sector_indexing": "1-based",
        "policy": spec.policy.value,
    }
    if p.disorder is Disorder.LOGNORMAL:
        meta.update(mu_prime=p.mu_prime, sigma=p.sigma, mu_f_prime=p.mu_f_prime, sigma_f=p.sigma_f)
    else:
        meta.update(mu=p.mu, mu_f=p.mu_f)
    return meta


def _records_rows(rec):
    for k in range(len(rec)):
        yield rec.instance[k], rec.u1[k], rec.d1[k], rec.u_tilde[k], rec.d_tilde[k], rec.violations[k]


RECORDS_HEADER = ["instance", "U1", "D1", "U_tilde", "D_tilde", "violations"]


# -- subcommands ---------------------------------------------------------------


def _fit_or_none(x, y, label):
    try:
        return experiments.fit_scatter(x, y)
    except experiments.ExperimentError as exc:
        log.warning("%s: %s", label, exc)
        return None


def _describe(label, fit):
    if fit is None:
        return f"{label}: no fit (zero variance)"
    return f"{label}: slope {fit.ols_slope:.4f}, r {fit.pearson_r:.4f}"


def cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    out = Path(args.out)
    rec = experiments.run_ensemble(spec, args.workers)
    true_fit = _fit_or_none(rec.u1, rec.d1, "U1 vs D1")
    rank1_fit = _fit_or_none(rec.u_tilde, rec.d_tilde, "U~ vs D~")
    if "csv" in args.format:
        write_csv(out / "records.csv", RECORDS_HEADER, _records_rows(rec))
    summary = {
        "params": _params_meta(spec),
        "U1_vs_D1": true_fit and true_fit.summary(),
        "U_tilde_vs_D_tilde": rank1_fit and rank1_fit.summary(),
        "instances_with_violations": int(np.count_nonzero(rec.violations)),
        "rejections": rec.rejections,
        "excluded_instances": list(rec.failed),
    }
    if "json" in args.format:
        write_json(out / "summary.json", summary)
    if "svg" in args.format:
        svg = svg_scatter(
            [("(U1, D1)", rec.u1, rec.d1, "#1f77b4"), ("(U~, D~)", rec.u_tilde, rec.d_tilde, "#d62728")],
            f"sector {spec.sector_index + 1}, N={spec.params.n_sectors}",
            "upstreamness",
            "downstreamness",
        )
        write_svg(out / "scatter.svg", svg)
    print(f"{_describe('U1 vs D1', true_fit)}; {_describe('U~ vs D~', rank1_fit)}")
    return 0


def cmd_scatter(args) -> int:
    spec = _spec_from_args(args)
    out = Path(args.out)
    rec = experiments.run_ensemble(spec, args.workers)
    fit = experiments.scatter_uv(spec, args.x, args.y, records=rec)
    if "csv" in args.format:
        write_csv(out / "scatter.csv", ["instance", args.x, args.y],
                  zip(rec.instance, rec.column(args.x), rec.column(args.y)))
    if "json" in args.format:
        write_json(out / "scatter.json", {"params": _params_meta(spec), "x": args.x, "y": args.y, **fit.summary()})
    if "svg" in args.format:
        write_svg(out / "scatter.svg",
                  svg_scatter([(f"({args.x}, {args.y})", fit.x, fit.y, "#1f77b4")],
                              f"sector {spec.sector_index + 1}", args.x, args.y))
    print(f"{args.y} on {args.x}: slope {fit.ols_slope:.4f}, intercept {fit.ols_intercept:.4f}, "
          f"r {fit.pearson_r:.4f}")
    return 0


def cmd_sparsity(args) -> int:
    spec = _spec_from_args(args)
    points = experiments.sparsity_sweep(spec, args.sparsities, args.workers)
    rows = [(p.sparsity, p.scatter.ols_slope, p.scatter.ols_intercept, p.scatter.pearson_r,
             p.scatter.sample_covariance, p.excluded) for p in points]
    out = Path(args.out)
    if "csv" in args.format:
        write_csv(out / "sparsity.csv", ["sparsity", "slope", "intercept", "pearson_r", "covariance", "excluded"], rows)
    if "json" in args.format:
        write_json(out / "sparsity.json", {"params": _params_meta(spec),
                                           "levels": [dict(zip(("sparsity", "slope", "intercept", "pearson_r",
                                                                "covariance", "excluded"), r)) for r in rows]})
    for r in rows:
        print(f"sparsity {r[0]:.3f}: slope {r[1]:.4f}, r {r[3]:.4f}, excluded {r[5]}")
    return 0


ANALYTIC_HEADER = ["N", "mu", "mu_f", "phi", "E_r", "E_rp", "E_rrp", "E_r2", "C_N", "slope", "status"]


def _analytic_row(n, mu, mu_f):
    phi = analytics.phi_from_rates(mu, mu_f)
    m = analytics.moments_analytic(n, mu, mu_f)
    if m.e_r >= 1.0 or m.e_rp >= 1.0:
        return [n, mu, mu_f, phi, *m.as_tuple(), math.nan, math.nan, "E_r>=1"], True
    cov = analytics.covariance_exact(n, mu, mu_f)
    slope = analytics.slope_exact(n, mu, mu_f)
    ok = abs(slope - 1.0) <= 1e-8
    return [n, mu, mu_f, phi, *m.as_tuple(), cov, slope, "ok" if ok else "slope!=1"], ok


def cmd_analytic(args) -> int:
    if args.preset == "table1":
        grid = [(n, mu, mu_f) for mu, mu_f, n in experiments.TABLE1_ROWS]
    elif args.preset == "curve":
        grid = [(n, mu, mu_f) for mu, mu_f in experiments.CURVE_PAIRS for n in range(1, 501)]
    else:
        grid = [(n, mu, mu_f) for n in args.n for mu in args.mu for mu_f in args.muf]
    rows, all_ok = [], True
    for n, mu, mu_f in grid:
        row, ok = _analytic_row(n, mu, mu_f)
        if row[-1] == "E_r>=1":
            log.warning("N=%d mu=%g mu_f=%g: E[r] >= 1, covariance undefined", n, mu, mu_f)
        elif not ok:
            all_ok = False
        rows.append(row)
    write_csv(Path(args.out) / "analytic.csv", ANALYTIC_HEADER, rows)
    if len(rows) <= 20:
        for r in rows:
            print(f"N={r[0]} mu={r[1]:g} mu_f={r[2]:g}: C_N={fmt(r[8])} slope={fmt(r[9])}")
    return 0 if all_ok else 1


def _triples(text, width):
    out = []
    for chunk in str(text).split(";"):
        if chunk.strip():
            vals = _float_list(chunk)
            if len(vals) != width:
                raise UsageError(f"expected {width} comma-separated numbers, got {chunk!r}")
            out.append(tuple(vals))
    return out


def cmd_table1(args) -> int:
    rows = experiments.TABLE1_ROWS
    if args.rows:
        rows = [(mu, mf, int(n)) for mu, mf, n in _triples(args.rows, 3)]
    table = experiments.covariance_table(rows, args.instances, args.sector - 1, args.seed, args.workers,
                                         args.bootstrap)
    out_rows = [(r.mu, r.mu_f, r.n, r.sample_cov, r.bootstrap_se, r.analytic, r.z_score, r.violating_instances)
                for r in table]
    header = ["mu", "mu_f", "N", "sample_cov", "bootstrap_se", "C_N", "z", "instances_with_violations"]
    if "csv" in args.format:
        write_csv(Path(args.out) / "table1.csv", header, out_rows)
    if "json" in args.format:
        write_json(Path(args.out) / "table1.json",
                   {"sector": args.sector, "instances": args.instances, "seed": args.seed,
                    "rows": [dict(zip(header, r)) for r in out_rows]})
    ok = True
    for r in table:
        status = "ok" if abs(r.z_score) <= args.z_max else "FAIL"
        ok &= status == "ok"
        print(f"mu={r.mu:g} mu_f={r.mu_f:g} N={r.n}: sample {r.sample_cov:.5f} +/- {r.bootstrap_se:.5f}, "
              f"C_N {r.analytic:.5f}, z {r.z_score:+.2f} [{status}]")
    return 0 if ok else 1


def cmd_curve(args) -> int:
    pairs = _triples(args.pairs, 2) if args.pairs else experiments.CURVE_PAIRS
    rows, ok = [], True
    for mu, mu_f in pairs:
        curve = analytics.covariance_curve(args.n_max, mu, mu_f)
        values = np.array([c for _, c in curve])
        good = bool(np.all(values > 0) and np.all(np.diff(values) > 0))
        ok &= good
        print(f"(mu, mu_f)=({mu:g}, {mu_f:g}): C_1={values[0]:.5f} C_{args.n_max}={values[-1]:.5f} "
              f"{'positive, increasing' if good else 'NOT positive/increasing'}")
        rows.extend((n, mu, mu_f, c) for n, c in curve)
    write_csv(Path(args.out) / "curve.csv", ["N", "mu", "mu_f", "C_N"], rows)
    return 0 if ok else 1


ORACLE_PAIRS = ((1.0, 0.1), (1.0, 0.001), (2.0, 0.005), (3.0, 0.001))


def oracle_checks(ks, samples, z_max, seed, tolerance=None):
    """Yield ``(name, ok, value, reference, magnitude, threshold)`` per check."""
    j_tol = tolerance if tolerance is not None else 1e-10
    l_tol = tolerance if tolerance is not None else 1e-8
    n_tol = tolerance if tolerance is not None else 1e-10

    def rel(a, b):
        return abs(a - b) / abs(b)

    for mu, mu_f in ORACLE_PAIRS + ((1.0, 1.0), (2.0, 2.0)):
        for k in ks:
            q = oracle.quad_j(k, mu, mu_f)
            a = analytics.j_integral(k, mu, mu_f)
            d = rel(a, q.value)
            yield f"J({k}) mu={mu:g} mu_f={mu_f:g}", d < j_tol, a, q.value, d, j_tol
            if k >= 2:
                q = oracle.quad_l(k, mu, mu_f)
                a = analytics.l_integral(k, mu, mu_f)
                d = rel(a, q.value)
                yield f"L({k}) mu={mu:g} mu_f={mu_f:g}", d < l_tol, a, q.value, d, l_tol
            if mu == mu_f:
                exact = 1.0 / (k * mu**k)
                d = rel(analytics.j_integral(k, mu, mu_f), exact)
                yield f"J({k}) trivial mu_f=mu={mu:g}", d < j_tol, analytics.j_integral(k, mu, mu_f), exact, d, j_tol
    for n in (1, 5, 20):
        params = ModelParams(n, 1.0, 0.1, seed=seed)
        mc = oracle.moments_bruteforce(params, samples)
        an = analytics.moments_analytic(n, 1.0, 0.1)
        for name, m, a, se in zip(("E[r]", "E[r']", "E[rr']", "E[r^2]"), mc.as_tuple(), an.as_tuple(),
                                  mc.std_errors):
            z = abs(m - a) / se
            yield f"{name} N={n} mu=1 mu_f=0.1 (z-score)", z < z_max, m, a, z, z_max
    rng = instance_rng(seed, 0)
    table = sample_table(ModelParams(5, 1.0, 0.01, seed=seed), rng)
    pair = build_pair(table)
    u1, d1 = true_measures(table, pair)
    for label, m, solved in (("U1", pair.a_u, u1.values), ("D1", pair.a_d, d1.values)):
        series = oracle.neumann_measure(m, 500)
        d = float(np.max(np.abs(series - solved)))
        yield f"Neumann {label} N=5 terms=500 (max abs diff)", d < n_tol, float(series[0]), float(solved[0]), d, n_tol


def cmd_oracle_check(args) -> int:
    results = list(oracle_checks(args.k, args.samples, args.z_max, args.seed, args.tolerance))
    if "csv" in args.format:
        write_csv(Path(args.out) / "oracle_check.csv",
                  ["check", "pass", "value", "reference", "discrepancy", "threshold"],
                  [(n, ok, v, r, d, t) for n, ok, v, r, d, t in results])
    failures = 0
    for name, ok, value, ref, d, tol in results:
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: discrepancy {d:.3e} (threshold {tol:.1e})")
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 0 if failures == 0 else 1


def cmd_ingest(args) -> int:
    table = ingest_table(args.path, args.table_format, args.rtol)
    y = table.gross_output
    summary = {
        "path": str(args.path),
        "n": len(table.sector_names),
        "sectors": list(table.sector_names),
        "density": table.density,
        "gross_output": y,
        "value_added": table.value_added,
    }
    if "json" in args.format:
        write_json(Path(args.out) / "ingest.json", summary)
    print(f"{args.path}: N={summary['n']}, density {table.density:.4f}")
    return 0


def cmd_measure(args) -> int:
    table = ingest_table(args.path, args.table_format, args.rtol)
    res = measure_empirical(table)
    out = Path(args.out)
    if "csv" in args.format:
        write_csv(out / "measures.csv", ["sector", "U1", "D1", "U_tilde", "D_tilde"], res.rows())
    if "json" in args.format:
        write_json(out / "measures.json", {"path": str(args.path), "n": len(res.sector_names),
                                           "density": res.density, "U1_vs_D1_slope": res.slope})
    slope = "undefined" if res.slope is None else f"{res.slope:.4f}"
    print(f"N={len(res.sector_names)}, density {res.density:.4f}, (U1, D1) slope {slope}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "scatter": cmd_scatter,
    "sparsity": cmd_sparsity,
    "analytic": cmd_analytic,
    "table1": cmd_table1,
    "curve": cmd_curve,
    "oracle-check": cmd_oracle_check,
    "ingest": cmd_ingest,
    "measure": cmd_measure,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        status = COMMANDS[args.command](args)
    except (ModelError, IngestError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MeasureError, analytics.AnalyticsError, oracle.QuadratureError, experiments.ExperimentError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
    return status


if __name__ == "__main__":
    sys.exit(main())
