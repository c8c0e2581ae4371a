"""Command-line entry points.

Exit codes: 0 on success or a passing check, 2 when a requested check
fails, 1 on any error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .bands import band_structure, classify_mu, integrated_density_of_states, solve_delta
from .experiments import (
    fit_asymptotics,
    fmt,
    gap_boundedness_check,
    load_config,
    parse_alpha,
    potential_from_config,
    read_sweep,
    render_report,
    resolve_mu,
    run_sweep,
)
from .fibre import DEFAULT_CUTOFF
from .finsec import SPACING, lw_spectrum, lw_trace, parse_function, widom_coefficient
from .kernel import decay_probe, make_edge_evaluator, make_evaluator

PASS, ERROR, FAIL = 0, 1, 2


class CheckFailed(Exception):
    pass


def _potential(text):
    text = text.strip()
    if text.startswith("{"):
        return potential_from_config(json.loads(text))
    return potential_from_config({"preset": text})


def _mu(text):
    try:
        return float(text)
    except ValueError:
        return text


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _structure(args, mu=None):
    V = _potential(args.potential)
    if mu is None:
        return V, None, band_structure(V, args.e_max, args.cutoff, args.touch_tol)
    value, bs = resolve_mu(V, mu, args.cutoff, args.touch_tol)
    return V, value, bs


# --- subcommands -------------------------------------------------------------

def cmd_sweep(args):
    cfg = load_config(args.config)
    res = run_sweep(cfg, args.out, log=lambda m: print(m, file=sys.stderr), workers=args.workers)
    text, doc = render_report(res)
    print(text)
    if args.out:
        with open(str(args.out) + ".report.json", "w") as fh:
            fh.write(doc)


def cmd_fit(args):
    res = read_sweep(args.csv)
    rep = fit_asymptotics(res, args.function, args.alpha_min)
    text, doc = render_report(res, [rep])
    print(text)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(doc)
    failed = []
    if args.tol is not None and (rep.b_deviation is None or abs(rep.b_deviation) > args.tol):
        failed.append(f"b deviates from W(h) by {rep.b_deviation} > {args.tol}")
    if args.bound_window is not None:
        gap = gap_boundedness_check(res, args.function, args.bound_window)
        print(f"gap residual spread {gap.spread:.6g} (window {gap.bound_window}): {'pass' if gap.passed else 'fail'}")
        if not gap.passed:
            failed.append("gap boundedness")
    if failed:
        raise CheckFailed("; ".join(failed))


def cmd_bands(args):
    _, _, bs = _structure(args)
    membership = {}
    for g, gb in enumerate(bs.genuine):
        for j in gb.band_indices(last=len(bs.bands)):
            membership[j] = g
    fh, close = _open_out(args.out)
    w = _writer(fh)
    w.writerow(["j", "k_j", "mu_j", "nu_j", "genuine_group_id"])
    for b in bs.bands:
        w.writerow([b.j, fmt(b.k_j), fmt(b.mu), fmt(b.nu), membership[b.j]])
    if close:
        fh.close()


def cmd_ids(args):
    V = _potential(args.potential)
    mus = [float(m) for m in args.mu]
    bs = band_structure(V, max(max(mus), 0.0) + 1.0, args.cutoff, args.touch_tol)
    fh, close = _open_out(args.out)
    w = _writer(fh)
    w.writerow(["mu", "N_mu"])
    for mu in mus:
        w.writerow([fmt(mu), fmt(integrated_density_of_states(bs, mu))])
    if close:
        fh.close()


def cmd_delta(args):
    _, mu, bs = _structure(args, _mu(args.mu))
    cls = classify_mu(bs, mu, args.edge_tol)
    if cls.kind != "interior":
        raise ValueError(f"mu={mu} is not interior to a band (classified {cls.kind}); delta undefined")
    gb = bs.genuine[cls.genuine]
    delta = solve_delta(gb, mu)
    err = abs(float(gb.lam(delta)) - mu)
    print(f"mu={fmt(mu)} genuine_band={cls.genuine} bands={cls.bands[0]}..{cls.bands[1]} "
          f"delta={fmt(delta)} |Lambda(delta)-mu|={err:.3e}")


def cmd_kernel_probe(args):
    _, mu, bs = _structure(args, _mu(args.mu))
    cls = classify_mu(bs, mu, args.edge_tol)
    alpha_max = max(50.0, args.max_sep / 2)
    if cls.kind == "edge":
        ev = make_edge_evaluator(bs, mu, alpha_max=alpha_max, edge_tol=args.edge_tol)
    else:
        ev = make_evaluator(bs, mu, alpha_max=alpha_max, edge_tol=args.edge_tol)
    rep = decay_probe(ev, args.mode, args.x0, args.max_sep, which=args.which)
    fh, close = _open_out(args.out)
    w = _writer(fh)
    w.writerow(["sep", "envelope_amplitude"])
    for s, a in zip(rep.separations, rep.amplitudes):
        w.writerow([fmt(s), fmt(a)])
    w.writerow(["fitted_exponent", fmt(rep.fitted_exponent)])
    if close:
        fh.close()
    if args.check:
        e = rep.fitted_exponent
        ok = abs(e + 1.0) <= 0.1 if (args.mode == "interior" and args.which != "R") else e <= -1.8
        print(f"fitted exponent {e:.4f}: {'pass' if ok else 'fail'}", file=sys.stderr)
        if not ok:
            raise CheckFailed(f"decay exponent {e:.4f} outside the expected range")


def cmd_widom(args):
    print(f"{widom_coefficient(parse_function(args.function)):.12g}")


def cmd_lw_ref(args):
    alphas = [parse_alpha(a) for a in args.alphas]
    traces = [lw_trace(a, args.n, args.spacing, spectrum=lw_spectrum(a, args.spacing)) for a in alphas]
    fh, close = _open_out(args.out)
    w = _writer(fh)
    w.writerow(["alpha", "trace"])
    for a, t in zip(alphas, traces):
        w.writerow([fmt(a), fmt(t)])
    if len(alphas) >= 2:
        slope, intercept = np.polyfit(np.log(alphas), traces, 1)
        target = widom_coefficient(parse_function(f"p:{args.n}")) / 4
        w.writerow(["slope", fmt(slope)])
        w.writerow(["intercept", fmt(intercept)])
        w.writerow(["target_slope", fmt(target)])
    if close:
        fh.close()
    if args.tol is not None:
        if len(alphas) < 2:
            raise ValueError("slope check needs at least two alphas")
        dev = abs(slope - target) / target
        if dev > args.tol:
            raise CheckFailed(f"slope {slope:.6g} deviates from {target:.6g} by {100 * dev:.2f}%")


# --- parser ------------------------------------------------------------------

def _add_structure_args(p, e_max=True):
    p.add_argument("--potential", default="cosine(1)", help="preset name or JSON {'coefficients': ...}")
    p.add_argument("--cutoff", type=int, default=DEFAULT_CUTOFF)
    p.add_argument("--touch-tol", type=float, default=1e-9)
    if e_max:
        p.add_argument("--e-max", type=float, default=10.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="szegolab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run an alpha sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output prefix for .csv / .json")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="fit a*alpha + b*log(alpha) + c to a sweep CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--function", required=True)
    p.add_argument("--alpha-min", type=float, default=25.0)
    p.add_argument("--tol", type=float, help="fail (exit 2) if |b/W - 1| exceeds this")
    p.add_argument("--bound-window", type=float, help="also run the gap boundedness check")
    p.add_argument("--json", help="write the JSON report here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bands", help="band edges as CSV")
    _add_structure_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("ids", help="integrated density of states as CSV")
    _add_structure_args(p, e_max=False)
    p.add_argument("--mu", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ids)

    p = sub.add_parser("delta", help="quasi-momentum delta with Lambda(delta) = mu")
    _add_structure_args(p, e_max=False)
    p.add_argument("--mu", required=True, help="energy, 'mid-band:j' or 'mid-gap:j'")
    p.add_argument("--edge-tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("kernel-probe", help="envelope decay of the projection kernel")
    _add_structure_args(p, e_max=False)
    p.add_argument("--mu", required=True)
    p.add_argument("--mode", choices=("interior", "gap-or-edge"), required=True)
    p.add_argument("--max-sep", type=float, default=200.0)
    p.add_argument("--which", choices=("P", "Pi", "R"), default="P")
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--edge-tol", type=float, default=1e-6)
    p.add_argument("--check", action="store_true", help="exit 2 if the exponent misses its target")
    p.add_argument("--out")
    p.set_defaults(func=cmd_kernel_probe)

    p = sub.add_parser("widom", help="print W(h) to 12 digits")
    p.add_argument("--function", required=True)
    p.set_defaults(func=cmd_widom)

    p = sub.add_parser("lw-ref", help="power traces of the Landau-Widom reference operator")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--alphas", nargs="+", required=True)
    p.add_argument("--spacing", type=float, default=SPACING)
    p.add_argument("--tol", type=float, help="fail (exit 2) if the slope deviates by more than this")
    p.add_argument("--out")
    p.set_defaults(func=cmd_lw_ref)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return FAIL
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR
    return PASS


if __name__ == "__main__":
    sys.exit(main())
