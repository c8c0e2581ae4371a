"""Config-driven alpha sweeps, asymptotic fits and reports.

A sweep evaluates ``tr h(B_{alpha, mu})`` for several test functions from a
single spectrum per ``alpha``.  The fit model is
``a * alpha + b * log(alpha) + c``; when ``h(1) = 0`` the linear column is
dropped.  Targets are ``a* = 2 h(1) N(mu; H)`` and ``b* = W(h)``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bands import EDGE_TOL, TOUCH_TOL, BandStructure, band_structure, classify_mu, integrated_density_of_states
from .fibre import DEFAULT_CUTOFF, PeriodicPotential, potential_from_spec
from .finsec import SPACING, assemble_section, parse_function, section_spectrum, trace_h, widom_coefficient
from .kernel import make_evaluator

__all__ = [
    "CONFIG_FIELDS",
    "ExperimentConfig",
    "SweepRow",
    "SweepResult",
    "FitReport",
    "GapReport",
    "load_config",
    "config_from_dict",
    "parse_alpha",
    "potential_from_config",
    "resolve_mu",
    "run_sweep",
    "read_sweep",
    "fit_asymptotics",
    "gap_boundedness_check",
    "render_report",
    "fmt",
]

CONFIG_FIELDS = ("potential", "mu", "alphas", "spacing", "cutoff", "functions", "edge_tol", "touch_tol")
CSV_HEADER = ("alpha", "function", "trace", "eigencount")
ALPHA_MIN = 25.0


def fmt(x: float) -> str:
    """Float with 17 significant digits (round-trips exactly)."""
    return format(float(x), ".17g")


_PI_ALPHA = re.compile(r"^\s*([-+0-9.eE]*)\s*pi\s*$")


def parse_alpha(value) -> float:
    """A half-length given as a number or as ``"<c>pi"`` (e.g. ``"8pi"``)."""
    if isinstance(value, str):
        m = _PI_ALPHA.match(value)
        if m is None:
            return float(value)
        c = m.group(1)
        return (float(c) if c else 1.0) * math.pi
    return float(value)


def _coefficient(v):
    if isinstance(v, (list, tuple)):
        re_, im = v
        return complex(re_, im)
    return complex(v)


def potential_from_config(spec) -> PeriodicPotential:
    """``{"preset": "cosine(1)"}`` or ``{"coefficients": {m: v}}``; values may be ``[re, im]``."""
    if isinstance(spec, str):
        return potential_from_spec(spec)
    if set(spec) == {"preset"}:
        return potential_from_spec(spec["preset"])
    if set(spec) == {"coefficients"}:
        coeffs = spec["coefficients"]
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        return potential_from_spec([(int(m), _coefficient(v)) for m, v in items])
    raise ValueError(f"potential must have exactly one of 'preset' or 'coefficients', got {sorted(spec)}")


@dataclass
class ExperimentConfig:
    """One sweep.  ``mu`` is a number or ``"mid-band:j"`` / ``"mid-gap:j"``."""

    potential: dict
    mu: float | str
    alphas: list
    functions: list
    spacing: float = SPACING
    cutoff: int = DEFAULT_CUTOFF
    edge_tol: float = EDGE_TOL
    touch_tol: float = TOUCH_TOL
    classification: str | None = None

    def __post_init__(self):
        self.alphas = [parse_alpha(a) for a in self.alphas]
        if not self.functions:
            raise ValueError("config lists no test functions")
        if not self.alphas:
            raise ValueError("config lists no alphas")
        if any(b <= a for a, b in zip(self.alphas, self.alphas[1:])):
            raise ValueError("alphas must be strictly increasing")
        if self.alphas[0] < 5:
            raise ValueError(f"smallest alpha {self.alphas[0]} < 5")
        for f in self.functions:
            parse_function(f)
        if self.classification not in (None, "interior", "gap"):
            raise ValueError(f"classification override must be 'interior' or 'gap', got {self.classification!r}")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in CONFIG_FIELDS}
        return d

    @property
    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def config_from_dict(d: dict) -> ExperimentConfig:
    unknown = set(d) - set(CONFIG_FIELDS)
    if unknown:
        raise ValueError(f"unknown config fields {sorted(unknown)}; allowed: {CONFIG_FIELDS}")
    missing = {"potential", "mu", "alphas", "functions"} - set(d)
    if missing:
        raise ValueError(f"config missing required fields {sorted(missing)}")
    return ExperimentConfig(**d)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def resolve_mu(V: PeriodicPotential, mu, cutoff: int, touch_tol: float = TOUCH_TOL):
    """Numeric Fermi energy and a band structure covering it."""
    if isinstance(mu, str):
        kind, _, idx = mu.partition(":")
        j = int(idx)
        if kind not in ("mid-band", "mid-gap") or j < 1:
            raise ValueError(f"cannot parse mu {mu!r}; use a number, 'mid-band:j' or 'mid-gap:j'")
        e_max = 1.0
        while True:
            bs = band_structure(V, e_max, cutoff, touch_tol)
            if len(bs.bands) >= j + 1:
                break
            e_max = 2 * e_max + 1
        b = bs.band(j)
        value = 0.5 * (b.mu + b.nu) if kind == "mid-band" else 0.5 * (b.nu + bs.band(j + 1).mu)
    else:
        value = float(mu)
    e_max = max(value, 0.0) + 1.0
    while True:
        try:
            bs = band_structure(V, e_max, cutoff, touch_tol)
            break
        except ValueError as exc:
            if "not above inf spectrum" not in str(exc):  # e_max too low
                raise
            e_max = 2 * abs(e_max) + 1
    return value, bs


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    function: str
    trace: float
    eigencount: int
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class SweepResult:
    rows: list
    metadata: dict

    def series(self, function: str):
        rows = [r for r in self.rows if r.function == function]
        if not rows:
            raise KeyError(f"no rows for function {function!r}")
        return np.array([r.alpha for r in rows]), np.array([r.trace for r in rows])


def _write_row(writer, row):
    writer.writerow([fmt(row.alpha), row.function, fmt(row.trace), str(row.eigencount)])


def run_sweep(cfg: ExperimentConfig, out: str | Path | None = None, log=None, workers: int = 1) -> SweepResult:
    """Evaluate every test function at every alpha of the config.

    With ``out`` given, rows are appended to ``<out>.csv`` as each alpha
    finishes and metadata (including wall times) goes to ``<out>.json``.
    ``workers > 1`` solves sections on a thread pool; rows are still
    written by this thread in ascending alpha.
    """
    V = potential_from_config(cfg.potential)
    mu, bs = resolve_mu(V, cfg.mu, cfg.cutoff, cfg.touch_tol)
    cls = classify_mu(bs, mu, cfg.edge_tol)
    if cls.kind == "edge":
        raise ValueError(f"theorem dichotomy undefined at edge within edge_tol={cfg.edge_tol} (mu={mu})")
    kind = cfg.classification or cls.kind
    funcs = [parse_function(f) for f in cfg.functions]
    ids = list(cfg.functions)
    n_mu = integrated_density_of_states(bs, mu)
    metadata = {
        "config_hash": cfg.digest,
        "config": cfg.to_dict(),
        "mu": mu,
        "classification": kind,
        "N_mu": n_mu,
        "widom": {i: widom_coefficient(f) for i, f in zip(ids, funcs)},
        "h1": {i: f.h1 for i, f in zip(ids, funcs)},
    }
    ev = make_evaluator(bs, mu, alpha_max=max(cfg.alphas), edge_tol=cfg.edge_tol)

    def one(alpha):
        t0 = time.perf_counter()
        sp = section_spectrum(assemble_section(ev, alpha, cfg.spacing))
        count = int(np.count_nonzero(sp.eigenvalues > 0.5))
        traces = [trace_h(sp, h) for h in funcs]
        return count, traces, time.perf_counter() - t0

    rows = []
    fh = writer = None
    if out is not None:
        fh = open(Path(str(out) + ".csv"), "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        # map() yields in submission order, so rows land in ascending alpha
        results = pool.map(one, cfg.alphas) if pool else map(one, cfg.alphas)
        for alpha, (count, traces, elapsed) in zip(cfg.alphas, results):
            for fid, tr in zip(ids, traces):
                row = SweepRow(alpha, fid, tr, count, elapsed)
                rows.append(row)
                if writer:
                    _write_row(writer, row)
            if fh:
                fh.flush()
            if log:
                log(f"alpha={alpha:.6g} done in {elapsed:.1f}s")
    finally:
        if pool:
            pool.shutdown(cancel_futures=True)
        if fh:
            fh.close()
    metadata["wall_times"] = {fmt(a): next(r.wall_time for r in rows if r.alpha == a) for a in cfg.alphas}
    res = SweepResult(rows, metadata)
    if out is not None:
        Path(str(out) + ".json").write_text(json.dumps(metadata, indent=2, sort_keys=True))
    return res


def read_sweep(csv_path) -> SweepResult:
    """Load a sweep CSV and, when present, its ``.json`` metadata sidecar."""
    csv_path = Path(csv_path)
    rows = []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        for alpha, fid, trace, count in reader:
            rows.append(SweepRow(float(alpha), fid, float(trace), int(count)))
    meta_path = csv_path.with_suffix(".json")
    metadata = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return SweepResult(rows, metadata)


@dataclass(frozen=True)
class FitReport:
    function: str
    a: float
    b: float
    c: float
    residual_rms: float
    a_target: float | None
    b_target: float
    a_deviation: float | None
    b_deviation: float | None
    alpha_min: float
    n_rows: int
    linear_dropped: bool


def fit_asymptotics(res: SweepResult, function: str, alpha_min: float = ALPHA_MIN) -> FitReport:
    """Least-squares fit of ``trace = a alpha + b log(alpha) + c``.

    Raises
    ------
    ValueError
        With fewer than 4 rows at ``alpha >= alpha_min`` or a rank-deficient
        design.
    """
    alphas, traces = res.series(function)
    keep = alphas >= alpha_min
    alphas, traces = alphas[keep], traces[keep]
    if len(alphas) < 4:
        raise ValueError(f"need >= 4 rows with alpha >= {alpha_min}, have {len(alphas)}")
    h1 = res.metadata.get("h1", {}).get(function)
    if h1 is None:
        h1 = parse_function(function).h1
    widom = res.metadata.get("widom", {}).get(function)
    if widom is None:
        widom = widom_coefficient(parse_function(function))
    drop = h1 == 0
    cols = [np.log(alphas), np.ones_like(alphas)]
    if not drop:
        cols.insert(0, alphas)
    A = np.column_stack(cols)
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise ValueError("rank-deficient fit design (too few distinct alphas)")
    coef, *_ = np.linalg.lstsq(A, traces, rcond=None)
    if drop:
        a, (b, c) = 0.0, coef
    else:
        a, b, c = coef
    rms = float(np.sqrt(np.mean((A @ coef - traces) ** 2)))
    n_mu = res.metadata.get("N_mu")
    a_target = 2 * h1 * n_mu if n_mu is not None else None
    a_dev = (a - a_target) / a_target if a_target else None
    b_dev = (b - widom) / widom if widom else None
    return FitReport(function, float(a), float(b), float(c), rms, a_target, widom, a_dev, b_dev,
                     float(alpha_min), int(len(alphas)), bool(drop))


@dataclass(frozen=True)
class GapReport:
    passed: bool
    spread: float
    bound_window: float
    residuals: tuple


def gap_boundedness_check(res: SweepResult, function: str, bound_window: float) -> GapReport:
    """Pass iff ``trace - 2 alpha h(1) N`` varies by at most ``bound_window``."""
    if res.metadata.get("classification") != "gap":
        raise ValueError(f"gap check needs mu in a gap, sweep is {res.metadata.get('classification')!r}")
    alphas, traces = res.series(function)
    h1 = res.metadata.get("h1", {}).get(function, parse_function(function).h1)
    resid = traces - 2 * alphas * h1 * res.metadata["N_mu"]
    spread = float(np.max(resid) - np.min(resid))
    return GapReport(spread <= bound_window, spread, bound_window, tuple(float(r) for r in resid))


def render_report(res: SweepResult, fits=()):
    """Plain-text summary and a JSON mirror of every number in it."""
    meta = res.metadata
    lines = [
        f"classification: {meta.get('classification')}   mu = {meta.get('mu')}   N(mu;H) = {meta.get('N_mu')}",
        "",
        f"{'alpha':>12} {'function':>10} {'trace':>22} {'count':>6}",
    ]
    for r in res.rows:
        lines.append(f"{r.alpha:12.6g} {r.function:>10} {r.trace:22.15g} {r.eigencount:6d}")
    if fits:
        lines += ["", f"{'function':>10} {'a':>12} {'a*':>12} {'b':>12} {'b*':>12} {'dev(b)':>9} {'rms':>10}"]
        for f in fits:
            a_t = "-" if f.a_target is None else f"{f.a_target:12.6f}"
            dev = "-" if f.b_deviation is None else f"{100 * f.b_deviation:8.2f}%"
            lines.append(f"{f.function:>10} {f.a:12.6f} {a_t:>12} {f.b:12.6f} {f.b_target:12.6f} {dev:>9} {f.residual_rms:10.3e}")
    doc = {
        "metadata": {k: v for k, v in meta.items() if k != "wall_times"},
        "rows": [asdict(r) for r in res.rows],
        "fits": [asdict(f) for f in fits],
    }
    return "\n".join(lines), json.dumps(doc, sort_keys=True)
