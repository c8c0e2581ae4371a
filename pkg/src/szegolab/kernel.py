"""Fermi projection kernel ``P_mu(x, y)`` and related kernels.

``P_mu`` is evaluated from its quasi-momentum integral: every elementary
band below ``mu`` contributes ``int phi_m(x, k) conj(phi_m(y, k)) dk`` over
the filled part of the Brillouin zone.  Because ``phi_m(-k) =
conj(phi_m(k))`` the integral over the symmetric filled set equals twice the
real part of the integral over ``[0, 1/2]``, so for a real potential the
kernel is real.  The product ``phi conj(phi)`` does not depend on the
eigenvector phase, so no gauge fixing is needed here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bands import (
    EDGE_TOL,
    BandStructure,
    GenuineBand,
    MuClass,
    band_eigenvalue,
    build_lambda_phi,
    classify_mu,
    solve_delta,
)
from .fibre import fibre_batch

__all__ = [
    "PANEL_POINTS",
    "EdgeError",
    "Contribution",
    "KernelEvaluator",
    "DecayReport",
    "make_evaluator",
    "make_edge_evaluator",
    "kernel_P",
    "kernel_Pi",
    "kernel_R",
    "decay_probe",
    "ap_mean",
    "lw_kernel",
    "gauss_legendre_panels",
]

PANEL_POINTS = 8
_BLOCK = 1024


class EdgeError(ValueError):
    pass


def gauss_legendre_panels(a: float, b: float, panels: int, points: int = PANEL_POINTS):
    """Nodes and weights of composite Gauss-Legendre on ``[a, b]``."""
    t, w = np.polynomial.legendre.leggauss(points)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class Contribution:
    """One genuine band's share of ``P_mu``: ``"full"`` or ``"partial"`` with ``delta``."""

    genuine: int
    kind: str
    delta: float | None = None


@dataclass
class KernelEvaluator:
    """Quadrature form of ``P_mu``.

    ``coeffs[:, q]`` holds the plane-wave coefficients of the Bloch
    function at fibre quasi-momentum ``ks[q]`` (in ``[0, 1/2]``), weighted
    by ``weights[q]``.
    """

    mu: float
    classification: MuClass
    contributions: tuple
    ks: np.ndarray
    weights: np.ndarray
    coeffs: np.ndarray
    cutoff: int
    alpha_max: float
    band: GenuineBand | None = None
    delta: float | None = None
    _phi_delta: tuple | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.ks)

    @property
    def is_interior(self) -> bool:
        return self.delta is not None

    def bloch_matrix(self, x) -> np.ndarray:
        """``sqrt(2 w_q) phi(x_i, k_q)`` for all points and nodes."""
        x = np.asarray(x, dtype=float).ravel()
        n = np.arange(-self.cutoff, self.cutoff + 1)
        base = np.exp(1j * np.multiply.outer(x, n)) @ self.coeffs
        base *= np.exp(1j * np.multiply.outer(x, self.ks))
        base *= np.sqrt(2 * self.weights / (2 * np.pi))
        return base

    def matrix(self, x, y=None) -> np.ndarray:
        """Dense block ``P(x_i, y_j)``."""
        x = np.asarray(x, dtype=float).ravel()
        sym = y is None
        y = x if sym else np.asarray(y, dtype=float).ravel()
        out = np.zeros((len(x), len(y)))
        if self.n_nodes == 0:
            return out
        for s in range(0, self.n_nodes, _BLOCK):
            sub = slice(s, s + _BLOCK)
            part = _Slice(self, sub)
            Fx = part.bloch_matrix(x)
            if sym:
                A = np.hstack([Fx.real, Fx.imag])
                out += A @ A.T
            else:
                Fy = part.bloch_matrix(y)
                out += Fx.real @ Fy.real.T + Fx.imag @ Fy.imag.T
        return out

    def phi_delta(self):
        """Coefficients ``(k_reduced, c)`` of ``Phi(., delta)``."""
        if self._phi_delta is None:
            raise ValueError("evaluator has no partially filled band (mu not interior)")
        return self._phi_delta


class _Slice:
    def __init__(self, ev, sub):
        self.ks = ev.ks[sub]
        self.weights = ev.weights[sub]
        self.coeffs = ev.coeffs[:, sub]
        self.cutoff = ev.cutoff

    bloch_matrix = KernelEvaluator.bloch_matrix


def _panel_count(alpha_max):
    return max(32, math.ceil(4 * alpha_max / math.pi))


def _band_nodes(bs, m, lo, hi, panels, points):
    ks, ws = gauss_legendre_panels(lo, hi, panels, points)
    _, vecs = fibre_batch(bs.potential, ks, bs.cutoff, m)
    return ks, ws, vecs[:, :, m - 1].T


def _assemble(bs, mu, cls, segments, alpha_max, points, contributions, band=None, delta=None, phi_delta=None):
    panels = _panel_count(alpha_max)
    size = 2 * bs.cutoff + 1
    ks, ws, cs = [np.empty(0)], [np.empty(0)], [np.empty((size, 0), dtype=complex)]
    for m, lo, hi in segments:
        if hi <= lo:
            continue
        k, w, c = _band_nodes(bs, m, lo, hi, panels, points)
        ks.append(k)
        ws.append(w)
        cs.append(c)
    return KernelEvaluator(
        mu=mu,
        classification=cls,
        contributions=tuple(contributions),
        ks=np.concatenate(ks),
        weights=np.concatenate(ws),
        coeffs=np.concatenate(cs, axis=1),
        cutoff=bs.cutoff,
        alpha_max=alpha_max,
        band=band,
        delta=delta,
        _phi_delta=phi_delta,
    )


def make_evaluator(
    bs: BandStructure,
    mu: float,
    alpha_max: float = 50.0,
    points: int = PANEL_POINTS,
    edge_tol: float = EDGE_TOL,
) -> KernelEvaluator:
    """Quadrature evaluator of ``P_mu`` resolving separations up to ``2 alpha_max``.

    Each band segment in quasi-momentum gets ``max(32, ceil(4 alpha_max / pi))``
    Gauss-Legendre panels of ``points`` nodes.

    Raises
    ------
    EdgeError
        If ``mu`` is within ``edge_tol`` of a band edge; use
        :func:`make_edge_evaluator` there.
    """
    cls = classify_mu(bs, mu, edge_tol)
    if cls.kind == "edge":
        raise EdgeError(
            f"mu={mu} lies within edge_tol={edge_tol} of a band edge; "
            "use make_edge_evaluator (fully filled bands only)"
        )
    segments, contributions = [], []
    band = delta = phi_delta = None
    for i, gb in enumerate(bs.genuine):
        if mu <= gb.lower:
            break
        if mu >= gb.upper:
            contributions.append(Contribution(i, "full"))
            segments += [(m, 0.0, 0.5) for m in gb.band_indices()]
            continue
        delta = solve_delta(gb, mu)
        contributions.append(Contribution(i, "partial", delta))
        l = gb.segment(delta)
        segments += [(m, 0.0, 0.5) for m in range(gb.start, gb.start + l)]
        m = gb.start + l
        u = delta - gb.k_j - l / 2
        # odd bands rise on [0, 1/2], even bands fall
        segments.append((m, 0.0, u) if m % 2 else (m, 0.5 - u, 0.5))
        band = build_lambda_phi(bs.potential, gb)
        phi_delta = band.sampler.coefficients(delta)
    return _assemble(bs, mu, cls, segments, alpha_max, points, contributions, band, delta, phi_delta)


def make_edge_evaluator(
    bs: BandStructure, mu: float, alpha_max: float = 50.0, points: int = PANEL_POINTS, edge_tol: float = EDGE_TOL
) -> KernelEvaluator:
    """Evaluator at a band edge: only bands with ``nu_m <= mu + edge_tol`` enter."""
    cls = classify_mu(bs, mu, edge_tol)
    segments, contributions = [], []
    for i, gb in enumerate(bs.genuine):
        if gb.upper <= mu + edge_tol:
            contributions.append(Contribution(i, "full"))
            segments += [(m, 0.0, 0.5) for m in gb.band_indices()]
    return _assemble(bs, mu, cls, segments, alpha_max, points, contributions)


def kernel_P(ev: KernelEvaluator, x, y):
    """``P_mu(x, y)`` for broadcast arrays ``x``, ``y``."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if ev.n_nodes == 0:
        return np.zeros(x.shape) if x.ndim else 0.0
    out = np.zeros(x.size)
    for s in range(0, ev.n_nodes, _BLOCK):
        part = _Slice(ev, slice(s, s + _BLOCK))
        out += np.real(np.sum(part.bloch_matrix(x) * np.conj(part.bloch_matrix(y)), axis=1))
    return out.reshape(x.shape) if x.ndim else float(out[0])


def _phi_eval(kred, c, x):
    N = len(c) // 2
    freq = np.arange(-N, N + 1) + kred
    waves = np.exp(1j * np.multiply.outer(x, freq)) / np.sqrt(2 * np.pi)
    return waves @ c, waves @ (1j * freq * c)


def kernel_Pi(ev: KernelEvaluator, x, y):
    """Leading term ``Pi_mu(x, y) = 2 Im(Phi(x) conj Phi(y)) / (x - y)`` at ``delta``.

    On the diagonal the limit ``2 Im(conj(Phi(x)) Phi'(x))`` is used.
    """
    kred, c = ev.phi_delta()
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    px, dpx = _phi_eval(kred, c, x.ravel())
    py, _ = _phi_eval(kred, c, y.ravel())
    d = (x - y).ravel()
    num = 2 * np.imag(px * np.conj(py))
    diag = 2 * np.imag(np.conj(px) * dpx)
    close = d == 0
    out = np.where(close, diag, num / np.where(close, 1.0, d))
    return out.reshape(x.shape) if x.ndim else float(out[0])


def kernel_R(ev: KernelEvaluator, x, y):
    """Remainder ``R_mu = P_mu - Pi_mu``."""
    return kernel_P(ev, x, y) - kernel_Pi(ev, x, y)


@dataclass(frozen=True)
class DecayReport:
    separations: np.ndarray
    amplitudes: np.ndarray
    fitted_exponent: float
    fitted_points: int
    floor: float


def decay_probe(
    ev: KernelEvaluator,
    mode: str,
    x0: float = 0.0,
    max_sep: float = 200.0,
    which: str = "P",
    n_seps: int = 24,
    cell_points: int = 128,
    floor: float = 1e-12,
) -> DecayReport:
    """Envelope decay of a kernel away from the anchor ``x0``.

    For each separation ``s`` (log-spaced in ``[10, max_sep]``) the
    amplitude is ``max |K(x0, x0 + s + t)|`` over ``t`` in one period
    ``[0, 2 pi)``.  The exponent is the least-squares slope of log amplitude
    against log separation, using only amplitudes above
    ``floor * |P(x0, x0)|`` (rounding noise otherwise flattens the fit).

    ``which`` selects ``"P"``, ``"Pi"`` or ``"R"``; the latter two need an
    interior ``mu``.
    """
    if max_sep < 20:
        raise ValueError(f"max_sep={max_sep} < 20 leaves the decay fit underdetermined")
    if mode not in ("interior", "gap-or-edge"):
        raise ValueError(f"unknown decay mode {mode!r}")
    if (mode == "interior") != ev.is_interior:
        raise ValueError(f"decay mode {mode!r} inconsistent with evaluator classification {ev.classification}")
    if max_sep > 2 * ev.alpha_max:
        raise ValueError(f"max_sep={max_sep} exceeds the evaluator resolution 2*alpha_max={2 * ev.alpha_max}")
    kernel = {"P": kernel_P, "Pi": kernel_Pi, "R": kernel_R}[which]
    seps = np.geomspace(10.0, max_sep, n_seps)
    t = np.arange(cell_points) * (2 * np.pi / cell_points)
    amps = np.empty(n_seps)
    for i, s in enumerate(seps):
        y = x0 + s + t
        amps[i] = np.max(np.abs(kernel(ev, np.full_like(y, x0), y)))
    ref = abs(kernel_P(ev, x0, x0))
    cut = floor * max(ref, 1e-300)
    keep = amps > cut
    if keep.sum() >= 3:
        slope = np.polyfit(np.log(seps[keep]), np.log(amps[keep]), 1)[0]
    else:
        # the whole envelope sits at rounding level: steeper than any power law
        slope = -np.inf
    return DecayReport(seps, amps, float(slope), int(keep.sum()), cut)


def ap_mean(f, T: float, grid: float = 0.05) -> complex:
    """Trapezoid estimate of ``(2T)^-1 int_{-T}^{T} f``."""
    if T < 100:
        raise ValueError(f"T={T} < 100")
    n = int(math.ceil(2 * T / grid))
    x = np.linspace(-T, T, n + 1)
    h = 2 * T / n
    total = 0j
    chunk = 1 << 16
    for s in range(0, n + 1, chunk):
        vals = np.asarray(f(x[s : s + chunk]), dtype=complex)
        if s == 0:
            vals[0] *= 0.5
        if s + chunk >= n + 1:
            vals[-1] *= 0.5
        total += vals.sum()
    return complex(total * h / (2 * T))


def lw_kernel(alpha: float, sign: int, x, y):
    """Landau-Widom reference kernel ``D_alpha^{+/-}(x, y)``.

    ``D^+(x, y) = (4 pi^2)^-1 int_{alpha+1}^inf dz / ((z - x)(z - y))
    = log((A - y) / (A - x)) / (4 pi^2 (x - y))`` with ``A = alpha + 1``;
    ``D^-`` follows from ``x -> -x``.  Zero outside ``(-alpha, alpha)^2``.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if sign < 0:
        x, y = -x, -y
    a = alpha + 1.0
    inside = (np.abs(x) < alpha) & (np.abs(y) < alpha)
    gap = np.where(inside, a - x, 1.0)
    z = np.where(inside, (x - y) / gap, 0.0)
    small = np.abs(z) < 1e-8
    zs = np.where(small, 1.0, z)
    ratio = np.where(small, 1.0 - z / 2 + z * z / 3, np.log1p(zs) / zs)
    out = np.where(inside, ratio / gap / (4 * np.pi**2), 0.0)
    return out if out.ndim else float(out)
