"""Finite sections ``B = chi P_mu chi`` on ``(-alpha, alpha)`` and trace functionals.

The compression is discretised by a Nystrom scheme on composite
Gauss-Legendre panels: the matrix ``sqrt(w_i) P(x_i, x_j) sqrt(w_j)`` has
the same nonzero spectrum as the quadrature approximation of the operator.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from .kernel import KernelEvaluator, gauss_legendre_panels, lw_kernel

__all__ = [
    "SPACING",
    "SPEC_TOL",
    "SpectrumError",
    "TestFunction",
    "parse_function",
    "FiniteSection",
    "SectionSpectrum",
    "section_nodes",
    "assemble_section",
    "section_spectrum",
    "trace_h",
    "schatten_q",
    "widom_coefficient",
    "widom_halving_check",
    "lw_spectrum",
    "lw_trace",
]

SPACING = 0.125
SPEC_TOL = 1e-6
LW_SPEC_TOL = 1e-4
_PANEL = 8


class SpectrumError(RuntimeError):
    pass


# --- test functions ----------------------------------------------------------

def _poly_p(n):
    return lambda t: (t * (1 - t)) ** n


def _poly_q(n):
    return lambda t: t * (t * (1 - t)) ** n


def _renyi(gamma):
    if gamma == 1:
        return _von_neumann
    return lambda t: np.log(t**gamma + (1 - t) ** gamma) / (1 - gamma)


def _von_neumann(t):
    return special.entr(t) + special.entr(1 - t)


@dataclass(frozen=True)
class TestFunction:
    """A function ``h`` on ``[0, 1]`` with ``h(0) = 0``.

    ``kind`` is one of ``poly_p``, ``poly_q``, ``renyi``, ``von_neumann``,
    ``linear``, ``table`` or ``custom``.  ``holder`` is the Holder exponent
    at the endpoints, kept as metadata only.
    """

    kind: str
    param: float | None = None
    fn: Callable = field(default=None, compare=False, repr=False)
    table: tuple | None = field(default=None, compare=False, repr=False)
    label: str | None = None

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.fn is None:
            object.__setattr__(self, "fn", self._build())

    def _build(self):
        k, p = self.kind, self.param
        if k == "poly_p":
            return _poly_p(int(p))
        if k == "poly_q":
            return _poly_q(int(p))
        if k == "renyi":
            return _renyi(float(p))
        if k == "von_neumann":
            return _von_neumann
        if k == "linear":
            return lambda t: np.asarray(t, dtype=float) * 1.0
        if k == "table":
            ts, hs = (np.asarray(a, dtype=float) for a in self.table)
            if ts[0] != 0 or ts[-1] != 1 or np.any(np.diff(ts) <= 0):
                raise ValueError("table abscissae must increase from 0 to 1")
            if hs[0] != 0:
                raise ValueError("tabulated h must vanish at 0")
            return lambda t: np.interp(t, ts, hs)
        raise ValueError(f"unknown test-function kind {k!r}")

    @classmethod
    def from_table(cls, ts, hs, label="table"):
        return cls("table", table=(tuple(ts), tuple(hs)), label=label)

    @classmethod
    def custom(cls, fn, label="custom"):
        return cls("custom", fn=fn, label=label)

    def __call__(self, t):
        return self.fn(np.asarray(t, dtype=float))

    @property
    def h1(self) -> float:
        if self.kind == "table":
            return float(self.table[1][-1])
        return float(self.fn(np.array(1.0)))

    @property
    def holder(self) -> float:
        return {"poly_p": 1.0, "poly_q": 1.0, "linear": 1.0}.get(self.kind, float("nan"))

    @property
    def id(self) -> str:
        if self.label:
            return self.label
        k, p = self.kind, self.param
        if k in ("poly_p", "poly_q"):
            return f"{k[-1]}:{int(p)}"
        if k == "renyi":
            return f"renyi:{p:g}"
        return {"von_neumann": "vn", "linear": "linear"}.get(k, k)


_FUNC = re.compile(r"^(p|q|renyi):([-+0-9.eE]+)$")


def parse_function(text: str) -> TestFunction:
    """Parse ``p:n``, ``q:n``, ``renyi:gamma``, ``vn`` or ``linear``."""
    text = text.strip()
    if text in ("vn", "von_neumann"):
        return TestFunction("von_neumann")
    if text == "linear":
        return TestFunction("linear")
    m = _FUNC.match(text)
    if m is None:
        raise ValueError(f"cannot parse test function {text!r}")
    kind, val = m.groups()
    if kind in ("p", "q"):
        n = int(val)
        if n < 1 or str(n) != val:
            raise ValueError(f"polynomial power must be a positive integer, got {val!r}")
        return TestFunction("poly_" + kind, n)
    gamma = float(val)
    if gamma <= 0:
        raise ValueError(f"Renyi index must be positive, got {gamma}")
    if gamma == 1:
        return TestFunction("von_neumann")
    return TestFunction("renyi", gamma)


# --- Nystrom sections --------------------------------------------------------

@dataclass(frozen=True)
class FiniteSection:
    alpha: float
    nodes: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray
    hermitian_defect: float


@dataclass(frozen=True)
class SectionSpectrum:
    """Eigenvalues sorted descending, verified to lie in ``[-spec_tol, 1 + spec_tol]``."""

    eigenvalues: np.ndarray
    spec_tol: float = SPEC_TOL

    @property
    def clamped(self) -> np.ndarray:
        return np.clip(self.eigenvalues, 0.0, 1.0)


def section_nodes(alpha: float, spacing: float = SPACING):
    """Composite 8-point Gauss-Legendre nodes on ``(-alpha, alpha)``."""
    panels = max(1, math.ceil(2 * alpha / (_PANEL * spacing)))
    return gauss_legendre_panels(-alpha, alpha, panels, _PANEL)


def _max_spacing(mu):
    return min(0.2, math.pi / (4 * math.sqrt(mu))) if mu > 0 else 0.2


def assemble_section(ev: KernelEvaluator, alpha: float, spacing: float = SPACING) -> FiniteSection:
    """Nystrom matrix of ``B_{alpha, mu}``."""
    bound = _max_spacing(ev.mu)
    if spacing > bound:
        raise ValueError(f"spacing {spacing} too coarse: must be <= {bound:.6g} to resolve the kernel")
    if alpha > ev.alpha_max * (1 + 1e-12):
        raise ValueError(
            f"alpha={alpha} exceeds the evaluator's k-quadrature resolution alpha_max={ev.alpha_max}"
        )
    x, w = section_nodes(alpha, spacing)
    P = ev.matrix(x)
    sw = np.sqrt(w)
    M = sw[:, None] * P * sw[None, :]
    defect = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if defect > 1e-10:
        raise SpectrumError(f"Nystrom matrix asymmetric by {defect:.2e}")
    M = 0.5 * (M + M.T)
    return FiniteSection(alpha, x, w, M, defect)


def _checked_spectrum(M, tol, what):
    lam = np.linalg.eigvalsh(M)[::-1]
    if lam.size and (lam[-1] < -tol or lam[0] > 1 + tol):
        raise SpectrumError(
            f"{what}: eigenvalues span [{lam[-1]:.3e}, {lam[0]:.6f}] outside [-{tol}, 1+{tol}]; "
            "discretization not positivity-preserving; refine grid or k-quadrature"
        )
    return lam


def section_spectrum(fs: FiniteSection, spec_tol: float = SPEC_TOL) -> SectionSpectrum:
    return SectionSpectrum(_checked_spectrum(fs.matrix, spec_tol, "finite section"), spec_tol)


def trace_h(sp: SectionSpectrum, h: TestFunction) -> float:
    """``tr h(B)`` from the clamped spectrum."""
    return float(np.sum(h(sp.clamped)))


def schatten_q(sp: SectionSpectrum, q: float) -> float:
    """``sum (lambda (1 - lambda))^q``, i.e. ``||B(1-B)||_q^q``."""
    if not 0 < q <= 1:
        raise ValueError(f"q={q} outside (0, 1]")
    lam = sp.clamped
    return float(np.sum((lam * (1 - lam)) ** q))


# --- Widom coefficient -------------------------------------------------------

def _widom_integrand(h: TestFunction, h1: float, t, u):
    # t + u = 1, both passed exactly to avoid cancellation at the endpoints
    return (h(t) - t * h1) / (t * u)


def widom_coefficient(h: TestFunction, tol: float = 1e-9) -> float:
    """``W(h) = pi^-2 int_0^1 (h(t) - t h(1)) / (t (1 - t)) dt``.

    Adaptive Gauss-Kronrod on each half of ``[0, 1]`` after the substitutions
    ``t = s^2`` (left) and ``1 - t = s^2`` (right), which tame the Holder-type
    endpoint singularities.
    """
    h1 = h.h1
    r = math.sqrt(0.5)

    def left(s):
        t = s * s
        if t == 0.0:
            return 0.0
        return 2 * s * float(_widom_integrand(h, h1, t, 1.0 - t))

    def right(s):
        u = s * s
        if u == 0.0:
            return 0.0
        return 2 * s * float(_widom_integrand(h, h1, 1.0 - u, u))

    total = 0.0
    for f in (left, right):
        val, err, info = integrate.quad(f, 0.0, r, epsabs=tol * 1e-2, epsrel=1e-13, limit=500, full_output=True)[:3]
        if not np.isfinite(val) or err > tol or info.get("last", 0) >= 500:
            raise ValueError(
                f"Widom integrand for {h.id} not integrable to tolerance (error estimate {err:.2e})"
            )
        total += val
    return total / math.pi**2


def widom_halving_check(n: int):
    """``(W(p_n), W(q_n))``; the second should equal half the first."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return widom_coefficient(TestFunction("poly_p", n)), widom_coefficient(TestFunction("poly_q", n))


# --- Landau-Widom reference --------------------------------------------------

def lw_spectrum(alpha: float, spacing: float = SPACING, sign: int = 1) -> np.ndarray:
    """Nystrom eigenvalues of ``D_alpha^{+/-}``, descending."""
    x, w = section_nodes(alpha, spacing)
    sw = np.sqrt(w)
    M = sw[:, None] * lw_kernel(alpha, sign, x[:, None], x[None, :]) * sw[None, :]
    M = 0.5 * (M + M.T)
    return _checked_spectrum(M, LW_SPEC_TOL, "Landau-Widom operator")


def lw_trace(alpha: float, n: int, spacing: float = SPACING, spectrum=None) -> float:
    """``tr (D_alpha^+)^n`` via eigenvalue powers."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lam = lw_spectrum(alpha, spacing) if spectrum is None else spectrum
    return float(np.sum(np.clip(lam, 0.0, None) ** n))
