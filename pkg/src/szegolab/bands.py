"""Band structure, genuine bands and the unfolded Bloch data ``Lambda``/``Phi``.

Bands are indexed from 1.  Band ``j`` has its lower edge at ``k_j`` (0 for
odd ``j``, 1/2 for even ``j``) and its upper edge half a period further.
Touching bands are merged into genuine bands, along which the eigenvalue
branches are unfolded into one increasing function ``Lambda(k)`` on
``[k_j, k_j + n/2]`` and one eigenfunction ``Phi(x, k)`` that is continuous
in ``k``.  Values for ``k < k_j`` follow from the reflection
``Phi(x, 2 k_j - k) = conj(Phi(x, k))``.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .fibre import (
    DEFAULT_CUTOFF,
    PeriodicPotential,
    assemble_fibre_matrix,
    fibre_batch,
    reduce_k,
)

__all__ = [
    "TOUCH_TOL",
    "EDGE_TOL",
    "K_GRID",
    "GaugeError",
    "Band",
    "GenuineBand",
    "BandStructure",
    "MuClass",
    "BlochSampler",
    "compute_bands",
    "group_genuine",
    "band_structure",
    "build_lambda_phi",
    "integrated_density_of_states",
    "classify_mu",
    "solve_delta",
    "band_eigenvalue",
]

TOUCH_TOL = 1e-9
EDGE_TOL = 1e-6
K_GRID = 512
_CONVERGENCE_TOL = 1e-6


class GaugeError(RuntimeError):
    pass


def band_eigenvalue(V: PeriodicPotential, m: int, k: float, N: int) -> float:
    """``lambda_m(k)`` for a single band index ``m`` (1-based)."""
    kred, _ = reduce_k(k)
    H = assemble_fibre_matrix(V, float(abs(kred)), N)
    return float(sla.eigvalsh(H, subset_by_index=[m - 1, m - 1])[0])


@dataclass(frozen=True)
class Band:
    """Elementary band ``sigma_j = [mu_j, nu_j]``."""

    j: int
    mu: float
    nu: float

    @property
    def k_j(self) -> float:
        return 0.0 if self.j % 2 else 0.5


@dataclass(frozen=True)
class GenuineBand:
    """A maximal group of touching bands ``S = [mu_j, nu_{j+n-1}]``.

    ``multiplicity`` is ``None`` when the grouping ran into the energy
    cutoff, in which case ``upper`` is ``inf``.
    """

    start: int
    multiplicity: int | None
    lower: float
    upper: float
    potential: PeriodicPotential
    cutoff: int
    sampler: "BlochSampler | None" = field(default=None, compare=False, repr=False)

    @property
    def unbounded(self) -> bool:
        return self.multiplicity is None

    @property
    def k_j(self) -> float:
        return 0.0 if self.start % 2 else 0.5

    @property
    def k_end(self) -> float:
        if self.multiplicity is None:
            return math.inf
        return self.k_j + self.multiplicity / 2

    def band_indices(self, last: int | None = None) -> range:
        if self.multiplicity is None:
            return range(self.start, (last or self.start) + 1)
        return range(self.start, self.start + self.multiplicity)

    def segment(self, k: float) -> int:
        """Index ``l`` of the half-period segment containing ``k >= k_j``."""
        l = int(math.floor(2 * (k - self.k_j)))
        if self.multiplicity is not None:
            l = min(l, self.multiplicity - 1)
        return max(l, 0)

    def lam(self, k):
        """Unfolded band function ``Lambda(k)``, symmetric about ``k_j``."""
        ks = np.atleast_1d(np.asarray(k, dtype=float))
        out = np.empty(ks.shape)
        for i, kk in enumerate(ks.flat):
            kk = self.k_j + abs(kk - self.k_j)
            m = self.start + self.segment(kk)
            if m > self.cutoff:
                raise ValueError(
                    f"Lambda at k={kk} needs band {m}, beyond what cutoff N={self.cutoff} resolves"
                )
            out.flat[i] = band_eigenvalue(self.potential, m, kk, self.cutoff)
        return out if np.ndim(k) else float(out[0])

    def _require_sampler(self) -> "BlochSampler":
        if self.sampler is None:
            raise RuntimeError("genuine band has no Phi sampler; call build_lambda_phi first")
        return self.sampler

    def phi(self, x, k: float):
        """Gauge-fixed ``Phi(x, k)``."""
        return self._require_sampler().phi(x, k)

    def dphi_dx(self, x, k: float):
        return self._require_sampler().dphi_dx(x, k)


@dataclass(frozen=True)
class BandStructure:
    potential: PeriodicPotential
    cutoff: int
    e_max: float
    bands: tuple
    next_mu: float
    genuine: tuple = ()
    touch_tol: float = TOUCH_TOL

    def band(self, j: int) -> Band:
        return self.bands[j - 1]


@dataclass(frozen=True)
class MuClass:
    """Position of an energy relative to the spectrum.

    ``kind`` is ``"interior"``, ``"gap"`` or ``"edge"``; ``genuine`` is the
    index into ``BandStructure.genuine`` of the band containing or touching
    ``mu`` (``None`` in a gap); ``bands`` are the elementary band indices.
    """

    kind: str
    genuine: int | None = None
    bands: tuple = ()

    def __str__(self):
        return self.kind


def compute_bands(V: PeriodicPotential, e_max: float, N: int = DEFAULT_CUTOFF) -> BandStructure:
    """Band edges up to ``e_max`` from the fibre spectra at ``k = 0, 1/2``.

    Bands with ``nu_j <= e_max`` are returned together with the first band
    reaching above ``e_max``.  The edges are cross-checked against a solve
    with cutoff ``2N``.
    """
    lam0 = np.linalg.eigvalsh(assemble_fibre_matrix(V, 0.0, N))
    lamh = np.linalg.eigvalsh(assemble_fibre_matrix(V, 0.5, N))
    if e_max <= lam0[0]:
        raise ValueError(f"e_max={e_max} is not above inf spectrum {lam0[0]}")
    edges = []
    for j in range(1, len(lam0) + 1):
        lo, hi = (lam0, lamh) if j % 2 else (lamh, lam0)
        edges.append((lo[j - 1], hi[j - 1]))
        if hi[j - 1] > e_max or (j < len(lam0) and min(lam0[j], lamh[j]) > e_max):
            break
    count = len(edges)
    if count + 1 > N:
        raise ValueError(
            f"cutoff N={N} too small for e_max={e_max}: needs {count + 1} bands; increase N"
        )
    lam0b = np.linalg.eigvalsh(assemble_fibre_matrix(V, 0.0, 2 * N))[: count + 1]
    lamhb = np.linalg.eigvalsh(assemble_fibre_matrix(V, 0.5, 2 * N))[: count + 1]
    drift = max(np.max(np.abs(lam0b - lam0[: count + 1])), np.max(np.abs(lamhb - lamh[: count + 1])))
    if drift > _CONVERGENCE_TOL:
        raise ValueError(
            f"band edges not converged at cutoff N={N} (N vs 2N drift {drift:.2e}); increase N"
        )
    bands = tuple(Band(j, float(lo), float(hi)) for j, (lo, hi) in enumerate(edges, start=1))
    nxt = count + 1
    next_mu = float((lam0 if nxt % 2 else lamh)[nxt - 1])
    return BandStructure(V, N, float(e_max), bands, next_mu)


def group_genuine(bs: BandStructure, touch_tol: float = TOUCH_TOL) -> BandStructure:
    """Merge bands whose separating gap is at most ``touch_tol``."""
    groups = [[bs.bands[0]]]
    for prev, band in zip(bs.bands, bs.bands[1:]):
        if band.mu - prev.nu <= touch_tol:
            groups[-1].append(band)
        else:
            groups.append([band])
    genuine = []
    for i, g in enumerate(groups):
        open_ended = i == len(groups) - 1 and bs.next_mu - g[-1].nu <= touch_tol
        genuine.append(
            GenuineBand(
                start=g[0].j,
                multiplicity=None if open_ended else len(g),
                lower=g[0].mu,
                upper=math.inf if open_ended else g[-1].nu,
                potential=bs.potential,
                cutoff=bs.cutoff,
            )
        )
    return replace(bs, genuine=tuple(genuine), touch_tol=touch_tol)


def band_structure(V, e_max, N=DEFAULT_CUTOFF, touch_tol=TOUCH_TOL) -> BandStructure:
    return group_genuine(compute_bands(V, e_max, N), touch_tol)


def classify_mu(bs: BandStructure, mu: float, edge_tol: float = EDGE_TOL) -> MuClass:
    if mu > bs.e_max:
        raise ValueError(f"mu={mu} above the band-structure cutoff e_max={bs.e_max}")
    for i, gb in enumerate(bs.genuine):
        near_lower = abs(mu - gb.lower) <= edge_tol
        near_upper = math.isfinite(gb.upper) and abs(mu - gb.upper) <= edge_tol
        last = gb.start if gb.unbounded else gb.start + gb.multiplicity - 1
        if near_lower or near_upper:
            return MuClass("edge", i, (gb.start, last))
        if gb.lower < mu < gb.upper:
            inner = [b.j for b in bs.bands if b.j >= gb.start and b.mu < mu]
            if not gb.unbounded:
                inner = [j for j in inner if j <= last]
            return MuClass("interior", i, (gb.start, max(inner)))
    return MuClass("gap")


def solve_delta(gb: GenuineBand, mu: float) -> float:
    """Quasi-momentum ``delta`` in ``(k_j, k_j + n/2)`` with ``Lambda(delta) = mu``."""
    if not gb.lower < mu < gb.upper:
        raise ValueError(f"mu={mu} not interior to genuine band [{gb.lower}, {gb.upper}]")
    lo = gb.k_j
    if gb.unbounded:
        hi = lo + 0.5
        while gb.lam(hi) < mu:
            lo, hi = hi, gb.k_j + 2 * (hi - gb.k_j)
    else:
        hi = gb.k_end
    tol = 1e-10 * max(1.0, abs(mu))
    # plain bisection on the monotone branch, run until the bracket stops shrinking
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        val = gb.lam(mid)
        if val == mu:
            break
        if val < mu:
            lo = mid
        else:
            hi = mid
    err = abs(gb.lam(mid) - mu)
    if err > tol:
        raise RuntimeError(f"bisection for delta stalled at |Lambda - mu| = {err:.2e}")
    return mid


def integrated_density_of_states(bs: BandStructure, mu: float) -> float:
    """``N(mu; H)``: filled bands count ``1/(2 pi)`` each, partial bands by measure."""
    if mu > bs.e_max:
        raise ValueError(f"mu={mu} above the band-structure cutoff e_max={bs.e_max}")
    total = 0.0
    for gb in bs.genuine:
        if mu <= gb.lower:
            break
        if mu >= gb.upper:
            total += gb.multiplicity / (2 * math.pi)
        else:
            delta = solve_delta(gb, mu)
            total += (delta - gb.k_j) / math.pi
    return total


def _real_gauge(c, kred):
    """Rotate ``c`` so that ``Phi`` is real-valued (exact when ``2k`` is an integer)."""
    n = len(c) // 2
    shift = int(round(-2 * kred))  # sigma(n) = -n - 2k
    idx = np.arange(-n, n + 1)
    partner = -idx + shift
    ok = np.abs(partner) <= n
    s = np.sum(c[ok] * c[partner[ok] + n])
    if abs(s) > 1e-8:
        c = c * np.exp(-0.5j * np.angle(s))
    top = np.argmax(np.abs(c))
    ref = c[top].real if abs(c[top].real) > 1e-12 else c[top].imag
    if ref < 0:
        c = -c
    return c


def _overlap(ca, sa, cb, sb):
    """``<E_a, E_b>`` on the absolute Fourier index ``m = n - shift``."""
    d = sb - sa
    size = len(ca)
    if d >= 0:
        return np.vdot(ca[: size - d], cb[d:]) if d < size else 0j
    return np.vdot(ca[-d:], cb[: size + d]) if -d < size else 0j


class BlochSampler:
    """Gauge-fixed eigenvector grid for one genuine band.

    Nodes are laid out per half-period segment and phase-aligned by maximal
    overlap with the previous node.  Requests between nodes are re-solved
    and aligned to the nearest stored node.
    """

    def __init__(self, gb: GenuineBand, k_grid: int = K_GRID):
        self.gb = gb
        self.k_grid = k_grid
        self.N = gb.cutoff
        self._segments: dict[int, tuple] = {}
        self._cache: dict[float, tuple] = {}
        self._lock = threading.RLock()

    # --- node construction -------------------------------------------------
    def _limit_vector(self, V, kred, m, vals, vecs):
        """One-sided limit at a touching point: larger-velocity member of the pair."""
        pair = [m - 2, m - 1] if abs(vals[m - 1] - vals[m - 2]) < self._deg_tol(vals[m - 1]) else [m - 1, m]
        U = vecs[:, pair]
        n = np.arange(-self.N, self.N + 1)
        vel = (U.conj().T * (2 * (n + kred))) @ U
        w, z = np.linalg.eigh(vel)
        return U @ z[:, -1]

    @staticmethod
    def _deg_tol(lam):
        return 1e-8 * max(1.0, abs(lam))

    def _solve_node(self, k: float, m: int):
        V = self.gb.potential
        kred, shift = reduce_k(k)
        kred, shift = float(kred), int(shift)
        vals, vecs = fibre_batch(V, [kred], self.N, m + 1)
        vals, vecs = vals[0], vecs[0].astype(complex)
        below = m >= 2 and abs(vals[m - 1] - vals[m - 2]) < self._deg_tol(vals[m - 1])
        above = abs(vals[m] - vals[m - 1]) < self._deg_tol(vals[m - 1])
        if below or above:
            c = self._limit_vector(V, kred, m, vals, vecs)
        else:
            c = vecs[:, m - 1]
        return kred, shift, c

    def _build_segment(self, l: int):
        gb = self.gb
        m = gb.start + l
        if m > self.N:
            raise ValueError(f"segment {l} needs band {m}, beyond cutoff N={self.N}")
        ks = gb.k_j + l / 2 + np.arange(self.k_grid + 1) / (2 * self.k_grid)
        nodes = [self._solve_node(k, m) for k in ks]
        if l == 0:
            kred, shift, c = nodes[0]
            nodes[0] = (kred, shift, _real_gauge(c, kred))
            prev = nodes[0]
            start = 1
        else:
            prev = self.segment(l - 1)[1][-1]
            start = 0
        aligned = nodes[:start]
        for kred, shift, c in nodes[start:]:
            ov = _overlap(prev[2], prev[1], c, shift)
            if abs(ov) < 0.5:
                raise GaugeError(
                    f"k grid too coarse for gauge continuity (overlap {abs(ov):.3f} near k={kred + shift})"
                )
            c = c * (np.conj(ov) / abs(ov))
            prev = (kred, shift, c)
            aligned.append(prev)
        return ks, aligned

    def segment(self, l: int):
        with self._lock:
            if l not in self._segments:
                self._segments[l] = self._build_segment(l)
            return self._segments[l]

    # --- sampling ----------------------------------------------------------
    def coefficients(self, k: float):
        """``(k_reduced, c)`` with ``Phi(x, k) = sum_n c_n exp(i (n + k_reduced) x) / sqrt(2 pi)``."""
        k = float(k)
        gb = self.gb
        with self._lock:
            if k in self._cache:
                return self._cache[k]
        if k < gb.k_j:
            kr, c = self.coefficients(2 * gb.k_j - k)
            out = (-kr, np.conj(c[::-1]))
        else:
            if k > gb.k_end:
                raise ValueError(f"k={k} beyond the genuine band end {gb.k_end}")
            l = gb.segment(k)
            ks, nodes = self.segment(l)
            i = int(np.argmin(np.abs(ks - k)))
            if ks[i] == k:
                kred, _, c = nodes[i]
            else:
                kred, shift, c = self._solve_node(k, gb.start + l)
                ov = _overlap(nodes[i][2], nodes[i][1], c, shift)
                if abs(ov) < 0.5:
                    raise GaugeError(f"k grid too coarse for gauge continuity near k={k}")
                c = c * (np.conj(ov) / abs(ov))
            out = (kred, c)
        with self._lock:
            # first computed value wins, so concurrent readers agree
            return self._cache.setdefault(k, out)

    def _waves(self, x, kred):
        x = np.asarray(x, dtype=float)
        n = np.arange(-self.N, self.N + 1)
        return np.exp(1j * np.multiply.outer(x, n + kred)) / np.sqrt(2 * np.pi), n + kred

    def phi(self, x, k: float):
        kred, c = self.coefficients(k)
        waves, _ = self._waves(x, kred)
        return waves @ c

    def dphi_dx(self, x, k: float):
        kred, c = self.coefficients(k)
        waves, freq = self._waves(x, kred)
        return waves @ (1j * freq * c)


def build_lambda_phi(V: PeriodicPotential, S: GenuineBand, k_grid: int = K_GRID) -> GenuineBand:
    """Attach a gauge-fixed ``Phi`` sampler to a genuine band descriptor.

    Segments of the unfolded grid are built on first use; bounded bands
    are built in full up front.
    """
    if S.potential is not V and not np.array_equal(S.potential.coefficients, V.coefficients):
        raise ValueError("genuine band was computed for a different potential")
    gb = replace(S, sampler=None)
    sampler = BlochSampler(gb, k_grid)
    if gb.multiplicity is not None:
        for l in range(gb.multiplicity):
            sampler.segment(l)
    else:
        sampler.segment(0)
    return replace(gb, sampler=sampler)
