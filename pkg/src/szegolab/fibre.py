"""Periodic potentials and the Floquet-Bloch fibre eigenproblems.

The fibre operator ``H(k) = -d^2/dx^2 + V`` with quasi-periodic boundary
conditions ``f(2 pi) = exp(2 pi i k) f(0)`` is discretised in the plane-wave
basis ``exp(i (n + k) x) / sqrt(2 pi)``, ``n = -N..N``.  Every basis element
satisfies the boundary condition exactly, and ``V`` acts as a banded
Toeplitz matrix of its Fourier coefficients.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla

__all__ = [
    "DEFAULT_CUTOFF",
    "RESIDUAL_TOL",
    "EigensolverError",
    "PeriodicPotential",
    "FibreEigenSystem",
    "potential_from_spec",
    "assemble_fibre_matrix",
    "solve_fibre",
    "fibre_system",
    "reduce_k",
]

DEFAULT_CUTOFF = 64
RESIDUAL_TOL = 1e-10
_REALITY_TOL = 1e-12


class EigensolverError(RuntimeError):
    """Raised when a fibre eigensolve misses the residual target."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (achieved residual {residual:.3e})")
        self.residual = residual


def reduce_k(k):
    """Map quasi-momenta onto ``[-1/2, 1/2)``, returning ``(k_reduced, shift)``.

    ``k = k_reduced + shift`` with integer ``shift``.
    """
    k = np.asarray(k, dtype=float)
    shift = np.floor(k + 0.5)
    return k - shift, shift.astype(int)


@dataclass(frozen=True)
class PeriodicPotential:
    """Real 2 pi-periodic potential ``V(x) = sum_m v_m exp(i m x)``.

    ``coefficients[m + order]`` holds ``v_m`` for ``m = -order..order``.
    """

    coefficients: np.ndarray
    order: int
    name: str = "custom"

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (2 * self.order + 1,):
            raise ValueError(
                f"expected {2 * self.order + 1} coefficients for order {self.order}, "
                f"got shape {c.shape}"
            )
        scale = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
        for m in range(1, self.order + 1):
            vp, vm = c[self.order + m], c[self.order - m]
            if abs(vm - np.conj(vp)) > _REALITY_TOL * scale:
                raise ValueError(
                    f"reality constraint violated at m={m}: v_-{m}={vm} is not "
                    f"conj(v_{m})={np.conj(vp)}"
                )
        if abs(c[self.order].imag) > _REALITY_TOL * scale:
            raise ValueError(f"reality constraint violated at m=0: v_0={c[self.order]}")
        c = c.copy()
        c[self.order] = c[self.order].real
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    def coefficient(self, m: int) -> complex:
        if abs(m) > self.order:
            return 0j
        return complex(self.coefficients[m + self.order])

    @property
    def is_real_even(self) -> bool:
        """True when all ``v_m`` are real, i.e. ``V(-x) = V(x)``."""
        return bool(np.all(self.coefficients.imag == 0))

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.coefficients == 0))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        m = np.arange(-self.order, self.order + 1)
        vals = np.exp(1j * np.multiply.outer(x, m)) @ self.coefficients
        return vals.real


_COSINE = re.compile(r"^\s*cosine\s*\(\s*([-+0-9.eE]+)\s*\)\s*$")


def potential_from_spec(spec, order: int | None = None) -> PeriodicPotential:
    """Build a potential from a preset name or a coefficient list.

    Parameters
    ----------
    spec : str, mapping or sequence
        ``"zero"``, ``"cosine(A)"`` (``V(x) = 2 A cos x``), a mapping
        ``{m: v_m}`` or a sequence of ``(m, v_m)`` pairs.
    order : int, optional
        Truncation order ``M``.  Defaults to the largest ``|m|`` present
        (1 for the cosine preset, 0 for ``"zero"``).

    Raises
    ------
    ValueError
        On unknown presets or when ``v_{-m} != conj(v_m)``; the message
        names the offending ``m``.
    """
    if isinstance(spec, str):
        name = spec.strip()
        if name == "zero":
            coeffs: dict[int, complex] = {}
        else:
            match = _COSINE.match(name)
            if match is None:
                raise ValueError(f"unknown potential preset {spec!r}")
            a = float(match.group(1))
            coeffs = {1: a, -1: a}
    else:
        items = spec.items() if isinstance(spec, Mapping) else spec
        coeffs = {}
        for m, v in items:
            coeffs[int(m)] = coeffs.get(int(m), 0) + complex(v)
        name = "custom"
    max_m = max((abs(m) for m in coeffs), default=0)
    if order is None:
        order = max_m
    if order < max_m:
        raise ValueError(f"order {order} smaller than largest coefficient index {max_m}")
    c = np.zeros(2 * order + 1, dtype=complex)
    for m, v in coeffs.items():
        c[m + order] = v
    return PeriodicPotential(c, order, name)


def assemble_fibre_matrix(V: PeriodicPotential, k: float, N: int = DEFAULT_CUTOFF) -> np.ndarray:
    """Plane-wave matrix of ``H(k)``: entry ``(m, n) = (n+k)^2 delta_mn + v_{m-n}``.

    Rows and columns are ordered ``n = -N..N``.  A real matrix is returned
    when every ``v_m`` is real.
    """
    if N < V.order:
        raise ValueError(f"cutoff N={N} is smaller than the potential order M={V.order}")
    size = 2 * N + 1
    col = np.zeros(size, dtype=complex)
    row = np.zeros(size, dtype=complex)
    M = V.order
    col[: M + 1] = V.coefficients[M:]
    row[: M + 1] = V.coefficients[M::-1]
    H = sla.toeplitz(col, row)
    n = np.arange(-N, N + 1)
    H[np.diag_indices(size)] += (n + k) ** 2
    if V.is_real_even:
        H = H.real.copy()
    return H


@dataclass(frozen=True)
class FibreEigenSystem:
    """Eigenpairs of one fibre matrix.

    Column ``j - 1`` of ``eigenvectors`` holds the coefficients of
    ``phi_j`` in the basis ``exp(i (n + k) x) / sqrt(2 pi)``.
    """

    k: float
    cutoff: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual_tol: float
    residual: float = field(default=0.0)

    @property
    def size(self) -> int:
        return 2 * self.cutoff + 1

    def _column(self, j: int) -> np.ndarray:
        if not 1 <= j <= self.eigenvectors.shape[1]:
            raise IndexError(f"band index {j} outside 1..{self.eigenvectors.shape[1]}")
        return self.eigenvectors[:, j - 1]

    def bloch(self, j: int, x):
        """``phi_j(x, k)``, evaluated from the Fourier sum for any real ``x``."""
        x = np.asarray(x, dtype=float)
        n = np.arange(-self.cutoff, self.cutoff + 1)
        waves = np.exp(1j * np.multiply.outer(x, n + self.k))
        return waves @ self._column(j) / np.sqrt(2 * np.pi)

    def periodic_part(self, j: int, x):
        """``e_j(x, k) = exp(-i k x) phi_j(x, k)`` and its x-derivative."""
        x = np.asarray(x, dtype=float)
        n = np.arange(-self.cutoff, self.cutoff + 1)
        waves = np.exp(1j * np.multiply.outer(x, n)) / np.sqrt(2 * np.pi)
        c = self._column(j)
        return waves @ c, waves @ (1j * n * c)


def _residuals(H, w, v):
    res = np.linalg.norm(H @ v - v * w, axis=0)
    return res


def solve_fibre(matrix: np.ndarray, k: float = 0.0, residual_tol: float = RESIDUAL_TOL) -> FibreEigenSystem:
    """Diagonalise a Hermitian fibre matrix (LAPACK Householder + QR/RRR).

    Raises
    ------
    EigensolverError
        If LAPACK fails to converge or any relative residual
        ``||H c - lambda c|| / ||H||`` exceeds ``residual_tol``.
    """
    H = np.asarray(matrix)
    size = H.shape[0]
    if (size - 1) % 2:
        raise ValueError("fibre matrix must have odd dimension 2N+1")
    try:
        w, v = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigensolver did not converge: {exc}") from exc
    norm = max(abs(w[0]), abs(w[-1]), 1e-300)
    achieved = float(np.max(_residuals(H, w, v)) / norm)
    if not achieved <= residual_tol:
        raise EigensolverError("fibre eigensolve missed residual target", achieved)
    return FibreEigenSystem(
        k=float(k),
        cutoff=(size - 1) // 2,
        eigenvalues=w,
        eigenvectors=v,
        residual_tol=residual_tol,
        residual=achieved,
    )


def fibre_system(V: PeriodicPotential, k: float, N: int = DEFAULT_CUTOFF) -> FibreEigenSystem:
    """Assemble and solve ``H(k)`` in one step."""
    return solve_fibre(assemble_fibre_matrix(V, k, N), k)


def fibre_batch(V: PeriodicPotential, ks, N: int, bands: int):
    """Lowest ``bands`` eigenpairs of ``H(k)`` for every ``k`` in ``ks``.

    Returns eigenvalues of shape ``(len(ks), bands)`` and eigenvectors of
    shape ``(len(ks), 2N+1, bands)``.  Residuals are checked as in
    :func:`solve_fibre`.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    size = 2 * N + 1
    if bands > size:
        raise ValueError(f"requested {bands} bands from a basis of size {size}")
    base = assemble_fibre_matrix(V, 0.0, N)
    n = np.arange(-N, N + 1)
    vals = np.empty((len(ks), bands))
    vecs = np.empty((len(ks), size, bands), dtype=base.dtype if base.dtype == float else complex)
    for i, k in enumerate(ks):
        H = base.copy()
        H[np.diag_indices(size)] += (n + k) ** 2 - n**2
        w, v = sla.eigh(H, subset_by_index=[0, bands - 1], driver="evr")
        norm = max(abs(w[0]), (N + abs(k)) ** 2, 1.0)
        achieved = float(np.max(_residuals(H, w, v)) / norm)
        if not achieved <= RESIDUAL_TOL:
            raise EigensolverError(f"fibre eigensolve at k={k} missed residual target", achieved)
        vals[i] = w
        vecs[i] = v
    return vals, vecs
