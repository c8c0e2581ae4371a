"""Randomised invariants."""
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from szegolab import (
    TestFunction,
    assemble_fibre_matrix,
    assemble_section,
    band_structure,
    kernel_P,
    lw_kernel,
    parse_function,
    potential_from_spec,
    section_spectrum,
    trace_h,
    widom_coefficient,
)
from szegolab.experiments import fmt
from szegolab.fibre import reduce_k

finite = dict(allow_nan=False, allow_infinity=False)
coef = st.floats(-2, 2, **finite)
fixture_ok = settings(suppress_health_check=[HealthCheck.function_scoped_fixture], deadline=None)


@st.composite
def potentials(draw, max_order=3, real_even=False):
    M = draw(st.integers(0, max_order))
    coeffs = {0: draw(coef)}
    for m in range(1, M + 1):
        v = complex(draw(coef), 0 if real_even else draw(coef))
        coeffs[m], coeffs[-m] = v, v.conjugate()
    return potential_from_spec(coeffs, order=M)


@given(potentials(), st.floats(-0.5, 0.5, exclude_max=True, **finite))
@settings(max_examples=40, deadline=None)
def test_fibre_matrix_hermitian(V, k):
    H = assemble_fibre_matrix(V, k, 6)
    assert np.max(np.abs(H - H.conj().T)) == 0.0


@given(potentials(), st.floats(0, 0.5, **finite))
@settings(max_examples=30, deadline=None)
def test_eigenvalues_even_in_k(V, k):
    a = np.linalg.eigvalsh(assemble_fibre_matrix(V, k, 12))
    b = np.linalg.eigvalsh(assemble_fibre_matrix(V, -k, 12))
    assert np.max(np.abs(a - b)) <= 1e-10 * max(1.0, np.max(np.abs(a)))


@given(st.floats(-0.5, 0.5, exclude_max=True, **finite), st.integers(1, 8))
@settings(max_examples=30, deadline=None)
def test_free_spectrum_multiset(k, N):
    lam = np.linalg.eigvalsh(assemble_fibre_matrix(potential_from_spec("zero"), k, N))
    ref = np.sort((np.arange(-N, N + 1) + k) ** 2)
    assert np.allclose(lam, ref, atol=1e-12)


@given(st.floats(-50, 50, **finite))
def test_reduce_k(k):
    kr, s = reduce_k(k)
    assert -0.5 <= kr < 0.5
    assert kr + s == pytest.approx(k, abs=1e-12)


@given(st.floats(0.05, 1.5, **finite))
@settings(max_examples=8, deadline=None)
def test_lambda_sampled_monotone(A):
    V = potential_from_spec(f"cosine({A!r})")
    bs = band_structure(V, 3.0, 32)
    for gb in bs.genuine[:2]:
        if gb.unbounded:
            continue
        ks = np.linspace(gb.k_j, gb.k_end, 200)
        assert np.all(np.diff(gb.lam(ks)) > 0)


@given(st.floats(-1e6, 1e6, **finite))
def test_fmt_roundtrip(x):
    assert float(fmt(x)) == x


@given(st.floats(-3, 3, **finite), st.floats(-3, 3, **finite))
@settings(max_examples=25, deadline=None)
def test_trace_linearity(a, b):
    lam = np.linspace(0, 1, 37)
    from szegolab import SectionSpectrum

    sp = SectionSpectrum(lam)
    h1, h2 = parse_function("p:2"), parse_function("renyi:2")
    combo = TestFunction.custom(lambda t: a * h1(t) + b * h2(t))
    lhs = trace_h(sp, combo)
    rhs = a * trace_h(sp, h1) + b * trace_h(sp, h2)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(a) + abs(b)) * len(lam))


@given(st.floats(-3, 3, **finite), st.floats(-3, 3, **finite))
@settings(max_examples=10, deadline=None)
def test_widom_linearity(a, b):
    h1, h2 = parse_function("q:2"), parse_function("vn")
    combo = TestFunction.custom(lambda t: a * h1(t) + b * h2(t))
    assert widom_coefficient(combo) == pytest.approx(
        a * widom_coefficient(h1) + b * widom_coefficient(h2), abs=1e-9
    )


@given(st.floats(5, 50, **finite), st.floats(-1, 1, **finite), st.floats(-1, 1, **finite))
def test_lw_kernel_symmetric_positive_diagonal(alpha, u, v):
    x, y = 0.999 * alpha * u, 0.999 * alpha * v
    assert lw_kernel(alpha, 1, x, y) == pytest.approx(lw_kernel(alpha, 1, y, x), rel=1e-12)
    assert lw_kernel(alpha, 1, x, x) > 0


@given(st.lists(st.floats(-40, 40, **finite), min_size=2, max_size=2))
@fixture_ok
def test_kernel_symmetric_and_periodic(ev_band2, xy):
    x, y = xy
    p = kernel_P(ev_band2, x, y)
    assert p == pytest.approx(kernel_P(ev_band2, y, x), abs=1e-15)
    assert kernel_P(ev_band2, x + 2 * math.pi, y + 2 * math.pi) == pytest.approx(p, abs=1e-12)
    assert kernel_P(ev_band2, x, x) >= 0


@given(st.floats(5, 30, **finite))
@settings(max_examples=6, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
def test_section_containment(ev_band2, alpha):
    fs = assemble_section(ev_band2, alpha)
    assert np.sum(fs.weights) == pytest.approx(2 * alpha, abs=1e-11)
    assert fs.hermitian_defect <= 1e-10
    lam = section_spectrum(fs).eigenvalues
    assert lam[-1] >= -1e-6 and lam[0] <= 1 + 1e-6
