import math

import numpy as np
import pytest

from szegolab import (
    EdgeError,
    ap_mean,
    decay_probe,
    kernel_P,
    kernel_Pi,
    kernel_R,
    lw_kernel,
    make_edge_evaluator,
    make_evaluator,
)
from szegolab.kernel import gauss_legendre_panels


def sine_kernel(x, y, mu=1.0):
    d = x - y
    s = math.sqrt(mu)
    return np.where(d == 0, s / np.pi, np.sin(s * d) / (np.pi * np.where(d == 0, 1, d)))


def test_gauss_legendre_panels_integrate_polynomials():
    x, w = gauss_legendre_panels(-2.0, 3.0, 7, 8)
    assert np.sum(w) == pytest.approx(5.0, abs=1e-14)
    assert np.sum(w * x**5) == pytest.approx((3.0**6 - 2.0**6) / 6, rel=1e-13)


def test_free_contributions(ev_free):
    (c,) = ev_free.contributions
    assert c.kind == "partial" and c.delta == pytest.approx(1.0, abs=1e-10)


def test_free_sine_kernel(ev_free, rng):
    x = rng.uniform(-50, 50, 500)
    y = x + rng.uniform(-100, 100, 500)
    assert np.max(np.abs(kernel_P(ev_free, x, y) - sine_kernel(x, y))) < 1e-7
    assert kernel_P(ev_free, 0.3, 0.3) == pytest.approx(1 / np.pi, abs=1e-12)


def test_free_pi_equals_p(ev_free, rng):
    x = rng.uniform(-20, 20, 50)
    y = rng.uniform(-20, 20, 50)
    assert np.max(np.abs(kernel_Pi(ev_free, x, y) - sine_kernel(x, y))) < 1e-12
    assert np.max(np.abs(kernel_R(ev_free, x, y))) < 1e-7
    assert kernel_Pi(ev_free, 1.5, 1.5) == pytest.approx(1 / np.pi, abs=1e-12)


def test_gap_single_full_contribution(ev_gap):
    assert [c.kind for c in ev_gap.contributions] == ["full"]
    assert not ev_gap.is_interior
    with pytest.raises(ValueError, match="not interior"):
        ev_gap.phi_delta()


def test_below_spectrum_is_zero(cosine_bs):
    ev = make_evaluator(cosine_bs, -3.0)
    assert ev.contributions == () and ev.n_nodes == 0
    assert kernel_P(ev, 0.1, 0.7) == 0.0
    assert np.array_equal(ev.matrix(np.linspace(0, 1, 4)), np.zeros((4, 4)))


def test_edge_rejected_and_edge_evaluator(cosine_bs, ev_gap):
    nu1 = cosine_bs.band(1).nu
    with pytest.raises(EdgeError, match="edge"):
        make_evaluator(cosine_bs, nu1)
    ev = make_edge_evaluator(cosine_bs, nu1, alpha_max=100)
    assert [c.kind for c in ev.contributions] == ["full"]
    x = np.array([0.0, 1.0, 5.0])
    assert np.allclose(ev.matrix(x), ev_gap.matrix(x), atol=1e-14)


def test_symmetry_lattice_covariance_positivity(ev_band2, rng):
    x = rng.uniform(-30, 30, 40)
    y = rng.uniform(-30, 30, 40)
    assert np.array_equal(kernel_P(ev_band2, x, y), kernel_P(ev_band2, y, x)) or np.allclose(
        kernel_P(ev_band2, x, y), kernel_P(ev_band2, y, x), atol=1e-15, rtol=0
    )
    shifted = kernel_P(ev_band2, x + 2 * np.pi, y + 2 * np.pi)
    assert np.max(np.abs(shifted - kernel_P(ev_band2, x, y))) < 1e-12
    assert np.all(kernel_P(ev_band2, x, x) >= 0)


def test_matrix_matches_pointwise(ev_band2):
    x = np.linspace(-3, 4, 6)
    y = np.linspace(-10, 9, 5)
    M = ev_band2.matrix(x, y)
    ref = kernel_P(ev_band2, x[:, None], y[None, :])
    assert np.max(np.abs(M - ref)) < 1e-14
    S = ev_band2.matrix(x)
    assert np.max(np.abs(S - kernel_P(ev_band2, x[:, None], x[None, :]))) < 1e-14


def test_node_doubling_stable(mid_band2, ev_band2):
    mu, bs = mid_band2
    fine = make_evaluator(bs, mu, alpha_max=100, points=16)
    x = np.array([0.0, 0.0, 1.3])
    y = np.array([200.0, 150.0, -198.7])
    scale = kernel_P(ev_band2, 0.0, 0.0)
    assert np.max(np.abs(kernel_P(fine, x, y) - kernel_P(ev_band2, x, y))) <= 1e-8 * scale


def test_diagonal_matches_density(ev_band2, mid_band2):
    mu, bs = mid_band2
    from szegolab import integrated_density_of_states

    x = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    mean = np.mean(kernel_P(ev_band2, x, x))
    assert mean == pytest.approx(integrated_density_of_states(bs, mu), abs=1e-10)


def test_idempotence_probe(ev_band2):
    z, w = gauss_legendre_panels(-195.0, 195.0, 390, 8)
    x = np.array([0.0, 0.4, -1.1])
    y = np.array([0.0, 2.5, 3.0])
    lhs = (ev_band2.matrix(x, z) * w) @ ev_band2.matrix(z, y)
    assert np.max(np.abs(lhs - ev_band2.matrix(x, y))) <= 1e-3


def test_pi_symmetric(ev_band2, rng):
    x = rng.uniform(-10, 10, 30)
    y = rng.uniform(-10, 10, 30)
    assert np.allclose(kernel_Pi(ev_band2, x, y), kernel_Pi(ev_band2, y, x), atol=1e-15, rtol=0)


def test_pi_diagonal_richardson(ev_band2):
    x0 = 0.37
    hs = 0.04 / 2 ** np.arange(4)
    vals = [kernel_Pi(ev_band2, x0, x0 + h) for h in hs]
    # Neville table in h^2 (the off-diagonal is even in h after symmetrisation)
    even = [0.5 * (kernel_Pi(ev_band2, x0, x0 + h) + kernel_Pi(ev_band2, x0, x0 - h)) for h in hs]
    table = list(even)
    for level in range(1, len(hs)):
        f = 4.0**level
        table = [(f * b - a) / (f - 1) for a, b in zip(table, table[1:])]
    assert abs(table[0] - kernel_Pi(ev_band2, x0, x0)) <= 1e-6
    assert np.all(np.isfinite(vals))


def test_decay_free_interior(ev_free):
    rep = decay_probe(ev_free, "interior", max_sep=100)
    assert rep.fitted_exponent == pytest.approx(-1.0, abs=0.1)
    assert np.all(np.diff(rep.separations) > 0) and np.all(rep.amplitudes >= 0)


def test_decay_gap_and_remainder(ev_gap, ev_band2):
    assert decay_probe(ev_gap, "gap-or-edge", max_sep=200).fitted_exponent <= -1.8
    assert decay_probe(ev_band2, "interior", max_sep=200, which="R").fitted_exponent <= -1.8


def test_decay_probe_errors(ev_free, ev_gap):
    with pytest.raises(ValueError, match="underdetermined"):
        decay_probe(ev_free, "interior", max_sep=15)
    with pytest.raises(ValueError, match="inconsistent"):
        decay_probe(ev_gap, "interior", max_sep=50)
    with pytest.raises(ValueError, match="resolution"):
        decay_probe(ev_free, "interior", max_sep=500)
    with pytest.raises(ValueError, match="unknown decay mode"):
        decay_probe(ev_free, "sideways", max_sep=50)


def test_ap_mean_constant():
    assert ap_mean(lambda x: np.full(x.shape, 2.5), 150.0) == pytest.approx(2.5, abs=1e-14)
    with pytest.raises(ValueError):
        ap_mean(np.cos, 50.0)


def test_ap_mean_cosine():
    assert abs(ap_mean(np.cos, 1000.0)) < 1e-3


def test_lw_kernel_closed_form():
    a = 10.0
    assert lw_kernel(a, 1, 0.0, 0.0) == pytest.approx(1 / (4 * np.pi**2 * 11))
    # direct quadrature of (4 pi^2)^-1 int_{a+1}^inf dz / ((z - x)(z - y))
    from scipy.integrate import quad

    direct = quad(lambda z: 1 / ((z - 5) * (z + 5)), 11, np.inf)[0] / (4 * np.pi**2)
    assert lw_kernel(a, 1, 5.0, -5.0) == pytest.approx(direct, rel=1e-10)
    assert lw_kernel(a, 1, 5.0, -5.0) == pytest.approx(np.log(16 / 6) / (40 * np.pi**2), rel=1e-12)


def test_lw_kernel_reflection_and_window(rng):
    x = rng.uniform(-9, 9, 20)
    y = rng.uniform(-9, 9, 20)
    assert np.allclose(lw_kernel(9.5, -1, x, y), lw_kernel(9.5, 1, -x, -y), rtol=0, atol=0)
    assert lw_kernel(5.0, 1, 5.0, 0.0) == 0.0
    assert lw_kernel(5.0, 1, 1.0, -6.0) == 0.0
    near = lw_kernel(10.0, 1, 2.0, 2.0 + 1e-10)
    assert near == pytest.approx(lw_kernel(10.0, 1, 2.0, 2.0), rel=1e-9)
