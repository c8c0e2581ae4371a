"""Shared fixtures: potentials, band structures and kernel evaluators.

Evaluators are expensive (a few seconds each) so they are session-scoped.
"""
import numpy as np
import pytest

from szegolab import band_structure, make_evaluator, potential_from_spec
from szegolab.experiments import resolve_mu

# Band edges of V(x) = 2 cos x.  Substituting x = 2z maps -f'' + 2 cos(x) f = E f
# to Mathieu's equation with a = 4E, q = 4; values below are
# scipy.special.mathieu_a / mathieu_b at q = 4, divided by 4, i.e. independent
# of the plane-wave assembly.  Order: mu_1, nu_1, mu_2, nu_2, ...
COSINE_EDGES = (
    -1.0701297045756306,
    -1.0647957251402358,
    0.5795020425266311,
    0.6867202567981645,
    1.7072687086415974,
    2.3153615330265858,
    2.6677567758801377,
    4.113008822532203,
    4.162454726704294,
    6.332636217943359,
)


@pytest.fixture(scope="session")
def free():
    return potential_from_spec("zero")


@pytest.fixture(scope="session")
def cosine():
    return potential_from_spec("cosine(1)")


@pytest.fixture(scope="session")
def free_bs(free):
    return band_structure(free, 12.0)


@pytest.fixture(scope="session")
def cosine_bs(cosine):
    return band_structure(cosine, 10.0)


@pytest.fixture(scope="session")
def mid_band2(cosine):
    return resolve_mu(cosine, "mid-band:2", 64)


@pytest.fixture(scope="session")
def mid_gap1(cosine):
    return resolve_mu(cosine, "mid-gap:1", 64)


@pytest.fixture(scope="session")
def ev_free(free_bs):
    return make_evaluator(free_bs, 1.0, alpha_max=60)


@pytest.fixture(scope="session")
def ev_band2(mid_band2):
    mu, bs = mid_band2
    return make_evaluator(bs, mu, alpha_max=100)


@pytest.fixture(scope="session")
def ev_gap(mid_gap1):
    mu, bs = mid_gap1
    return make_evaluator(bs, mu, alpha_max=100)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# --- acceptance summary --------------------------------------------------------

ACCEPTANCE: dict = {}


def record(n: int, passed: bool, detail: str) -> None:
    """Store and print one pass/fail line for acceptance criterion ``n``."""
    line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
