"""
Where the window ends matters
=============================

In a periodic potential the O(1) term of tr p_1(B) depends on where the
cut at +-alpha falls relative to the lattice.  For V = 2 cos x the lowest
band is built from states bound in the wells at x = pi (2m + 1), so a well
sitting close to the cut adds a sizeable, alpha-dependent constant.

Fitting a * alpha + b * log(alpha) + c over alpha = 25 * 2^k mixes this
oscillating constant into b.  Taking alpha on the lattice (multiples of
2 pi) keeps the phase fixed and the fitted b lands on 1 / pi^2.
"""
import math

import numpy as np

from szegolab import assemble_section, make_evaluator, parse_function, potential_from_spec, section_spectrum, trace_h
from szegolab.experiments import resolve_mu

V = potential_from_spec("cosine(1)")
mu, bs = resolve_mu(V, "mid-band:2", 64)
ev = make_evaluator(bs, mu, alpha_max=210)
p1 = parse_function("p:1")


def fit_b(alphas):
    t = [trace_h(section_spectrum(assemble_section(ev, a)), p1) for a in alphas]
    A = np.column_stack([np.log(alphas), np.ones(len(alphas))])
    return np.linalg.lstsq(A, t, rcond=None)[0][0], t


for label, grid in (("alpha = 25 * 2^k   ", [25.0, 50.0, 100.0, 200.0]),
                    ("alpha = 8 pi * 2^k ", [8 * math.pi * 2**k for k in range(4)])):
    b, t = fit_b(grid)
    dist = [min(abs(a - math.pi * (2 * m + 1)) for m in range(-1, int(a))) for a in grid]
    print(f"{label} b * pi^2 = {b * math.pi**2:.4f}   traces {np.round(t, 4)}")
    print(f"{'':20s} distance from cut to nearest well: {np.round(dist, 2)}")

# Sliding the window by a fraction of a period at fixed size shows the constant directly.
print("\ntr p_1(B) as the cut moves through one lattice period (alpha ~ 50):")
for s in np.linspace(0, 2 * math.pi, 9):
    a = 16 * math.pi + s
    print(f"  alpha = {a:8.4f}  tr p_1 = {trace_h(section_spectrum(assemble_section(ev, a)), p1):.5f}")
