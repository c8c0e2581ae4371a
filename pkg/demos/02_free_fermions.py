"""
Free fermions: the sine kernel and the log law
==============================================

For V = 0 and Fermi energy mu = 1 the projection kernel is the sine kernel
sin(x - y) / (pi (x - y)).  The number of particles in (-alpha, alpha) is
2 alpha / pi, and tr p_1(B) grows like log(alpha) / pi^2.
"""
import math

import numpy as np

from szegolab import (
    assemble_section,
    band_structure,
    kernel_P,
    make_evaluator,
    parse_function,
    potential_from_spec,
    section_spectrum,
    trace_h,
)

bs = band_structure(potential_from_spec("zero"), 4.0)
ev = make_evaluator(bs, 1.0, alpha_max=100)

x = np.array([0.0, 0.0, 3.0])
y = np.array([0.5, 40.0, -90.0])
print("P(x, y)      :", kernel_P(ev, x, y))
print("sine kernel  :", np.sin(x - y) / (np.pi * (x - y)))

p1, lin = parse_function("p:1"), parse_function("linear")
alphas = [12.5, 25.0, 50.0, 100.0]
traces = []
for a in alphas:
    sp = section_spectrum(assemble_section(ev, a))
    traces.append(trace_h(sp, p1))
    print(f"alpha={a:6.1f}  tr B = {trace_h(sp, lin):9.4f} (2 alpha / pi = {2 * a / np.pi:9.4f})"
          f"  tr p_1(B) = {traces[-1]:.5f}")

# Successive doublings add log(2) / pi^2 to tr p_1(B).
steps = np.diff(traces) / math.log(2)
print("increment per log(alpha) * pi^2:", np.round(steps * math.pi**2, 4))
