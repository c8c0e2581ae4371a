"""
Bands of the Mathieu potential
==============================

V(x) = 2 cos x.  Band edges come from the fibre spectra at k = 0 and
k = 1/2; the lowest band is very narrow because the potential wells are
deep compared to the kinetic energy needed to tunnel between them.
"""
import math

import numpy as np

from szegolab import band_structure, build_lambda_phi, integrated_density_of_states, potential_from_spec, solve_delta

V = potential_from_spec("cosine(1)")
bs = band_structure(V, 7.0)

print(" j   k_j       mu_j         nu_j      width     gap above")
for b, nxt in zip(bs.bands, bs.bands[1:] + (None,)):
    gap = f"{nxt.mu - b.nu:9.5f}" if nxt else "        -"
    print(f"{b.j:2d}  {b.k_j:3.1f}  {b.mu:11.6f}  {b.nu:11.6f}  {b.nu - b.mu:8.5f}  {gap}")

# Integrated density of states: flat across gaps, one band = 1/(2 pi).
for mu in (-1.2, -1.0, 0.0, 0.63, 1.0):
    print(f"N({mu:5.2f}) * 2 pi = {2 * math.pi * integrated_density_of_states(bs, mu):.6f}")

# Fermi momentum in the middle of band 2, and the unfolded Bloch function there.
gb = build_lambda_phi(V, bs.genuine[1])
mu = 0.5 * (gb.lower + gb.upper)
delta = solve_delta(gb, mu)
x = np.linspace(0, 2 * np.pi, 7)
print(f"\nmid band 2: mu = {mu:.6f}, delta = {delta:.6f}, Lambda(delta) - mu = {gb.lam(delta) - mu:.1e}")
print("|Phi(x, delta)|^2 * 2 pi on one period:", np.round(2 * np.pi * np.abs(gb.phi(x, delta)) ** 2, 4))
