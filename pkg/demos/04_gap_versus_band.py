"""
Gap versus band: kernel decay and bounded traces
================================================

With mu inside a band the projection kernel decays like 1/|x - y| and
tr p_1(B) grows logarithmically.  With mu in a gap the kernel decays
faster than any power we can resolve and tr p_1(B) stays bounded.
"""
import numpy as np

from szegolab import (
    assemble_section,
    decay_probe,
    make_evaluator,
    parse_function,
    potential_from_spec,
    schatten_q,
    section_spectrum,
    trace_h,
)
from szegolab.experiments import resolve_mu

V = potential_from_spec("cosine(1)")
p1 = parse_function("p:1")

for label, where, mode in (("band 2", "mid-band:2", "interior"), ("gap 1 ", "mid-gap:1", "gap-or-edge")):
    mu, bs = resolve_mu(V, where, 64)
    ev = make_evaluator(bs, mu, alpha_max=100)
    rep = decay_probe(ev, mode, max_sep=200)
    print(f"{label}: mu = {mu:.5f}, envelope exponent of P = {rep.fitted_exponent:.2f}")
    if mode == "interior":
        r = decay_probe(ev, mode, max_sep=200, which="R")
        print(f"        remainder P - Pi decays with exponent {r.fitted_exponent:.2f}")
    for a in (25.0, 50.0, 100.0):
        sp = section_spectrum(assemble_section(ev, a))
        print(f"        alpha={a:5.0f}  tr p_1(B) = {trace_h(sp, p1):.5f}   sum sqrt(l(1-l)) = {schatten_q(sp, 0.5):.4f}")
