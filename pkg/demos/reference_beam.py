"""Bringing the reference along: a third coherent mode of amplitude beta.

The three-mode state is averaged over a common phase of all modes, so the
only usable reference is the beam itself.  As |beta| grows the bound on
phi_- approaches the external-reference value.

Run:  python3 demos/reference_beam.py      (a few minutes)
"""
from phaseref.scenarios import reference_beam_study

for eta in (1.0, 0.8):
    res = reference_beam_study(1.0, eta, [0.0, 0.5, 1.0, 2.0, 3.0])
    rep = res.report
    print(f"eta = {eta}: no reference {rep['no_reference_bound']:.5f}, "
          f"external reference {rep['external_reference_bound']:.5f}")
    for beta, d in zip(rep["beta_abs"], rep["delta_phi_minus"]):
        print(f"  |beta| = {beta:3.1f}: dphi_- = {d:.5f}")
    print(f"  non-increasing: {rep['non_increasing']}")
