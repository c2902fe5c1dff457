"""How much does an external phase reference help once photons are lost?

Run:  python3 demos/loss_and_reference.py      (about a minute)
"""
from phaseref.scenarios import Model, optimize_inputs

# %% Optimise tau and the squeezing fraction f = sinh^2 r / n_bar for each
# model.  Lossless, the reference buys nothing for the difference phase.
# With eta < 1 it does.
for eta in (1.0, 0.8):
    print(f"eta = {eta}")
    for n_bar in (1.0, 2.0, 4.0):
        rho = optimize_inputs(n_bar, Model.FQ_RHO, eta)
        ext = optimize_inputs(n_bar, Model.QFIM_EXTERNAL_REF, eta)
        print(f"  n_bar = {n_bar:g}:  no reference dphi = {rho.evaluation.delta_phi:.5f} "
              f"(tau {rho.tau:.3f}, f {rho.fraction:.3f})   "
              f"external reference dphi_- = {ext.evaluation.delta_phi:.5f} "
              f"(tau {ext.tau:.3f}, f {ext.fraction:.3f})")
