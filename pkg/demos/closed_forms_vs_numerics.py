"""Truncated Fock-space QFIs against their closed forms.

Run:  python3 demos/closed_forms_vs_numerics.py
"""
import numpy as np

from phaseref import ClosedFormInputs, InputParams, fq_i, fq_ii, fq_rho_balanced, probe_state
from phaseref.fisher import derivative_state, qfi_pure
from phaseref.optics import GeneratorConvention, generators
from phaseref.scenarios import Model, evaluate

# %% One input, a few beam-splitter settings
alpha, r = 1.0, 0.5
params = InputParams(alpha=alpha, r=r)
print(f"|alpha|^2 = {alpha**2:.3f}, sinh^2 r = {np.sinh(r)**2:.3f}, cutoffs {params.input_cutoffs()}")
print(f"{'tau':>5} {'F(i) num':>12} {'F(i) exact':>12} {'F(ii) num':>12} {'F(ii) exact':>12}")
for tau in (0.0, 0.25, 0.5, 0.75, 1.0):
    psi = probe_state(params, tau)
    (gi,) = generators(GeneratorConvention.UPPER_ONLY, psi.space)
    (gii,) = generators(GeneratorConvention.SYMMETRIC, psi.space)
    x = ClosedFormInputs(alpha, r, tau)
    print(f"{tau:5.2f} {qfi_pure(psi, derivative_state(psi, gi)).value:12.8f} {fq_i(x):12.8f} "
          f"{qfi_pure(psi, derivative_state(psi, gii)).value:12.8f} {fq_ii(x):12.8f}")

# %% Without an external reference the common phase is unobservable.
# Averaging over it leaves F_Q^rho, which peaks at tau = 1/2.
print("\ndephased input:")
for tau in (0.1, 0.3, 0.5):
    print(f"  tau = {tau:.1f}: F_Q^rho = {evaluate(Model.FQ_RHO, params, tau).metric:.8f}")
print(f"  closed form at tau = 1/2: {fq_rho_balanced(ClosedFormInputs(alpha, r)):.8f}")

# %% Convention (i) credits the probe with information it can only use
# if a phase reference exists.  At tau = 1 and r = 0 it claims 4|alpha|^2.
psi = probe_state(InputParams(alpha=alpha, r=0.0), 1.0)
(gi,) = generators(GeneratorConvention.UPPER_ONLY, psi.space)
print(f"\ncoherent light, tau = 1: F(i) = {qfi_pure(psi, derivative_state(psi, gi)).value:.6f} = 4|alpha|^2,"
      f" but F_Q^rho = {evaluate(Model.FQ_RHO, InputParams(alpha=alpha, r=0.0), 1.0).metric:.3g}")
