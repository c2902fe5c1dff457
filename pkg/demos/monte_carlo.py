"""Maximum likelihood on simulated photon counts reaches the Cramer-Rao bound.

Run:  python3 demos/monte_carlo.py
"""
from phaseref import InputParams
from phaseref.estimation import run_estimation

params = InputParams(alpha=1.0, r=0.3)
for k in (1_000, 10_000, 100_000):
    run = run_estimation(params, tau=0.5, phi=0.3, k=k, trials=200, seed=2012)
    print(f"k = {k:>7}: std = {run.std:.3e}, 1/sqrt(kF) = {run.crb:.3e}, "
          f"ratio {run.std_ratio:.3f}, bias {run.bias:+.1e}")
