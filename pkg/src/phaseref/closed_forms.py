"""Analytic QFI expressions for the coherent + squeezed-vacuum interferometer.

All formulas assume the optimal relative input phase (see
:class:`phaseref.states.InputParams`) and are evaluated exactly as written,
without simplification; they serve as oracles for the numerical path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fisher import FisherMatrix


@dataclass(frozen=True)
class ClosedFormInputs:
    alpha_mag: float
    r_mag: float
    tau: float = 0.5

    def __post_init__(self):
        if self.alpha_mag < 0 or self.r_mag < 0:
            raise ValueError("alpha_mag and r_mag must be non-negative")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")

    @property
    def n_bar(self) -> float:
        return self.alpha_mag**2 + np.sinh(self.r_mag) ** 2


def frak_F(x: ClosedFormInputs) -> float:
    a2, r, t = x.alpha_mag**2, x.r_mag, x.tau
    return 4 * t * (1 - t) * (a2 * np.exp(2 * r) + np.sinh(r) ** 2)


def frak_G(x: ClosedFormInputs) -> float:
    return x.alpha_mag**2 + np.sinh(2 * x.r_mag) ** 2 / 2


def frak_H(x: ClosedFormInputs) -> float:
    return np.sinh(2 * x.r_mag) ** 2 / 2 - x.alpha_mag**2


def fq_i(x: ClosedFormInputs) -> float:
    """QFI with the phase carried by the upper arm only."""
    a2, r, t = x.alpha_mag**2, x.r_mag, x.tau
    return 4 * t**2 * a2 + 2 * (1 - t) ** 2 * np.sinh(2 * r) ** 2 + frak_F(x)


def fq_ii(x: ClosedFormInputs) -> float:
    """QFI with the phase split antisymmetrically between the arms."""
    a2, r, t = x.alpha_mag**2, x.r_mag, x.tau
    return (1 - 2 * t) ** 2 * (a2 + 0.5 * np.sinh(2 * r) ** 2) + frak_F(x)


def fq_rho_balanced(x: ClosedFormInputs) -> float:
    """QFI of the phase-averaged input at tau = 1/2 (its maximum over tau)."""
    return x.alpha_mag**2 * np.exp(2 * x.r_mag) + np.sinh(x.r_mag) ** 2


def qfim_analytic(x: ClosedFormInputs) -> FisherMatrix:
    """Two-phase QFIM against an external reference, in the (phi+, phi-) basis."""
    s = 1 - 2 * x.tau
    g, h = frak_G(x), frak_H(x)
    mat = np.array([[g, s * h], [s * h, s**2 * g + frak_F(x)]])
    return FisherMatrix(("phi+", "phi-"), mat)
