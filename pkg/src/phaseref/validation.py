"""Oracle cross-checks run by ``phaseref validate``.

Each check compares two independent routes to the same number: the Fock
space pipeline against the closed forms, the factored QFI against the dense
SLD construction, photon counting against the dephased QFI, and so on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .closed_forms import ClosedFormInputs, fq_i, fq_ii, fq_rho_balanced, qfim_analytic
from .estimation import CountingModel
from .fisher import (
    derivative_state,
    qfi_mixed,
    qfi_pure,
    qfim_factored,
    qfim_mixed,
    qfim_pure,
    to_plus_minus,
)
from .fock import CutoffPolicy, DensityOperator, FactoredDensity, FockSpace
from .optics import GeneratorConvention, LossModel, beam_splitter, generators, loss_channel, probe_state
from .states import InputParams, dephase_common, interferometer_input, interferometer_space

UPPER, SYMMETRIC, TWO = (GeneratorConvention.UPPER_ONLY, GeneratorConvention.SYMMETRIC,
                         GeneratorConvention.TWO_PARAM)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    reference: float
    tol: float

    @property
    def error(self) -> float:
        return abs(self.value - self.reference) / max(abs(self.reference), 1e-300)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.error <= self.tol)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: {self.value:.12g} vs {self.reference:.12g} (rel {self.error:.2e}, tol {self.tol:.0e})"


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]


def dense_dephased(params: InputParams, tau: float, policy: CutoffPolicy = CutoffPolicy()) -> DensityOperator:
    """Dense density matrix of the probe averaged over a common phase of both arms."""
    return dephase_common(probe_state(params, tau, policy=policy), (0, 1))


def dense_lossy_probe(params: InputParams, tau: float, eta: float,
                      policy: CutoffPolicy = CutoffPolicy()) -> DensityOperator:
    """Loss applied after the beam splitter on a dense matrix (independent of the factored route)."""
    space = interferometer_space(params, policy)
    psi = beam_splitter(tau, space).apply(interferometer_input(params, space, policy))
    rho = DensityOperator(space, np.outer(psi.amplitudes, psi.amplitudes.conj()))
    return loss_channel(rho, LossModel(eta, (0, 1)))


def _commutator(gen, rho: DensityOperator) -> DensityOperator:
    return derivative_state(rho, gen)


def run_validation(policy: CutoffPolicy = CutoffPolicy()) -> ValidationReport:
    checks: list[Check] = []

    for a, r, tau in [(1.0, 0.5, 0.3), (0.7, 0.8, 0.5), (1.5, 0.2, 0.85)]:
        x = ClosedFormInputs(a, r, tau)
        psi = probe_state(InputParams(alpha=a, r=r), tau, policy=policy)
        for conv, oracle in ((UPPER, fq_i), (SYMMETRIC, fq_ii)):
            (g,) = generators(conv, psi.space)
            val = qfi_pure(psi, derivative_state(psi, g)).value
            checks.append(Check(f"F_Q({conv.value}) |a|={a} r={r} tau={tau}", val, oracle(x), 1e-8))
        ga, gb = generators(TWO, psi.space)
        fmat = to_plus_minus(qfim_pure(psi, derivative_state(psi, ga), derivative_state(psi, gb)))
        ref = qfim_analytic(x).matrix
        checks.append(Check(f"QFIM(+-) |a|={a} r={r} tau={tau}",
                            float(np.abs(fmat.matrix - ref).max()) / np.abs(ref).max() + 1.0, 1.0, 1e-8))

    for tau, scale_i, scale_ii in [(0.5, 2.0, 1.0), (1.0, 4.0, 1.0)]:
        psi = probe_state(InputParams(alpha=1.3, r=0.0), tau, policy=policy)
        for conv, scale in ((UPPER, scale_i), (SYMMETRIC, scale_ii)):
            (g,) = generators(conv, psi.space)
            val = qfi_pure(psi, derivative_state(psi, g)).value
            checks.append(Check(f"anchor F_Q({conv.value}) tau={tau} r=0", val, scale * 1.3**2, 1e-10))

    params = InputParams(alpha=1.0, r=0.4)
    rho = dense_dephased(params, 0.5, policy)
    (g_ii,) = generators(SYMMETRIC, rho.space)
    (g_i,) = generators(UPPER, rho.space)
    dense = qfi_mixed(rho, _commutator(g_ii, rho)).value
    oracle = fq_rho_balanced(ClosedFormInputs(1.0, 0.4))
    checks.append(Check("dense dephased F_Q^rho |a|=1 r=0.4", dense, oracle, 1e-6))
    checks.append(Check("dephased F_Q^rho convention (i) vs (ii)",
                        qfi_mixed(rho, _commutator(g_i, rho)).value, dense, 1e-8))
    fac = dephase_common(FactoredDensity.from_vector(probe_state(params, 0.5, policy=policy)), (0, 1))
    checks.append(Check("factored vs dense dephased F_Q^rho", qfim_factored(fac, [g_ii]).value, dense, 1e-8))

    cfi = CountingModel(params, 0.5, UPPER, None, policy).distribution(0.3).fisher().value
    checks.append(Check("photon counting CFI vs F_Q^rho at tau=1/2", cfi, oracle, 1e-6))

    small = InputParams(alpha=0.6, r=0.3)
    lossy_dense = dense_lossy_probe(small, 0.4, 0.7, policy)
    ga, gb = generators(TWO, lossy_dense.space)
    ref = qfim_mixed(lossy_dense, _commutator(ga, lossy_dense), _commutator(gb, lossy_dense)).matrix
    fac = qfim_factored(probe_state(small, 0.4, LossModel(0.7), policy), [ga, gb]).matrix
    checks.append(Check("lossy QFIM factored vs dense", float(np.abs(fac - ref).max()) / np.abs(ref).max() + 1.0,
                        1.0, 1e-8))
    checks.append(Check("loss channel trace", lossy_dense.trace(),
                        float(np.vdot(*(2 * [interferometer_input(small, lossy_dense.space, policy).amplitudes])).real),
                        1e-12))

    bs = beam_splitter(0.3, FockSpace((12, 12)))
    checks.append(Check("beam splitter unitarity", 1.0 + bs.unitarity_error(), 1.0, 1e-10))
    return ValidationReport(tuple(checks))
