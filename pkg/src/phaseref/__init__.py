"""Phase-estimation bounds for a coherent + squeezed-vacuum Mach-Zehnder interferometer."""
__version__ = "0.1.0"

from .closed_forms import ClosedFormInputs, fq_i, fq_ii, fq_rho_balanced, qfim_analytic
from .fisher import (
    FisherMatrix,
    NotIdentifiableError,
    classical_fisher,
    crb_bound,
    qfi_mixed,
    qfi_pure,
    qfim_factored,
    qfim_mixed,
    qfim_pure,
    to_plus_minus,
)
from .fock import CutoffPolicy, DensityOperator, FactoredDensity, FockSpace, FockVector
from .optics import GeneratorConvention, LossModel, beam_splitter, generators, loss_channel, probe_state
from .states import InputParams, coherent_state, dephase_common, squeezed_vacuum

__all__ = [
    "ClosedFormInputs", "CutoffPolicy", "DensityOperator", "FactoredDensity", "FisherMatrix",
    "FockSpace", "FockVector", "GeneratorConvention", "InputParams", "LossModel",
    "NotIdentifiableError", "beam_splitter", "classical_fisher", "coherent_state", "crb_bound",
    "dephase_common", "fq_i", "fq_ii", "fq_rho_balanced", "generators", "loss_channel",
    "probe_state", "qfi_mixed", "qfi_pure", "qfim_analytic", "qfim_factored", "qfim_mixed",
    "qfim_pure", "squeezed_vacuum", "to_plus_minus",
]
