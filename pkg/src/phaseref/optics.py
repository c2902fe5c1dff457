"""Beam splitter, phase shifts for each generator convention, photon loss."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sps
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .fock import (
    CutoffPolicy,
    DensityOperator,
    FactoredDensity,
    FockSpace,
    FockVector,
    ModeOperator,
    embed,
    tensor_factored,
)
from .states import (
    InputParams,
    coherent_state,
    interferometer_input,
    interferometer_space,
    squeezed_vacuum,
)


class GeneratorConvention(enum.Enum):
    UPPER_ONLY = "i"
    SYMMETRIC = "ii"
    TWO_PARAM = "iii"


@lru_cache(maxsize=4096)
def _sector_eigensystem(total: int, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a^dag b + a b^dag on {|n, total-n>: lo <= n <= hi}."""
    if hi == lo:
        return np.zeros(1), np.ones((1, 1))
    n = np.arange(lo, hi)
    off = np.sqrt((n + 1.0) * (total - n))
    evals, evecs = eigh_tridiagonal(np.zeros(hi - lo + 1), off)
    evals.setflags(write=False)
    evecs.setflags(write=False)
    return evals, evecs


@lru_cache(maxsize=64)
def _sector_layout(cut_a: int, cut_b: int) -> tuple[tuple[int, int, int, np.ndarray], ...]:
    """(total, lo, hi, flat local indices ordered by n_a) for each sector."""
    layout = []
    for total in range(cut_a + cut_b + 1):
        lo, hi = max(0, total - cut_b), min(total, cut_a)
        na = np.arange(lo, hi + 1)
        idx = na * (cut_b + 1) + (total - na)
        idx.setflags(write=False)
        layout.append((total, lo, hi, idx))
    return tuple(layout)


@dataclass(frozen=True)
class BeamSplitter(ModeOperator):
    """exp[-i angle (a^dag b + a b^dag)] on a pair of modes.

    Evaluated exactly as a matrix exponential inside each total-photon-number
    sector of the two modes.  Sectors cut by the truncation use the truncated
    generator, so the operator stays unitary on the whole space.
    """

    angle: float = 0.0

    def __post_init__(self):
        modes = tuple(self.space.check_mode(m) for m in self.modes)
        if len(modes) != 2 or modes[0] == modes[1]:
            raise ValueError(f"beam splitter needs two distinct modes, got {self.modes}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "unitary", True)

    @property
    def tau(self) -> float:
        return float(np.sin(self.angle) ** 2)

    def _blocks(self):
        cut_a, cut_b = self.local_space.cutoffs
        for total, lo, hi, idx in _sector_layout(cut_a, cut_b):
            evals, evecs = _sector_eigensystem(total, lo, hi)
            yield idx, evecs, np.exp(-1j * self.angle * evals)

    def block_matrices(self):
        for idx, evecs, phases in self._blocks():
            yield idx, (evecs * phases) @ evecs.T

    def _local_apply(self, block: np.ndarray) -> np.ndarray:
        out = np.zeros_like(block, dtype=complex)
        cut_a, cut_b = self.local_space.cutoffs
        for total, lo, hi, idx in _sector_layout(cut_a, cut_b):
            sub = block[idx]
            if not sub.any():
                continue
            evals, evecs = _sector_eigensystem(total, lo, hi)
            phases = np.exp(-1j * self.angle * evals)
            out[idx] = evecs @ (phases[:, None] * (evecs.T @ sub))
        return out

    def local_matrix(self):
        rows, cols, vals = [], [], []
        for idx, mat in self.block_matrices():
            r, c = np.meshgrid(idx, idx, indexing="ij")
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(mat.ravel())
        n = self.local_space.dimension
        return sps.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )

    def adjoint(self) -> "BeamSplitter":
        return BeamSplitter(self.space, self.modes, angle=-self.angle)

    def unitarity_error(self) -> float:
        worst = 0.0
        for _, mat in self.block_matrices():
            worst = max(worst, float(np.abs(mat.conj().T @ mat - np.eye(len(mat))).max()))
        return worst


def beam_splitter(tau: float, space: FockSpace, modes: tuple[int, int] = (0, 1)) -> BeamSplitter:
    """Beam splitter of power transmission ``tau`` between ``modes``.

    ``tau`` is the probability that a photon crosses from one mode into the
    other, so ``tau = 1`` swaps the modes (up to phases).
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return BeamSplitter(space, tuple(modes), angle=float(np.arcsin(np.sqrt(tau))))


def generators(convention: GeneratorConvention, space: FockSpace,
               modes: tuple[int, int] = (0, 1)) -> tuple[ModeOperator, ...]:
    """Phase generators: (n_a,), ((n_a - n_b)/2,) or (n_a, n_b)."""
    a, b = modes
    convention = GeneratorConvention(convention)
    if convention is GeneratorConvention.UPPER_ONLY:
        return (ModeOperator(space, (a,), diagonal=np.arange(space.cutoffs[a] + 1.0)),)
    if convention is GeneratorConvention.SYMMETRIC:
        na = np.arange(space.cutoffs[a] + 1.0)
        nb = np.arange(space.cutoffs[b] + 1.0)
        diag = 0.5 * (na[:, None] - nb[None, :]).ravel()
        return (ModeOperator(space, (a, b), diagonal=diag),)
    return (
        ModeOperator(space, (a,), diagonal=np.arange(space.cutoffs[a] + 1.0)),
        ModeOperator(space, (b,), diagonal=np.arange(space.cutoffs[b] + 1.0)),
    )


def phase_unitary(phi, convention: GeneratorConvention, space: FockSpace,
                  modes: tuple[int, int] = (0, 1)):
    """exp(-i phi G) for the convention's generator.

    For ``TWO_PARAM`` pass ``phi = (phi_1, phi_2)``; the pair
    ``(V^a_{phi_1}, V^b_{phi_2})`` is returned.
    """
    convention = GeneratorConvention(convention)
    gens = generators(convention, space, modes)
    phis = tuple(np.atleast_1d(np.asarray(phi, dtype=float)))
    if len(phis) != len(gens):
        raise ValueError(f"{convention.name} takes {len(gens)} phase(s), got {len(phis)}")
    ops = tuple(
        ModeOperator(space, g.modes, diagonal=np.exp(-1j * p * g.diagonal), unitary=True)
        for g, p in zip(gens, phis)
    )
    return ops if convention is GeneratorConvention.TWO_PARAM else ops[0]


@dataclass(frozen=True)
class LossModel:
    """Pure-loss channel of power transmission ``eta`` on each of ``modes``."""

    eta: float
    modes: tuple[int, ...] = (0, 1)

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))


def _loss_amplitudes(eta: float, cutoff: int) -> np.ndarray:
    """amp[l, n] = <n-l| K_l |n> = sqrt(C(n, l) eta^(n-l) (1-eta)^l), zero for l > n."""
    d = cutoff + 1
    n = np.arange(d)[None, :]
    l = np.arange(d)[:, None]
    valid = n >= l
    if eta == 1.0:
        return ((l == 0) & valid).astype(float)
    if eta == 0.0:
        return ((n == l) & valid).astype(float)
    n_minus_l = np.where(valid, n - l, 0)
    log_amp = 0.5 * (
        gammaln(n + 1.0) - gammaln(l + 1.0) - gammaln(n_minus_l + 1.0)
        + n_minus_l * np.log(eta) + l * np.log1p(-eta)
    )
    return np.where(valid, np.exp(log_amp), 0.0)


def loss_kraus(eta: float, cutoff: int) -> np.ndarray:
    """Single-mode Kraus operators K_0..K_cutoff stacked as (cutoff+1, d, d)."""
    amp = _loss_amplitudes(eta, cutoff)
    d = cutoff + 1
    kraus = np.zeros((d, d, d))
    ll, nn = np.nonzero(np.arange(d)[None, :] >= np.arange(d)[:, None])
    kraus[ll, nn - ll, nn] = amp[ll, nn]
    return kraus


def loss_channel(rho, model: LossModel):
    """Apply photon loss to every mode in ``model.modes``.

    Dense input is evolved through the Kraus sum.  A factored state gains one
    column per Kraus element and is re-compressed after each mode.
    """
    if isinstance(rho, FockVector):
        rho = FactoredDensity.from_vector(rho)
    if model.eta == 1.0:
        return rho
    space = rho.space
    if isinstance(rho, DensityOperator):
        dims = space.dims
        n = space.mode_count
        mat = rho.matrix
        for m in model.modes:
            space.check_mode(m)
            amp = _loss_amplitudes(model.eta, space.cutoffs[m])
            tens = np.moveaxis(mat.reshape(dims + dims), (m, n + m), (0, 1))
            out = np.zeros_like(tens)
            d = dims[m]
            for l in range(d):
                w = amp[l, l:]
                out[: d - l, : d - l] += (w[:, None] * w[None, :]).reshape(
                    (d - l, d - l) + (1,) * (tens.ndim - 2)
                ) * tens[l:, l:]
            mat = np.moveaxis(out, (0, 1), (m, n + m)).reshape(space.dimension, space.dimension)
        return DensityOperator(space, 0.5 * (mat + mat.conj().T))
    if isinstance(rho, FactoredDensity):
        cols = rho.columns()
        for m in model.modes:
            space.check_mode(m)
            amp = _loss_amplitudes(model.eta, space.cutoffs[m])
            front = np.moveaxis(cols.reshape(space.dims + (-1,)), m, 0)
            d = front.shape[0]
            flat = front.reshape(d, -1)
            terms = []
            for l in range(d):
                if not amp[l].any():
                    continue
                term = np.zeros_like(flat)
                term[: d - l] = amp[l, l:, None] * flat[l:]
                terms.append(np.moveaxis(term.reshape(front.shape), 0, m))
            new = np.concatenate([t.reshape(space.dimension, -1) for t in terms], axis=1)
            keep = np.linalg.norm(new, axis=0) > 0
            cols = FactoredDensity.from_columns(space, new[:, keep]).compressed().columns()
        return FactoredDensity.from_columns(space, cols)
    raise TypeError(f"cannot apply loss to {type(rho).__name__}")


def commutes_with_mixing(loss: LossModel | None) -> bool:
    """True when the loss pattern commutes with a beam splitter on modes 0 and 1."""
    return loss is None or loss.eta == 1.0 or {0, 1} <= set(loss.modes) or not set(loss.modes) & {0, 1}


def input_state(params: InputParams, loss: LossModel | None = None,
                policy: CutoffPolicy = CutoffPolicy()):
    """Input state on the interferometer space, with loss applied mode by mode.

    Returns a :class:`FockVector` when lossless, otherwise an unblocked
    :class:`FactoredDensity`.  Only loss patterns that commute with the
    beam splitter (see :func:`commutes_with_mixing`) are accepted.
    """
    space = interferometer_space(params, policy)
    if loss is None or loss.eta == 1.0:
        return interferometer_input(params, space, policy)
    if not set(loss.modes) <= set(range(space.mode_count)):
        raise ValueError(f"loss modes {loss.modes} outside a {space.mode_count}-mode space")
    if not commutes_with_mixing(loss):
        raise ValueError("loss on a single arm does not commute with the beam splitter")
    cut = params.input_cutoffs(policy)
    single = [None] * space.mode_count
    single[params.squeezed_mode] = ("sq", params.r_value)
    single[params.coherent_mode] = ("coh", params.alpha_value)
    if params.has_reference:
        single[2] = ("coh", params.beta_value)
    factors = []
    for mode, (kind, value) in enumerate(single):
        lossy = mode in loss.modes
        if kind == "coh":
            # a lossy coherent state stays pure with amplitude sqrt(eta) alpha
            vec = coherent_state(value * np.sqrt(loss.eta) if lossy else value, cut[mode])
            factors.append(FactoredDensity.from_vector(vec))
        else:
            fac = FactoredDensity.from_vector(squeezed_vacuum(value, cut[mode]))
            factors.append(loss_channel(fac, LossModel(loss.eta, (0,))) if lossy else fac)
    state = factors[0]
    for f in factors[1:]:
        state = tensor_factored(state, f)
    return embed(state, space)


def probe_state(params: InputParams, tau: float, loss: LossModel | None = None,
                policy: CutoffPolicy = CutoffPolicy()):
    """State inside the interferometer, ``B_tau`` applied to the input.

    Returns a :class:`FockVector` when lossless, otherwise an unblocked
    :class:`FactoredDensity`.  Loss shared equally by both arms commutes with
    the beam splitter, so it is applied to the single-mode input factors
    before mixing; any other loss pattern is applied after the beam splitter.
    """
    space = interferometer_space(params, policy)
    bs = beam_splitter(tau, space, (0, 1))
    if commutes_with_mixing(loss):
        state = input_state(params, loss, policy)
        return bs.apply(state) if isinstance(state, FockVector) else state.map_columns(bs.apply)
    if not set(loss.modes) <= set(range(space.mode_count)):
        raise ValueError(f"loss modes {loss.modes} outside a {space.mode_count}-mode space")
    pure = bs.apply(interferometer_input(params, space, policy))
    return loss_channel(FactoredDensity.from_vector(pure), loss)
