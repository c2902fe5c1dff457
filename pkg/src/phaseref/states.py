"""Coherent, squeezed-vacuum and product input states; common-phase averaging."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .fock import (
    CutoffPolicy,
    DensityOperator,
    FactoredDensity,
    FockSpace,
    FockVector,
    embed,
    tensor,
)

MAX_CUTOFF = 4000


class CutoffError(ValueError):
    """The requested truncation deficit cannot be met."""


def coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    amps = np.zeros(cutoff + 1, dtype=complex)
    if alpha == 0:
        amps[0] = 1.0
        return amps
    mag, phase = abs(alpha), np.angle(alpha)
    log_mag = -0.5 * mag**2 + n * np.log(mag) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * phase * n)


def squeezed_amplitudes(r: complex, cutoff: int) -> np.ndarray:
    """Fock amplitudes of exp[(r* a^2 - r a^dag^2)/2]|0>."""
    amps = np.zeros(cutoff + 1, dtype=complex)
    mag, phase = abs(r), np.angle(r)
    if mag == 0:
        amps[0] = 1.0
        return amps
    m = np.arange(cutoff // 2 + 1)
    log_mag = (
        -0.5 * np.log(np.cosh(mag))
        + m * np.log(np.tanh(mag))
        + 0.5 * gammaln(2 * m + 1)
        - m * np.log(2.0)
        - gammaln(m + 1)
    )
    amps[2 * m] = np.exp(log_mag) * (-np.exp(1j * phase)) ** m
    return amps


def coherent_deficit(alpha: complex, cutoff: int) -> float:
    return float(poisson.sf(cutoff, abs(alpha) ** 2))


def _squeezed_probabilities(mag: float, m: np.ndarray) -> np.ndarray:
    """Probability of 2m photons in squeezed vacuum of strength ``mag``."""
    log_p = (
        -np.log(np.cosh(mag))
        + 2 * m * np.log(np.tanh(mag))
        + gammaln(2 * m + 1)
        - 2 * m * np.log(2.0)
        - 2 * gammaln(m + 1)
    )
    return np.exp(log_p)


def _squeezed_tail(mag: float, max_m: int) -> np.ndarray:
    """tail[m] = probability of photon numbers > 2m."""
    p = _squeezed_probabilities(mag, np.arange(max_m + 1))
    tail = np.cumsum(p[::-1])[::-1]
    return np.append(tail[1:], 0.0)


def squeezed_deficit(r: complex, cutoff: int) -> float:
    mag = abs(r)
    if mag == 0:
        return 0.0
    tail = _squeezed_tail(mag, MAX_CUTOFF)
    return float(tail[min(cutoff // 2, MAX_CUTOFF)])


def _first_below(tail: np.ndarray, tol: float) -> int | None:
    # the last entry is the empty tail beyond the table and proves nothing
    ok = np.nonzero(tail[:-1] < tol)[0]
    return int(ok[0]) if ok.size else None


def _weighted_tail(n: np.ndarray, p: np.ndarray) -> np.ndarray:
    """tail[i] = sum over n > n[i] of (n+1)^2 p(n).

    Bounding this, rather than only the norm deficit, keeps the truncated
    second moments (and therefore the QFI) accurate to about ``deficit_tol``.
    """
    w = (n + 1.0) ** 2 * p
    tail = np.cumsum(w[::-1])[::-1]
    return np.append(tail[1:], 0.0)


@lru_cache(maxsize=4096)
def coherent_cutoff(alpha: complex, policy: CutoffPolicy = CutoffPolicy()) -> int:
    """Smallest cutoff whose (n+1)^2-weighted tail is below ``deficit_tol``, plus the guard band."""
    n = np.arange(MAX_CUTOFF + 1)
    c = _first_below(_weighted_tail(n, poisson.pmf(n, abs(alpha) ** 2)), policy.deficit_tol)
    if c is None:
        raise CutoffError(f"coherent amplitude {alpha} needs a cutoff above {MAX_CUTOFF}")
    return c + policy.guard


@lru_cache(maxsize=4096)
def squeezed_cutoff(r: complex, policy: CutoffPolicy = CutoffPolicy()) -> int:
    mag = abs(r)
    if mag == 0:
        return policy.guard
    m = np.arange(MAX_CUTOFF // 2 + 1)
    tail = _weighted_tail(2.0 * m, _squeezed_probabilities(mag, m))
    c = _first_below(tail, policy.deficit_tol)
    if c is None:
        raise CutoffError(f"squeezing {r} needs a cutoff above {MAX_CUTOFF}")
    return 2 * c + policy.guard


@lru_cache(maxsize=4096)
def reference_cutoff(beta: complex, policy: CutoffPolicy = CutoffPolicy()) -> int:
    mean = abs(beta) ** 2
    sized = int(np.ceil(mean + 6.0 * np.sqrt(mean + 1.0))) + policy.guard
    return max(sized, coherent_cutoff(beta, policy))


def coherent_state(alpha: complex, space: FockSpace | int | None = None,
                   policy: CutoffPolicy = CutoffPolicy()) -> FockVector:
    """Single-mode coherent state; ``space`` defaults to the policy cutoff."""
    space = _single_mode_space(space, lambda: coherent_cutoff(alpha, policy))
    return FockVector(space, coherent_amplitudes(alpha, space.cutoffs[0]))


def squeezed_vacuum(r: complex, space: FockSpace | int | None = None,
                    policy: CutoffPolicy = CutoffPolicy()) -> FockVector:
    space = _single_mode_space(space, lambda: squeezed_cutoff(r, policy))
    return FockVector(space, squeezed_amplitudes(r, space.cutoffs[0]))


def _single_mode_space(space, default) -> FockSpace:
    if space is None:
        return FockSpace((default(),))
    if isinstance(space, (int, np.integer)):
        return FockSpace((int(space),))
    if space.mode_count != 1:
        raise ValueError("single-mode state requested on a multi-mode space")
    return space


@dataclass(frozen=True)
class InputParams:
    """Interferometer input: squeezed vacuum in mode a, coherent state in mode b.

    With ``optimal_phase`` (the default) only the magnitudes of ``alpha``,
    ``r`` and ``beta`` are used and all three are taken real and positive.
    Behind the ``-i`` of the beam splitter this puts the coherent light in
    quadrature with the squeezing axis, the phase that maximises the QFI;
    it is the choice the closed forms in :mod:`phaseref.closed_forms` assume.
    Set ``optimal_phase=False`` to use the complex values as given.
    ``swap`` exchanges the roles of modes a and b.  A reference beam, when
    ``beta`` is given, occupies mode c.
    """

    alpha: complex = 0.0
    r: complex = 0.0
    beta: complex | None = None
    optimal_phase: bool = True
    swap: bool = False

    @classmethod
    def from_budget(cls, n_bar: float, squeeze_fraction: float, **kwargs) -> "InputParams":
        """Split a mean photon budget: sinh^2 r = f n_bar, |alpha|^2 = (1-f) n_bar."""
        if n_bar < 0 or not 0.0 <= squeeze_fraction <= 1.0:
            raise ValueError("need n_bar >= 0 and squeeze_fraction in [0, 1]")
        alpha = np.sqrt((1.0 - squeeze_fraction) * n_bar)
        r = np.arcsinh(np.sqrt(squeeze_fraction * n_bar))
        return cls(alpha=alpha, r=r, **kwargs)

    @property
    def alpha_value(self) -> complex:
        return complex(abs(self.alpha)) if self.optimal_phase else complex(self.alpha)

    @property
    def r_value(self) -> complex:
        return complex(abs(self.r)) if self.optimal_phase else complex(self.r)

    @property
    def beta_value(self) -> complex | None:
        if self.beta is None:
            return None
        return complex(abs(self.beta)) if self.optimal_phase else complex(self.beta)

    @property
    def has_reference(self) -> bool:
        return self.beta is not None

    @property
    def n_bar(self) -> float:
        """Mean photon number entering the interferometer (reference excluded)."""
        return abs(self.alpha) ** 2 + np.sinh(abs(self.r)) ** 2

    @property
    def squeezed_mode(self) -> int:
        return 1 if self.swap else 0

    @property
    def coherent_mode(self) -> int:
        return 0 if self.swap else 1

    def input_cutoffs(self, policy: CutoffPolicy = CutoffPolicy()) -> tuple[int, ...]:
        """Policy cutoffs of the individual input factors in mode order."""
        ab = [0, 0]
        ab[self.squeezed_mode] = squeezed_cutoff(self.r_value, policy)
        ab[self.coherent_mode] = coherent_cutoff(self.alpha_value, policy)
        if self.has_reference:
            ab.append(reference_cutoff(self.beta_value, policy))
        return tuple(ab)

    def truncation_deficit(self, policy: CutoffPolicy = CutoffPolicy()) -> float:
        cut = self.input_cutoffs(policy)
        kept = (1.0 - squeezed_deficit(self.r_value, cut[self.squeezed_mode])) * (
            1.0 - coherent_deficit(self.alpha_value, cut[self.coherent_mode])
        )
        if self.has_reference:
            kept *= 1.0 - coherent_deficit(self.beta_value, cut[2])
        return 1.0 - kept


def interferometer_space(params: InputParams, policy: CutoffPolicy = CutoffPolicy()) -> FockSpace:
    """Space closed under a beam splitter acting on modes a and b.

    Both interferometer modes get the cutoff ``c_squeezed + c_coherent`` so
    every total-photon-number sector the input touches is complete.
    """
    cut = params.input_cutoffs(policy)
    n_max = cut[0] + cut[1]
    return FockSpace((n_max, n_max) + tuple(cut[2:]))


def interferometer_input(params: InputParams, space: FockSpace | None = None,
                         policy: CutoffPolicy = CutoffPolicy()) -> FockVector:
    """Product input ``|r> (x) |alpha> [(x) |beta>]`` on ``space``.

    Each factor is truncated at its own policy cutoff (capped by ``space``)
    and zero-padded, so the support never exceeds the policy truncation.
    """
    space = interferometer_space(params, policy) if space is None else space
    expected = 3 if params.has_reference else 2
    if space.mode_count != expected:
        raise ValueError(f"input needs a {expected}-mode space, got {space.mode_count}")
    cut = [min(c, s) for c, s in zip(params.input_cutoffs(policy), space.cutoffs)]
    factors = [None, None]
    factors[params.squeezed_mode] = squeezed_vacuum(params.r_value, cut[params.squeezed_mode])
    factors[params.coherent_mode] = coherent_state(params.alpha_value, cut[params.coherent_mode])
    if params.has_reference:
        factors.append(coherent_state(params.beta_value, cut[2]))
    state = factors[0]
    for f in factors[1:]:
        state = tensor(state, f)
    return embed(state, space)


def dephase_common(state, modes: Iterable[int]):
    """Average ``state`` over a common phase rotation of ``modes``.

    Implemented exactly as the projection onto sectors of fixed total photon
    number in ``modes``.  Pure and dense inputs give a dense
    :class:`DensityOperator`; a :class:`FactoredDensity` stays factored, with
    one block per sector.
    """
    modes = sorted(set(modes))
    if not modes:
        raise ValueError("dephasing needs at least one mode")
    if isinstance(state, FactoredDensity):
        return state.split(state.space.total_number(modes))
    if isinstance(state, FockVector):
        mat = np.outer(state.amplitudes, state.amplitudes.conj())
    elif isinstance(state, DensityOperator):
        mat = state.matrix
    else:
        raise TypeError(f"cannot dephase {type(state).__name__}")
    sector = state.space.total_number(modes)
    mask = sector[:, None] == sector[None, :]
    return DensityOperator(state.space, np.where(mask, mat, 0.0))
