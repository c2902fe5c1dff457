"""Monte Carlo check of the Cramer-Rao bound for photon counting.

The interferometer output is measured by counting photons in both modes
after a balanced beam splitter.  Phase estimates come from maximum
likelihood restricted to a window around the true phase (local estimation).
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fisher import FisherMatrix, classical_fisher
from .fock import CutoffPolicy, FactoredDensity, FockSpace, FockVector
from .optics import GeneratorConvention, LossModel, beam_splitter, generators, probe_state
from .states import InputParams

log = logging.getLogger(__name__)

WINDOW = 0.5
GRID_POINTS = 101
GOLDEN_TOL = 1e-6


class FlatLikelihoodError(ValueError):
    """The likelihood carries no information about the phase."""


@dataclass(frozen=True)
class OutcomeDistribution:
    """Photon-count table p(n_a, n_b | phi) and its phi-derivative."""

    phi: float
    probabilities: np.ndarray
    derivative: np.ndarray

    @property
    def total(self) -> float:
        return float(self.probabilities.sum())

    def fisher(self) -> FisherMatrix:
        return classical_fisher(self.probabilities, self.derivative)


class CountingModel:
    """Photon-counting statistics of a fixed probe as a function of phase."""

    def __init__(self, params: InputParams, tau: float,
                 convention: GeneratorConvention = GeneratorConvention.UPPER_ONLY,
                 loss: LossModel | None = None, policy: CutoffPolicy = CutoffPolicy()):
        convention = GeneratorConvention(convention)
        if convention is GeneratorConvention.TWO_PARAM:
            raise ValueError("photon counting estimates a single phase; use UPPER_ONLY or SYMMETRIC")
        probe = probe_state(params, tau, loss, policy)
        if isinstance(probe, FockVector):
            self.columns = probe.amplitudes[:, None]
        else:
            self.columns = probe.columns()
        self.space: FockSpace = probe.space
        self.params, self.tau, self.convention, self.loss = params, tau, convention, loss
        (gen,) = generators(convention, self.space)
        self.generator = gen.full_diagonal().real
        self.output = beam_splitter(0.5, self.space, (0, 1))

    @property
    def table_shape(self) -> tuple[int, int]:
        return self.space.dims[0], self.space.dims[1]

    def _amplitudes(self, phi: float) -> tuple[np.ndarray, np.ndarray]:
        phased = np.exp(-1j * phi * self.generator)[:, None] * self.columns
        amp = self.output.apply(phased)
        damp = self.output.apply(-1j * self.generator[:, None] * phased)
        return amp, damp

    def _fold(self, values: np.ndarray) -> np.ndarray:
        # sum over Kraus columns and any unmeasured reference mode
        return values.sum(axis=1).reshape(self.space.dims[:2] + (-1,)).sum(axis=2)

    def distribution(self, phi: float) -> OutcomeDistribution:
        amp, damp = self._amplitudes(phi)
        p = self._fold(np.abs(amp) ** 2)
        dp = self._fold(2.0 * np.real(amp.conj() * damp))
        return OutcomeDistribution(float(phi), p, dp)

    def probabilities(self, phi: float) -> np.ndarray:
        amp = self.output.apply(np.exp(-1j * phi * self.generator)[:, None] * self.columns)
        return self._fold(np.abs(amp) ** 2).ravel()


def outcome_distribution(params: InputParams, tau: float, phi: float,
                         convention: GeneratorConvention = GeneratorConvention.UPPER_ONLY,
                         loss: LossModel | None = None,
                         policy: CutoffPolicy = CutoffPolicy()) -> OutcomeDistribution:
    return CountingModel(params, tau, convention, loss, policy).distribution(phi)


def trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Counter-based (Philox) stream for one trial, keyed by (seed, trial)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial,))))


def sample(dist: OutcomeDistribution | np.ndarray, k: int, seed: int, trial: int = 0) -> np.ndarray:
    """Counts of k i.i.d. outcomes, same shape as the probability table."""
    p = dist.probabilities if isinstance(dist, OutcomeDistribution) else np.asarray(dist, dtype=float)
    flat = np.clip(p.ravel(), 0.0, None)
    counts = trial_rng(seed, trial).multinomial(k, flat / flat.sum())
    return counts.reshape(p.shape)


def golden_section_max(func, lo: float, hi: float, tol: float = GOLDEN_TOL) -> tuple[float, float]:
    """Maximise a unimodal function on [lo, hi]; returns (argmax, max)."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = func(c), func(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = func(d)
    x = 0.5 * (a + b)
    fx = func(x)
    best = max((fx, x), (fc, c), (fd, d))
    return best[1], best[0]


def _log_likelihood(counts: np.ndarray, probs: np.ndarray) -> np.ndarray:
    return counts @ np.log(np.clip(probs, 1e-300, None)).T


def mle_estimate(counts: np.ndarray, model: CountingModel, center: float,
                 window: float = WINDOW, grid_points: int = GRID_POINTS,
                 grid_probs: np.ndarray | None = None) -> float:
    """Maximum-likelihood phase within ``center +- window``.

    A ``grid_points`` grid locates the peak, golden-section search refines
    it to 1e-6 rad inside the neighbouring grid cells.
    """
    grid = np.linspace(center - window, center + window, grid_points)
    if grid_probs is None:
        grid_probs = np.stack([model.probabilities(g) for g in grid])
    c = np.asarray(counts, dtype=float).ravel()
    ll = _log_likelihood(c, grid_probs)
    if np.ptp(ll) <= 1e-12 * max(1.0, np.abs(ll).max()):
        raise FlatLikelihoodError("log-likelihood is flat over the search window")
    i = int(np.argmax(ll))
    step = grid[1] - grid[0]
    lo, hi = max(grid[0], grid[i] - step), min(grid[-1], grid[i] + step)
    best, _ = golden_section_max(lambda x: float(_log_likelihood(c, model.probabilities(x))), lo, hi)
    return best


@dataclass(frozen=True)
class EstimationRun:
    true_phase: float
    k: int
    seed: int
    estimates: np.ndarray
    fisher: float
    qfi: float | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def variance(self) -> float:
        return float(np.var(self.estimates, ddof=1))

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))

    @property
    def bias(self) -> float:
        return float(np.mean(self.estimates) - self.true_phase)

    @property
    def crb(self) -> float:
        """1/sqrt(k F) for the classical Fisher information of the measurement."""
        return float(1.0 / np.sqrt(self.k * self.fisher))

    @property
    def std_ratio(self) -> float:
        return self.std / self.crb


def _run_trials(model: CountingModel, phi: float, k: int, seed: int, trials, grid_probs, p_true):
    out = []
    for t in trials:
        counts = sample(p_true, k, seed, t)
        out.append(mle_estimate(counts, model, phi, grid_probs=grid_probs))
    return out


def run_estimation(params: InputParams, tau: float = 0.5, phi: float = 0.3, k: int = 100_000,
                   trials: int = 200, seed: int = 2012,
                   convention: GeneratorConvention = GeneratorConvention.UPPER_ONLY,
                   loss: LossModel | None = None, policy: CutoffPolicy = CutoffPolicy(),
                   workers: int = 1, qfi: float | None = None) -> EstimationRun:
    """Repeat (sample k outcomes, estimate phase) ``trials`` times.

    Trial ``t`` draws from the Philox stream keyed by ``(seed, t)``, so
    results do not depend on ``workers``.
    """
    model = CountingModel(params, tau, convention, loss, policy)
    dist = model.distribution(phi)
    grid = np.linspace(phi - WINDOW, phi + WINDOW, GRID_POINTS)
    grid_probs = np.stack([model.probabilities(g) for g in grid])
    chunks = [list(range(trials))[i::workers] for i in range(workers)] if workers > 1 else [list(range(trials))]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(_run_trials, model, phi, k, seed, ch, grid_probs, dist.probabilities)
                       for ch in chunks]
            results = [f.result() for f in futures]
        estimates = np.empty(trials)
        for ch, res in zip(chunks, results):
            estimates[ch] = res
    else:
        estimates = np.asarray(_run_trials(model, phi, k, seed, chunks[0], grid_probs, dist.probabilities))
    fisher = dist.fisher()
    log.info("MC: %d trials, k=%d, F=%.6g", trials, k, fisher.value)
    return EstimationRun(float(phi), int(k), int(seed), estimates, fisher.value, qfi,
                         {"tau": tau, "convention": model.convention.value,
                          "total_probability": dist.total, **fisher.diagnostics})
