"""Scenario configuration, input optimisation at fixed photon budget, sweeps.

A scenario fixes a precision model (which Fisher quantity is computed), a
grid of mean photon numbers, the arm transmission ``eta`` and optionally a
reference-beam amplitude.  For every grid point the input split between
coherent light and squeezing, and the beam-splitter transmission ``tau``,
are optimised unless the configuration pins them.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .estimation import GOLDEN_TOL, CountingModel, golden_section_max, run_estimation
from .fisher import (
    NotIdentifiableError,
    crb_bound,
    derivative_state,
    qfi_pure,
    qfim_factored,
    qfim_pure,
    qfim_sectors,
    to_plus_minus,
)
from .fock import CutoffPolicy, FockVector
from .mixing import MixingForm, mixing_form
from .optics import GeneratorConvention, LossModel, generators, input_state, probe_state
from .states import CutoffError, InputParams, dephase_common, interferometer_space

log = logging.getLogger(__name__)

SCHEMA_VERSION = "phaseref-sweep/1"
MC_SCHEMA_VERSION = "phaseref-mc/1"
OPT_SCHEMA_VERSION = "phaseref-optimize/1"
GRID_SIZE = 41
TIE_RTOL = 1e-9
MAX_ROUNDS = 20
# metrics below this are round-off on a phase the probe cannot see
ZERO_INFO = 1e-12


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


class NumericalFailure(RuntimeError):
    """A metric came out non-finite or otherwise unusable."""


class Model(str, enum.Enum):
    FQ_I = "FQ_I"
    FQ_II = "FQ_II"
    FQ_RHO = "FQ_RHO"
    QFIM_EXTERNAL_REF = "QFIM_EXTERNAL_REF"
    QFIM_FINITE_BETA = "QFIM_FINITE_BETA"
    CFI_PHOTON_COUNTING = "CFI_PHOTON_COUNTING"
    MC_SATURATION = "MC_SATURATION"

    @property
    def is_matrix(self) -> bool:
        return self in (Model.QFIM_EXTERNAL_REF, Model.QFIM_FINITE_BETA)


# ---------------------------------------------------------------- config

_LIST_KEYS = {"model", "n_bar", "beta", "k"}


@dataclass(frozen=True)
class ScenarioConfig:
    """Declarative scenario.

    Units: photon numbers are dimensionless, phases are in radians, ``eta``,
    ``tau`` and ``squeeze_fraction`` are dimensionless in [0, 1].  ``beta``
    is the reference-beam magnitude |beta| (a list for reference-beam
    studies).  ``squeeze_fraction`` (f = sinh^2 r / n_bar) and ``r`` are
    alternative ways of pinning the input split.  Giving ``alpha_phase`` or
    ``squeeze_phase`` switches off the optimal-phase default.
    """

    model: tuple[Model, ...] = (Model.FQ_RHO,)
    n_bar: tuple[float, ...] = (1.0,)
    eta: float = 1.0
    beta: tuple[float, ...] = ()
    tau: float | None = None
    squeeze_fraction: float | None = None
    r: float | None = None
    alpha_phase: float | None = None
    squeeze_phase: float | None = None
    convention: str = "i"
    lossy_reference: bool = False
    phi: float = 0.3
    deficit_tol: float = 1e-10
    cutoff_guard: int = 5
    grid: int = GRID_SIZE
    seed: int = 2012
    k: tuple[int, ...] = (100_000,)
    trials: int = 200

    def __post_init__(self):
        try:
            self._validate()
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def _validate(self):
        object.__setattr__(self, "model", tuple(Model(m) for m in self.model))
        object.__setattr__(self, "n_bar", tuple(float(n) for n in self.n_bar))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "k", tuple(int(k) for k in self.k))
        if not self.model:
            raise ConfigError("model list is empty")
        if not self.n_bar:
            raise ConfigError("n_bar grid is empty")
        if any(not math.isfinite(n) or n < 0 for n in self.n_bar):
            raise ConfigError("n_bar values must be finite and >= 0")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")
        if any(b < 0 or not math.isfinite(b) for b in self.beta):
            raise ConfigError("beta magnitudes must be finite and >= 0")
        if list(self.beta) != sorted(self.beta):
            raise ConfigError("beta grid must be ascending")
        if self.tau is not None and not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must lie in [0, 1], got {self.tau}")
        if self.squeeze_fraction is not None and not 0.0 <= self.squeeze_fraction <= 1.0:
            raise ConfigError("squeeze_fraction must lie in [0, 1]")
        if self.squeeze_fraction is not None and self.r is not None:
            raise ConfigError("give at most one of squeeze_fraction and r")
        if self.r is not None and self.r < 0:
            raise ConfigError("r is a magnitude and must be >= 0")
        GeneratorConvention(self.convention)
        if self.convention == GeneratorConvention.TWO_PARAM.value:
            raise ConfigError("convention must be 'i' or 'ii'")
        if self.deficit_tol <= 0 or self.deficit_tol >= 1:
            raise ConfigError("deficit_tol must lie in (0, 1)")
        if self.cutoff_guard < 0:
            raise ConfigError("cutoff_guard must be >= 0")
        if self.grid < 2:
            raise ConfigError("grid needs at least 2 points per axis")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not self.k or any(k < 1 for k in self.k) or self.trials < 2:
            raise ConfigError("k must be positive and trials >= 2")
        if Model.QFIM_FINITE_BETA in self.model and not self.beta:
            raise ConfigError("model QFIM_FINITE_BETA needs beta")

    @property
    def policy(self) -> CutoffPolicy:
        return CutoffPolicy(deficit_tol=self.deficit_tol, guard=self.cutoff_guard)

    @property
    def optimal_phase(self) -> bool:
        return self.alpha_phase is None and self.squeeze_phase is None

    def pinned_fraction(self, n_bar: float) -> float | None:
        if self.squeeze_fraction is not None:
            return self.squeeze_fraction
        if self.r is not None:
            if n_bar <= 0:
                raise ConfigError("r override needs n_bar > 0")
            f = math.sinh(self.r) ** 2 / n_bar
            if f > 1.0 + 1e-12:
                raise ConfigError(f"sinh^2 r = {math.sinh(self.r) ** 2:.6g} exceeds n_bar = {n_bar}")
            return min(f, 1.0)
        return None

    def input_params(self, n_bar: float, fraction: float, beta: float | None = None) -> InputParams:
        base = InputParams.from_budget(n_bar, fraction)
        if self.optimal_phase:
            return replace(base, beta=beta)
        alpha = abs(base.alpha) * np.exp(1j * (self.alpha_phase or 0.0))
        r = abs(base.r) * np.exp(1j * (self.squeeze_phase or 0.0))
        return InputParams(alpha=alpha, r=r, beta=beta, optimal_phase=False)

    def with_overrides(self, **changes) -> "ScenarioConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "model":
                v = [m.value for m in v]
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        for key, value in data.items():
            if isinstance(value, dict):
                raise ConfigError(f"config must be flat; {key!r} is a table")
            if key in _LIST_KEYS:
                value = tuple(value) if isinstance(value, list) else (value,)
            elif isinstance(value, list):
                raise ConfigError(f"{key!r} takes a single value")
            kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str) -> "ScenarioConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        return cls.from_mapping(data)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text)


# ------------------------------------------------------------ evaluation

@dataclass(frozen=True)
class Evaluation:
    """One model evaluated at one input; ``delta_phi`` is the single-shot bound."""

    metric: float
    delta_phi: float
    cutoffs: tuple[int, ...]
    truncation_deficit: float


def _loss(params: InputParams, eta: float, lossy_reference: bool) -> LossModel | None:
    if eta >= 1.0:
        return None
    modes = (0, 1, 2) if lossy_reference and params.has_reference else (0, 1)
    return LossModel(eta, modes)


def _info_matrix(state, gens, dephase_modes: tuple[int, ...] | None):
    if isinstance(state, FockVector):
        if dephase_modes is None:
            return qfim_pure(state, *[derivative_state(state, g) for g in gens])
        return qfim_sectors(state, gens, state.space.total_number(dephase_modes))
    if dephase_modes is not None:
        state = dephase_common(state, dephase_modes)
    return qfim_factored(state, gens)


@lru_cache(maxsize=256)
def _form(params: InputParams, loss: LossModel | None, policy: CutoffPolicy,
          dephase_modes: tuple[int, ...] | None) -> MixingForm:
    return mixing_form(input_state(params, loss, policy), dephase_modes)


_ROUTE_MODES = {
    Model.FQ_I: (GeneratorConvention.UPPER_ONLY, None),
    Model.FQ_II: (GeneratorConvention.SYMMETRIC, None),
    Model.FQ_RHO: (GeneratorConvention.SYMMETRIC, (0, 1)),
    Model.QFIM_EXTERNAL_REF: (GeneratorConvention.TWO_PARAM, None),
    Model.QFIM_FINITE_BETA: (GeneratorConvention.TWO_PARAM, (0, 1, 2)),
}


def _quantum_metric(model: Model, params: InputParams, tau: float, loss: LossModel | None,
                    policy: CutoffPolicy, route: str) -> float:
    convention, modes = _ROUTE_MODES[model]
    if route == "mixing":
        fmat = _form(params, loss, policy, modes).fisher(tau, convention)
    elif route == "direct":
        state = probe_state(params, tau, loss, policy)
        fmat = _info_matrix(state, generators(convention, state.space), modes)
    else:
        raise ValueError(f"unknown route {route!r}")
    if convention is not GeneratorConvention.TWO_PARAM:
        return fmat.value
    try:
        return crb_bound(to_plus_minus(fmat), "phi-").value ** -2.0
    except NotIdentifiableError:
        return 0.0


def evaluate(model: Model | str, params: InputParams, tau: float, eta: float = 1.0, *,
             convention: GeneratorConvention | str = GeneratorConvention.UPPER_ONLY,
             lossy_reference: bool = False, phi: float = 0.3,
             policy: CutoffPolicy = CutoffPolicy(), route: str = "mixing") -> Evaluation:
    """Information metric of ``model`` for input ``params`` at transmission ``tau``.

    The metric is the Fisher information for scalar models and
    ``1/(F^-1)_{--}`` for the two-phase models, so ``delta_phi`` is always
    ``metric ** -0.5``.  A parameter the model cannot see gives metric 0
    (anything below ``ZERO_INFO`` counts) and ``delta_phi = inf``.  Quantum
    models are computed through the tau-independent
    :func:`~phaseref.mixing.mixing_form` of the input (``route="mixing"``) or
    by building the probe state (``route="direct"``).
    ``convention`` and ``phi`` only matter for photon counting.
    """
    model = Model(model)
    if model is Model.QFIM_FINITE_BETA:
        if not params.has_reference:
            raise ValueError("QFIM_FINITE_BETA needs a reference amplitude")
    elif params.has_reference:
        params = replace(params, beta=None)
    loss = _loss(params, eta, lossy_reference)

    if model in (Model.CFI_PHOTON_COUNTING, Model.MC_SATURATION):
        counting = CountingModel(params, tau, GeneratorConvention(convention), loss, policy)
        metric = counting.distribution(phi).fisher().value
    else:
        metric = _quantum_metric(model, params, float(tau), loss, policy, route)

    if not math.isfinite(metric) or metric < -1e-9:
        raise NumericalFailure(f"{model.value}: metric {metric!r} at tau={tau}, params={params}")
    if metric < ZERO_INFO:
        metric = 0.0
    delta = metric ** -0.5 if metric > 0 else math.inf
    return Evaluation(float(metric), float(delta), interferometer_space(params, policy).cutoffs,
                      float(params.truncation_deficit(policy)))


# ---------------------------------------------------------- optimisation

@dataclass(frozen=True)
class OptimizationResult:
    n_bar: float
    model: Model
    tau: float
    fraction: float
    metric: float
    evaluation: Evaluation
    params: InputParams
    evaluations: int

    @property
    def alpha_sq(self) -> float:
        return (1.0 - self.fraction) * self.n_bar

    @property
    def sinh_sq_r(self) -> float:
        return self.fraction * self.n_bar


def _better(a: tuple[float, float, float], b: tuple[float, float, float]) -> bool:
    """Is candidate a = (metric, tau, f) preferred over b?"""
    ma, mb = a[0], b[0]
    scale = max(abs(ma), abs(mb), 1e-300)
    if abs(ma - mb) > TIE_RTOL * scale:
        return ma > mb
    da, db = abs(a[1] - 0.5), abs(b[1] - 0.5)
    if abs(da - db) > 1e-12:
        return da < db
    return a[2] < b[2]


def _pick(cands):
    best = cands[0]
    for c in cands[1:]:
        if _better(c, best):
            best = c
    return best


def optimize_inputs(n_bar: float, model: Model | str, eta: float = 1.0, beta: float | None = None, *,
                    tau: float | None = None, fraction: float | None = None,
                    config: ScenarioConfig | None = None, grid: int | None = None,
                    tol: float = GOLDEN_TOL) -> OptimizationResult:
    """Maximise the model metric over tau and f = sinh^2 r / n_bar.

    A ``grid x grid`` scan (41 x 41 by default) is followed by coordinate-wise
    golden-section refinement, to ``tol`` in each parameter, inside the grid
    cell around the incumbent.  Near-equal metrics (relative 1e-9) are broken
    toward tau = 1/2, then smaller f.  Passing ``tau`` or ``fraction`` pins
    that coordinate.
    """
    model = Model(model)
    if n_bar <= 0:
        raise ValueError("optimize_inputs needs n_bar > 0")
    cfg = config or ScenarioConfig()
    grid = cfg.grid if grid is None else grid
    cache: dict[tuple[float, float], Evaluation] = {}

    def point(t: float, f: float) -> Evaluation:
        key = (float(t), float(f))
        if key not in cache:
            params = cfg.input_params(n_bar, key[1], beta)
            cache[key] = evaluate(model, params, key[0], eta, convention=cfg.convention,
                                  lossy_reference=cfg.lossy_reference, phi=cfg.phi, policy=cfg.policy)
        return cache[key]

    def cand(t, f):
        return (point(t, f).metric, float(t), float(f))

    taus = [float(tau)] if tau is not None else [float(x) for x in np.linspace(0.0, 1.0, grid)]
    fracs = [float(fraction)] if fraction is not None else [float(x) for x in np.linspace(0.0, 1.0, grid)]
    best = _pick([cand(t, f) for f in fracs for t in taus])
    step = 1.0 / (grid - 1)

    def refine(coord: int, best):
        x = best[1 + coord]
        lo, hi = max(0.0, x - step), min(1.0, x + step)

        def fn(v):
            return cand(v, best[2])[0] if coord == 0 else cand(best[1], v)[0]
        xm, _ = golden_section_max(fn, lo, hi, tol)
        pts = [(v, best[2]) if coord == 0 else (best[1], v) for v in (xm, lo, hi)]
        return _pick([best] + [cand(*p) for p in pts])

    free = [c for c, pinned in ((0, tau), (1, fraction)) if pinned is None]
    for _ in range(MAX_ROUNDS if free else 0):
        prev = best
        for coord in free:
            best = refine(coord, best)
        if abs(best[1] - prev[1]) < tol and abs(best[2] - prev[2]) < tol:
            break

    t_star, f_star = best[1], best[2]
    ev = point(t_star, f_star)
    return OptimizationResult(float(n_bar), model, t_star, f_star, ev.metric, ev,
                              cfg.input_params(n_bar, f_star, beta), len(cache))


# ----------------------------------------------------------------- sweep

SWEEP_COLUMNS = ("model", "n_bar", "tau", "alpha_sq", "sinh_sq_r", "metric", "delta_phi",
                 "eta", "beta_abs", "cutoff", "truncation_deficit", "wall_time", "error")


@dataclass(frozen=True)
class SweepRow:
    model: str
    n_bar: float
    tau: float = math.nan
    alpha_sq: float = math.nan
    sinh_sq_r: float = math.nan
    metric: float = math.nan
    delta_phi: float = math.nan
    eta: float = 1.0
    beta_abs: float = math.nan
    cutoff: str = ""
    truncation_deficit: float = math.nan
    wall_time: float = 0.0
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass
class SweepResult:
    rows: list[SweepRow]
    config: ScenarioConfig
    report: dict[str, Any] = field(default_factory=dict)

    @property
    def failed(self) -> list[SweepRow]:
        return [r for r in self.rows if not r.ok]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self) -> str:
        return _csv_text(SCHEMA_VERSION, SWEEP_COLUMNS, [asdict(r) for r in self.rows])

    def metadata(self) -> dict[str, Any]:
        return _metadata(SCHEMA_VERSION, self.config, {
            "cutoffs": sorted({r.cutoff for r in self.rows if r.cutoff}),
            "max_truncation_deficit": max((r.truncation_deficit for r in self.rows if r.ok), default=None),
            "failed_rows": [i for i, r in enumerate(self.rows) if not r.ok],
            "report": self.report,
        })

    def write(self, path: str | Path) -> Path:
        return _write(path, self.to_csv(), self.metadata())


def _csv_text(version: str, columns: Sequence[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# {version}\n")
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def read_csv(path_or_text: str | Path) -> tuple[str, list[dict[str, str]]]:
    """Parse an emitted CSV; returns (schema version, rows as strings)."""
    text = str(path_or_text)
    if "\n" not in text:
        text = Path(text).read_text()
    first, rest = text.split("\n", 1)
    if not first.startswith("# "):
        raise ValueError("missing schema version line")
    return first[2:].strip(), list(csv.DictReader(io.StringIO(rest)))


def _metadata(version: str, config: ScenarioConfig, extra: dict) -> dict[str, Any]:
    return {
        "schema": version,
        "package_version": __version__,
        "config_hash": config.digest(),
        "config": config.to_dict(),
        "tolerances": {
            "deficit_tol": config.deficit_tol,
            "cutoff_guard": config.cutoff_guard,
            "optimizer_grid": config.grid,
            "golden_section_tol": GOLDEN_TOL,
            "tie_rtol": TIE_RTOL,
        },
        "assumptions": {
            "lossless_reference_beam": not config.lossy_reference,
            "optimal_input_phase": config.optimal_phase,
            "input_phase_convention": "alpha and r real and positive" if config.optimal_phase
            else "phases from config",
            "squeezed_mode": "a",
            "loss": "equal transmission eta in both arms",
            "measurement": "photon counting after a balanced beam splitter",
        },
        **extra,
    }


def _write(path: str | Path, text: str, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    meta_path = path.with_name(path.name + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    return meta_path


def _row(task: tuple) -> SweepRow:
    cfg, model, n_bar, beta = task
    model = Model(model)
    start = time.perf_counter()
    base = dict(model=model.value, n_bar=n_bar, eta=cfg.eta,
                beta_abs=beta if beta is not None else math.nan)
    try:
        fraction = cfg.pinned_fraction(n_bar)
        if n_bar == 0:
            fraction = 0.0 if fraction is None else fraction
            t = 0.5 if cfg.tau is None else cfg.tau
            ev = evaluate(model, cfg.input_params(0.0, fraction, beta), t, cfg.eta,
                          convention=cfg.convention, lossy_reference=cfg.lossy_reference,
                          phi=cfg.phi, policy=cfg.policy)
        else:
            res = optimize_inputs(n_bar, model, cfg.eta, beta, tau=cfg.tau, fraction=fraction, config=cfg)
            t, fraction, ev = res.tau, res.fraction, res.evaluation
        error = "" if math.isfinite(ev.delta_phi) else "zero information: phase not identifiable"
        return SweepRow(**base, tau=t, alpha_sq=(1 - fraction) * n_bar, sinh_sq_r=fraction * n_bar,
                        metric=ev.metric, delta_phi=ev.delta_phi, cutoff="x".join(map(str, ev.cutoffs)),
                        truncation_deficit=ev.truncation_deficit,
                        wall_time=time.perf_counter() - start, error=error)
    except (NumericalFailure, CutoffError, NotIdentifiableError, ValueError, MemoryError,
            np.linalg.LinAlgError) as exc:
        log.error("row %s n_bar=%s beta=%s failed: %s", model.value, n_bar, beta, exc)
        return SweepRow(**base, wall_time=time.perf_counter() - start,
                        error=f"{type(exc).__name__}: {exc}")


def _run_rows(tasks: list[tuple], workers: int) -> list[SweepRow]:
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(min(workers, len(tasks))) as pool:
            return list(pool.map(_row, tasks))
    return [_row(t) for t in tasks]


def sweep(config: ScenarioConfig, workers: int = 1) -> SweepResult:
    """One row per (n_bar, model); n_bar varies slowest.

    Rows may run in a process pool but are returned in grid order.  A row
    that fails carries its error message and the sweep continues.
    """
    tasks = []
    for n_bar in config.n_bar:
        for model in config.model:
            beta = config.beta[0] if model is Model.QFIM_FINITE_BETA else None
            tasks.append((config, model.value, n_bar, beta))
    return SweepResult(_run_rows(tasks, workers), config)


def reference_beam_study(n_bar: float, eta: float, betas: Sequence[float], *,
                         config: ScenarioConfig | None = None, workers: int = 1,
                         slack: float = 1e-8) -> SweepResult:
    """Optimised delta phi_- of the fully dephased three-mode state versus |beta|.

    Besides one ``QFIM_FINITE_BETA`` row per |beta| the result carries two
    limit rows: ``FQ_RHO`` (no reference at all) and ``QFIM_EXTERNAL_REF``
    (a perfect external reference).  ``report`` states whether the curve is
    non-increasing within ``slack`` and how far its last point is from the
    external-reference bound.
    """
    betas = [float(b) for b in betas]
    if not betas:
        raise ConfigError("beta grid is empty")
    if betas != sorted(betas):
        raise ConfigError("beta grid must be ascending")
    cfg = (config or ScenarioConfig()).with_overrides(eta=eta)
    cfg = replace(cfg, n_bar=(float(n_bar),), beta=tuple(betas),
                  model=(Model.QFIM_FINITE_BETA,))
    tasks = [(cfg, Model.QFIM_FINITE_BETA.value, float(n_bar), b) for b in betas]
    tasks += [(cfg, Model.FQ_RHO.value, float(n_bar), None),
              (cfg, Model.QFIM_EXTERNAL_REF.value, float(n_bar), None)]
    rows = _run_rows(tasks, workers)
    curve, rho_row, ext_row = rows[:-2], rows[-2], rows[-1]
    deltas = np.array([r.delta_phi for r in curve])
    ok = all(r.ok for r in curve)
    report = {
        "n_bar": n_bar,
        "eta": eta,
        "beta_abs": betas,
        "delta_phi_minus": deltas.tolist(),
        "no_reference_bound": rho_row.delta_phi,
        "external_reference_bound": ext_row.delta_phi,
        "non_increasing": bool(ok and np.all(np.diff(deltas) <= slack)),
        "last_to_external_ratio": float(deltas[-1] / ext_row.delta_phi) if ok else math.nan,
        "first_to_no_reference_ratio": float(deltas[0] / rho_row.delta_phi) if ok else math.nan,
    }
    return SweepResult(rows, cfg, report)


# ------------------------------------------------------------ monte carlo

MC_COLUMNS = ("k", "trials", "seed", "phi", "tau", "n_bar", "squeeze_fraction", "eta", "fisher",
              "qfi_rho", "empirical_std", "crb", "crb_quantum", "std_ratio", "bias", "wall_time")


@dataclass
class MCReport:
    rows: list[dict[str, Any]]
    config: ScenarioConfig

    def to_csv(self) -> str:
        return _csv_text(MC_SCHEMA_VERSION, MC_COLUMNS, self.rows)

    def metadata(self) -> dict[str, Any]:
        return _metadata(MC_SCHEMA_VERSION, self.config, {"estimator": "windowed maximum likelihood"})

    def write(self, path: str | Path) -> Path:
        return _write(path, self.to_csv(), self.metadata())


def run_mc_saturation(config: ScenarioConfig, workers: int = 1) -> MCReport:
    """Empirical MLE spread against 1/sqrt(k F) and 1/sqrt(k F_Q^rho).

    Uses the first ``n_bar`` of the config, its pinned input split (default
    f = 0) and ``tau`` (default 1/2).  One row per ``k``.
    """
    if Model.MC_SATURATION not in config.model:
        raise ConfigError("run_mc_saturation needs model MC_SATURATION")
    n_bar = config.n_bar[0]
    fraction = config.pinned_fraction(n_bar) if n_bar > 0 else 0.0
    fraction = 0.0 if fraction is None else fraction
    tau = 0.5 if config.tau is None else config.tau
    params = config.input_params(n_bar, fraction)
    loss = _loss(params, config.eta, False)
    qfi_rho = evaluate(Model.FQ_RHO, params, tau, config.eta, policy=config.policy).metric
    rows = []
    for k in config.k:
        start = time.perf_counter()
        run = run_estimation(params, tau, config.phi, k, config.trials, config.seed,
                             GeneratorConvention(config.convention), loss, config.policy,
                             workers=workers, qfi=qfi_rho)
        rows.append({
            "k": k, "trials": config.trials, "seed": config.seed, "phi": config.phi, "tau": tau,
            "n_bar": n_bar, "squeeze_fraction": fraction, "eta": config.eta,
            "fisher": run.fisher, "qfi_rho": qfi_rho, "empirical_std": run.std, "crb": run.crb,
            "crb_quantum": float(1.0 / math.sqrt(k * qfi_rho)) if qfi_rho > 0 else math.inf,
            "std_ratio": run.std_ratio, "bias": run.bias, "wall_time": time.perf_counter() - start,
        })
    return MCReport(rows, config)


# ----------------------------------------------------------- optimize CLI

OPT_COLUMNS = ("model", "n_bar", "eta", "beta_abs", "tau", "squeeze_fraction", "metric",
               "delta_phi", "evaluations", "grid", "error")


def optimize_table(config: ScenarioConfig) -> tuple[str, list[dict]]:
    rows = []
    for n_bar in config.n_bar:
        for model in config.model:
            beta = config.beta[0] if model is Model.QFIM_FINITE_BETA else None
            row = {"model": model.value, "n_bar": n_bar, "eta": config.eta,
                   "beta_abs": beta if beta is not None else math.nan, "grid": config.grid, "error": ""}
            try:
                res = optimize_inputs(n_bar, model, config.eta, beta, tau=config.tau,
                                      fraction=config.pinned_fraction(n_bar), config=config)
                row.update(tau=res.tau, squeeze_fraction=res.fraction, metric=res.metric,
                           delta_phi=res.evaluation.delta_phi, evaluations=res.evaluations)
            except (NumericalFailure, CutoffError, ValueError) as exc:
                log.error("optimize %s n_bar=%s failed: %s", model.value, n_bar, exc)
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return _csv_text(OPT_SCHEMA_VERSION, OPT_COLUMNS, rows), rows


def write_optimize(path: str | Path, config: ScenarioConfig) -> tuple[str, list[dict]]:
    text, rows = optimize_table(config)
    if path is not None:
        _write(path, text, _metadata(OPT_SCHEMA_VERSION, config, {}))
    return text, rows


def cutoff_stability(config: ScenarioConfig, extra_guard: int = 5, workers: int = 1) -> float:
    """Largest relative change of any delta phi when the guard band grows.

    Inputs are held at the optimum found with the original guard, so only
    truncation effects enter.
    """
    base = sweep(config, workers)
    worst = 0.0
    for row in base.rows:
        if not row.ok:
            raise NumericalFailure(f"row {row.model} n_bar={row.n_bar} failed: {row.error}")
        f = row.sinh_sq_r / row.n_bar if row.n_bar > 0 else 0.0
        wider = config.with_overrides(cutoff_guard=config.cutoff_guard + extra_guard)
        beta = None if math.isnan(row.beta_abs) else row.beta_abs
        ev = evaluate(row.model, wider.input_params(row.n_bar, f, beta), row.tau, row.eta,
                      convention=wider.convention, lossy_reference=wider.lossy_reference,
                      phi=wider.phi, policy=wider.policy)
        worst = max(worst, abs(ev.delta_phi / row.delta_phi - 1.0))
    return worst
