"""Classical and quantum Fisher information, QFI matrices and Cramer-Rao bounds."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sps
from scipy.sparse.csgraph import connected_components

from .fock import DensityOperator, FactoredDensity, FockVector, ModeOperator

SLD_FLOOR = 1e-12
PROBABILITY_FLOOR = 1e-14
NORM_TOL = 1e-6
GENERATOR_HERMITIAN_TOL = 1e-10


class NotIdentifiableError(ValueError):
    """The requested parameter lies in the kernel of the Fisher matrix."""


@dataclass(frozen=True)
class FisherMatrix:
    labels: tuple[str, ...]
    matrix: np.ndarray
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        mat = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        labels = tuple(self.labels)
        if mat.shape != (len(labels), len(labels)):
            raise ValueError(f"matrix shape {mat.shape} does not match labels {labels}")
        scale = max(1.0, float(np.abs(mat).max(initial=0.0)))
        if np.abs(mat - mat.T).max(initial=0.0) > 1e-10 * scale:
            raise ValueError("Fisher matrix is not symmetric")
        mat = 0.5 * (mat + mat.T)
        evals = np.linalg.eigvalsh(mat)
        if evals.size and evals[0] < -1e-8 * max(evals[-1], 1e-300) - 1e-14:
            raise ValueError(f"Fisher matrix is not positive semidefinite (min eigenvalue {evals[0]:.3e})")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "matrix", mat)

    @property
    def value(self) -> float:
        if self.matrix.shape != (1, 1):
            raise ValueError("value is defined only for a single parameter")
        return float(self.matrix[0, 0])

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown parameter {label!r}; have {self.labels}") from None

    def __getitem__(self, pair) -> float:
        i, j = (self.index(p) if isinstance(p, str) else p for p in pair)
        return float(self.matrix[i, j])


@dataclass(frozen=True)
class PrecisionBound:
    label: str
    value: float
    k: int = 1

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"precision bound must be positive, got {self.value}")


def classical_fisher(dist, ddist, label: str = "phi", floor: float = 0.0) -> FisherMatrix:
    """sum_x (dp_x)^2 / p_x over outcomes with p_x > ``floor``.

    Terms with small p are kept by default: for p = sum_k |A_k|^2 the ratio
    (dp)^2/p never exceeds 4 sum_k |dA_k|^2, so they cannot blow up, and
    near-dark outcomes can carry real information.  Outcomes with exactly
    zero probability are skipped.  The derivative mass and Fisher
    contribution of outcomes below ``PROBABILITY_FLOOR`` are reported in the
    diagnostics.
    """
    p = np.asarray(dist, dtype=float).ravel()
    dp = np.asarray(ddist, dtype=float).ravel()
    if p.shape != dp.shape:
        raise ValueError("distribution and derivative tables differ in shape")
    if p.size and p.min() < -1e-12:
        raise ValueError(f"negative probability {p.min():.3e}")
    keep = p > floor
    terms = np.zeros_like(p)
    terms[keep] = dp[keep] ** 2 / p[keep]
    tiny = p < PROBABILITY_FLOOR
    diagnostics = {
        "skipped_derivative_mass": float(np.abs(dp[~keep]).sum()),
        "small_probability_derivative_mass": float(np.abs(dp[tiny]).sum()),
        "small_probability_information": float(terms[tiny].sum()),
        "total_probability": float(p.sum()),
        "derivative_sum": float(dp.sum()),
    }
    return FisherMatrix((label,), [[float(terms.sum())]], diagnostics)


def _check_generator(generator: ModeOperator):
    err = generator.hermiticity_error()
    if err > GENERATOR_HERMITIAN_TOL:
        raise ValueError(f"generator is not Hermitian (deviation {err:.3e})")


def derivative_state(psi, generator: ModeOperator):
    """d/dphi of exp(-i phi G)|psi> at phi = 0, i.e. -iG|psi>.

    A :class:`DensityOperator` gives the commutator form -i[G, rho].
    """
    _check_generator(generator)
    if isinstance(psi, FockVector):
        return FockVector(psi.space, -1j * generator.apply(psi.amplitudes))
    if isinstance(psi, DensityOperator):
        g_rho = generator.apply(psi.matrix)
        comm = g_rho - g_rho.conj().T
        return DensityOperator(psi.space, -1j * comm, check=False)
    raise TypeError(f"unsupported state type {type(psi).__name__}")


def _labels(n: int, labels) -> tuple[str, ...]:
    if labels is not None:
        return tuple(labels)
    return ("phi",) if n == 1 else tuple(f"phi{i + 1}" for i in range(n))


def qfim_pure(psi: FockVector, *dpsis: FockVector, labels: Sequence[str] | None = None) -> FisherMatrix:
    """4 Re(<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>) for a pure state.

    The state is normalised on the fly so a small truncation deficit does not
    bias the result.
    """
    norm2 = psi.norm_squared()
    if abs(norm2 - 1.0) > NORM_TOL:
        raise ValueError(f"state norm^2 {norm2:.8f} is not 1")
    d = np.stack([dp.amplitudes for dp in dpsis])
    overlap = d.conj() @ psi.amplitudes / norm2
    gram = d.conj() @ d.T / norm2
    mat = 4.0 * np.real(gram - np.outer(overlap, overlap.conj()))
    return FisherMatrix(_labels(len(dpsis), labels), mat, {"norm_squared": norm2})


def qfi_pure(psi: FockVector, dpsi: FockVector, label: str = "phi") -> FisherMatrix:
    return qfim_pure(psi, dpsi, labels=(label,))


def _components(mats: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Index sets on which all ``mats`` are simultaneously block diagonal."""
    pattern = np.zeros(mats[0].shape, dtype=bool)
    for m in mats:
        pattern |= m != 0
    active = np.nonzero(pattern.any(axis=1))[0]
    if active.size == 0:
        return []
    sub = pattern[np.ix_(active, active)]
    count, labels = connected_components(sps.csr_matrix(sub), directed=False)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(count + 1))
    return [active[order[bounds[i]:bounds[i + 1]]] for i in range(count)]


def qfim_mixed(rho: DensityOperator, *drhos: DensityOperator,
               labels: Sequence[str] | None = None) -> FisherMatrix:
    """SLD quantum Fisher matrix from the eigen-decomposition of ``rho``.

    F_jk = sum 2 Re(<m|d_j rho|n><n|d_k rho|m>) / (l_m + l_n), over pairs
    with l_m + l_n above ``SLD_FLOOR * max(l)``.  The result is divided by
    tr(rho) so truncated states are treated as normalised.  ``rho`` and the
    derivatives are split into common diagonal blocks first, which leaves
    the sum unchanged and makes sector-structured states cheap.
    """
    tr = rho.trace()
    if abs(tr - 1.0) > NORM_TOL:
        raise ValueError(f"trace {tr:.8f} is not 1")
    mats = [rho.matrix] + [d.matrix for d in drhos]
    systems = []
    try:
        for idx in _components(mats):
            sub = rho.matrix[np.ix_(idx, idx)]
            evals, evecs = np.linalg.eigh(0.5 * (sub + sub.conj().T))
            rot = [evecs.conj().T @ d.matrix[np.ix_(idx, idx)] @ evecs for d in drhos]
            systems.append((evals, rot))
    except np.linalg.LinAlgError as exc:
        raise ValueError("spectral decomposition failed") from exc
    lowest = min((float(e[0]) for e, _ in systems), default=0.0)
    if lowest < -1e-10:
        raise ValueError(f"density matrix has negative eigenvalue {lowest:.3e}")
    top = max((float(e[-1]) for e, _ in systems), default=0.0)
    n = len(drhos)
    mat = np.zeros((n, n))
    dropped = 0.0
    for evals, rot in systems:
        evals = np.clip(evals, 0.0, None)
        lam_sum = evals[:, None] + evals[None, :]
        keep = lam_sum > SLD_FLOOR * top
        weight = np.where(keep, 2.0 / np.where(keep, lam_sum, 1.0), 0.0)
        for j in range(n):
            for k in range(j, n):
                mat[j, k] += np.sum(weight * np.real(rot[j] * rot[k].T))
        dropped += sum(float(np.abs(r[~keep]).sum()) for r in rot)
    mat = np.triu(mat) + np.triu(mat, 1).T
    return FisherMatrix(_labels(n, labels), mat / tr, {"dropped_derivative_weight": dropped, "trace": tr})


def qfi_mixed(rho: DensityOperator, drho: DensityOperator, label: str = "phi") -> FisherMatrix:
    return qfim_mixed(rho, drho, labels=(label,))


def _block_support(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and orthonormal eigenvectors (columns) of W W^dag."""
    if w.shape[0] <= w.shape[1]:
        rho = w @ w.conj().T
        return np.linalg.eigh(0.5 * (rho + rho.conj().T))
    gram = w.conj().T @ w
    lam, vecs = np.linalg.eigh(0.5 * (gram + gram.conj().T))
    pos = lam > 0
    u = np.zeros((w.shape[0], lam.size), dtype=complex)
    u[:, pos] = (w @ vecs[:, pos]) / np.sqrt(lam[pos])
    return lam, u


def _block_qfim(lam: np.ndarray, u: np.ndarray, gens: list[np.ndarray]) -> tuple[np.ndarray, float]:
    """QFIM contribution of one block for diagonal generators."""
    keep = lam > 0.0
    dropped = float(lam[~keep].clip(0.0).sum())
    lam, u = lam[keep], u[:, keep]
    n = len(gens)
    if lam.size == 0:
        return np.zeros((n, n)), dropped
    gu = [g[:, None] * u for g in gens]
    gmat = [u.conj().T @ x for x in gu]
    lam_prod = 8.0 * np.outer(lam, lam) / (lam[:, None] + lam[None, :])
    out = np.zeros((n, n))
    for j in range(n):
        for k in range(j, n):
            diag_term = 4.0 * np.sum(lam * np.real(np.sum(gu[j].conj() * gu[k], axis=0)))
            cross = np.sum(lam_prod * np.real(gmat[j] * gmat[k].T))
            out[j, k] = out[k, j] = diag_term - cross
    return out, dropped


def qfim_factored(state: FactoredDensity, gens: Sequence[ModeOperator],
                  labels: Sequence[str] | None = None) -> FisherMatrix:
    """Quantum Fisher matrix of exp(-i sum phi_j G_j) rho exp(+i ...) at phi = 0.

    Specialised to generators diagonal in the Fock basis, which preserve
    every photon-number block of ``state``.  Each block is diagonalised on
    its support (through the smaller of W W^dag and W^dag W); contributions
    from the kernel enter through
    4 sum_m l_m <m|G_j G_k|m> - sum_mn 8 l_m l_n/(l_m + l_n) Re(G^j_mn G^k_nm).
    Every positive eigenvalue is kept: the weights 8 l_m l_n/(l_m + l_n) stay
    bounded, so round-off eigenvalues contribute at round-off level.
    """
    for g in gens:
        _check_generator(g)
    diags = [np.real(g.full_diagonal()) for g in gens]
    tr = state.trace()
    if tr <= 0:
        raise ValueError("state has zero trace")
    systems = [(idx, _block_support(w)) for idx, w in state.blocks]
    n = len(gens)
    mat = np.zeros((n, n))
    dropped = 0.0
    for idx, (lam, u) in systems:
        part, lost = _block_qfim(lam, u, [d[idx] for d in diags])
        mat += part
        dropped += lost
    return FisherMatrix(_labels(n, labels), mat / tr, {"dropped_eigenvalue_weight": dropped, "trace": tr})


def qfim_sectors(psi: FockVector, gens: Sequence[ModeOperator], sectors: np.ndarray,
                 labels: Sequence[str] | None = None) -> FisherMatrix:
    """QFIM of a pure state after projection onto the level sets of ``sectors``.

    With diagonal generators each sector contributes ``4 p_N Cov_N(G_j, G_k)``,
    the pure-state QFIM of its normalised component.  This equals
    :func:`qfim_factored` on the split state but needs no eigendecomposition.
    """
    for g in gens:
        _check_generator(g)
    w = np.abs(psi.amplitudes) ** 2
    tr = w.sum()
    if tr <= 0:
        raise ValueError("state has zero norm")
    _, lab = np.unique(np.asarray(sectors), return_inverse=True)
    diags = [np.real(g.full_diagonal()) for g in gens]
    p = np.bincount(lab, weights=w)
    first = [np.bincount(lab, weights=w * d) for d in diags]
    live = p > 0
    n = len(gens)
    mat = np.zeros((n, n))
    for j in range(n):
        for k in range(j, n):
            second = np.sum(w * diags[j] * diags[k])
            mat[j, k] = mat[k, j] = 4.0 * (second - np.sum(first[j][live] * first[k][live] / p[live]))
    return FisherMatrix(_labels(n, labels), mat / tr, {"trace": float(tr)})


JACOBIAN_PM = 0.5 * np.array([[1.0, 1.0], [1.0, -1.0]])


def to_plus_minus(fisher: FisherMatrix, labels=("phi+", "phi-")) -> FisherMatrix:
    """Re-express a (phi1, phi2) Fisher matrix in phi+- = phi1 +- phi2."""
    if fisher.matrix.shape != (2, 2):
        raise ValueError("to_plus_minus needs a 2x2 Fisher matrix")
    mat = JACOBIAN_PM.T @ fisher.matrix @ JACOBIAN_PM
    return FisherMatrix(tuple(labels), mat, dict(fisher.diagnostics))


def from_plus_minus(fisher: FisherMatrix, labels=("phi1", "phi2")) -> FisherMatrix:
    if fisher.matrix.shape != (2, 2):
        raise ValueError("from_plus_minus needs a 2x2 Fisher matrix")
    inv_j = np.linalg.inv(JACOBIAN_PM)
    mat = inv_j.T @ fisher.matrix @ inv_j
    return FisherMatrix(tuple(labels), mat, dict(fisher.diagnostics))


def inverse_fisher(fisher: FisherMatrix) -> tuple[np.ndarray, dict]:
    """Inverse (adjugate for 2x2) or pseudo-inverse of a degenerate matrix.

    The pseudo-inverse is used when det < 1e-12 * trace^2.
    """
    mat = fisher.matrix
    evals = np.linalg.eigvalsh(mat)
    cond = float(evals[-1] / evals[0]) if evals[0] > 0 else np.inf
    if mat.shape == (1, 1):
        if mat[0, 0] <= 0:
            return np.array([[np.inf]]), {"condition": np.inf, "pseudo_inverse": True}
        return 1.0 / mat, {"condition": 1.0, "pseudo_inverse": False}
    if mat.shape == (2, 2):
        det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
        if det > 1e-12 * np.trace(mat) ** 2:
            adj = np.array([[mat[1, 1], -mat[0, 1]], [-mat[1, 0], mat[0, 0]]])
            return adj / det, {"condition": cond, "pseudo_inverse": False}
    elif evals[0] > 1e-12 * max(evals[-1], 1e-300):
        return np.linalg.inv(mat), {"condition": cond, "pseudo_inverse": False}
    return np.linalg.pinv(mat, rcond=1e-10, hermitian=True), {"condition": cond, "pseudo_inverse": True}


def crb_bound(fisher: FisherMatrix, parameter: str | int = 0, k: int = 1) -> PrecisionBound:
    """Cramer-Rao bound sqrt((F^-1)_ii / k) on one parameter."""
    if k < 1:
        raise ValueError("k must be a positive number of repetitions")
    i = fisher.index(parameter) if isinstance(parameter, str) else int(parameter)
    label = fisher.labels[i]
    inv, info = inverse_fisher(fisher)
    if info["pseudo_inverse"]:
        evals, evecs = np.linalg.eigh(fisher.matrix)
        kernel = evecs[:, evals <= 1e-10 * max(evals[-1], 1e-300)]
        if kernel.size and np.abs(kernel[i]).max() > 1e-6:
            raise NotIdentifiableError(f"parameter {label!r} is not identifiable from this Fisher matrix")
    var = inv[i, i]
    if not np.isfinite(var) or var <= 0:
        raise NotIdentifiableError(f"parameter {label!r} is not identifiable from this Fisher matrix")
    return PrecisionBound(label, float(np.sqrt(var / k)), k)
