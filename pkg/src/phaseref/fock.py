"""Truncated Fock-space representation of multi-mode bosonic states.

Basis ordering is lexicographic in the occupation tuple ``(n_1, ..., n_M)``
with mode 1 slowest, i.e. the C-order flattening of an array of shape
``(cutoff_1 + 1, ..., cutoff_M + 1)``.  Every module consumes this ordering
through :class:`FockSpace`; nothing else re-derives it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sps

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class CutoffPolicy:
    """Automatic cutoff selection.

    A mode's cutoff is the smallest photon number at which the
    (n+1)^2-weighted tail of its input photon statistics drops below
    ``deficit_tol``, plus ``guard`` extra levels.  The plain truncation
    deficit is then below ``deficit_tol`` as well.
    """

    deficit_tol: float = 1e-10
    guard: int = 5


@dataclass(frozen=True)
class FockSpace:
    cutoffs: tuple[int, ...]

    def __post_init__(self):
        cutoffs = tuple(int(c) for c in np.atleast_1d(self.cutoffs))
        if not cutoffs or min(cutoffs) < 0:
            raise ValueError(f"cutoffs must be a nonempty tuple of non-negative ints, got {self.cutoffs!r}")
        object.__setattr__(self, "cutoffs", cutoffs)

    @property
    def mode_count(self) -> int:
        return len(self.cutoffs)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cutoffs)

    @property
    def dimension(self) -> int:
        return int(np.prod(self.dims))

    def check_mode(self, mode: int) -> int:
        if not 0 <= mode < self.mode_count:
            raise IndexError(f"mode {mode} out of range for a {self.mode_count}-mode space")
        return int(mode)

    def subspace(self, modes: Sequence[int]) -> "FockSpace":
        return FockSpace(tuple(self.cutoffs[self.check_mode(m)] for m in modes))

    @cached_property
    def _occupations(self) -> np.ndarray:
        grids = np.indices(self.dims).reshape(self.mode_count, -1)
        grids.setflags(write=False)
        return grids

    def numbers(self, mode: int) -> np.ndarray:
        """Photon number of ``mode`` for every basis index."""
        return self._occupations[self.check_mode(mode)]

    def total_number(self, modes: Iterable[int] | None = None) -> np.ndarray:
        modes = range(self.mode_count) if modes is None else modes
        total = np.zeros(self.dimension, dtype=np.int64)
        for m in modes:
            total = total + self.numbers(m)
        return total

    def index(self, occupation: Sequence[int]) -> int:
        if len(occupation) != self.mode_count:
            raise ValueError("occupation length does not match mode count")
        return int(np.ravel_multi_index(tuple(occupation), self.dims))

    def basis_state(self, occupation: Sequence[int]) -> "FockVector":
        amps = np.zeros(self.dimension, dtype=complex)
        amps[self.index(occupation)] = 1.0
        return FockVector(self, amps)

    def vacuum(self) -> "FockVector":
        return self.basis_state((0,) * self.mode_count)


@dataclass(frozen=True)
class FockVector:
    space: FockSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.space.dimension:
            raise ValueError(f"expected {self.space.dimension} amplitudes, got {amps.size}")
        object.__setattr__(self, "amplitudes", amps)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def deficit(self) -> float:
        """Probability mass missing from the truncated amplitudes."""
        return 1.0 - self.norm_squared()

    def normalized(self) -> "FockVector":
        return FockVector(self.space, self.amplitudes / np.sqrt(self.norm_squared()))

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.space.dims)

    def expectation(self, op: "ModeOperator") -> complex:
        return complex(np.vdot(self.amplitudes, op.apply(self.amplitudes)))

    def mean_number(self, modes: Iterable[int] | None = None) -> float:
        probs = np.abs(self.amplitudes) ** 2
        return float(probs @ self.space.total_number(modes))

    def projector(self) -> "DensityOperator":
        return DensityOperator(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityOperator:
    """Dense density matrix.  Construction checks Hermiticity."""

    space: FockSpace
    matrix: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        n = self.space.dimension
        if mat.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got shape {mat.shape}")
        if self.check:
            dev = hermiticity_error(mat)
            if dev > HERMITIAN_TOL * max(1.0, float(np.abs(mat).max(initial=0.0))):
                raise ValueError(f"density matrix is not Hermitian (max deviation {dev:.3e})")
        object.__setattr__(self, "matrix", mat)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def expectation(self, op: "ModeOperator") -> complex:
        return complex(np.trace(op.apply(self.matrix)))

    def mean_number(self, modes: Iterable[int] | None = None) -> float:
        return float(np.real(np.diagonal(self.matrix)) @ self.space.total_number(modes))


def hermiticity_error(mat) -> float:
    if sps.issparse(mat):
        diff = (mat - mat.conj().T).tocoo()
        return float(np.abs(diff.data).max(initial=0.0))
    return float(np.abs(mat - mat.conj().T).max(initial=0.0))


def _apply_local(local_apply, space: FockSpace, modes: tuple[int, ...], data: np.ndarray) -> np.ndarray:
    """Apply an operator on ``modes`` to each column of ``data`` (shape (dim,) or (dim, K))."""
    vec = data.ndim == 1
    cols = data.reshape(space.dimension, -1)
    k = cols.shape[1]
    tens = cols.reshape(space.dims + (k,))
    front = np.moveaxis(tens, list(modes), list(range(len(modes))))
    moved_shape = front.shape
    local_dim = int(np.prod(moved_shape[: len(modes)]))
    out = local_apply(front.reshape(local_dim, -1))
    out = np.moveaxis(np.asarray(out).reshape(moved_shape), list(range(len(modes))), list(modes))
    out = out.reshape(space.dimension, k)
    return out[:, 0] if vec else out


@dataclass(frozen=True)
class ModeOperator:
    """Operator acting on a subset of modes of ``space``.

    ``matrix`` lives on the local space of ``modes`` (dense or sparse);
    :meth:`full` embeds it in the whole truncated space.  Diagonal operators
    may be given by ``diagonal`` alone.
    """

    space: FockSpace
    modes: tuple[int, ...]
    matrix: np.ndarray | sps.spmatrix | None = None
    unitary: bool = False
    diagonal: np.ndarray | None = None

    def __post_init__(self):
        modes = tuple(self.space.check_mode(m) for m in np.atleast_1d(self.modes))
        if len(set(modes)) != len(modes):
            raise ValueError(f"repeated modes {modes}")
        object.__setattr__(self, "modes", modes)
        local = self.local_space.dimension
        if self.diagonal is not None:
            diag = np.asarray(self.diagonal).reshape(-1)
            if diag.size != local:
                raise ValueError("diagonal length does not match local dimension")
            object.__setattr__(self, "diagonal", diag)
        elif self.matrix is None:
            raise ValueError("either matrix or diagonal is required")
        elif self.matrix.shape != (local, local):
            raise ValueError(f"local matrix must be {local}x{local}, got {self.matrix.shape}")
        if self.unitary:
            err = self.unitarity_error()
            if err > UNITARY_TOL:
                raise ValueError(f"operator flagged unitary deviates from unitarity by {err:.3e}")

    @cached_property
    def local_space(self) -> FockSpace:
        return self.space.subspace(self.modes)

    @property
    def is_diagonal(self) -> bool:
        return self.diagonal is not None

    def local_matrix(self):
        if self.matrix is not None:
            return self.matrix
        return sps.diags(self.diagonal, format="csr")

    def full_diagonal(self) -> np.ndarray:
        """Diagonal over the whole space (only for diagonal operators)."""
        if self.diagonal is None:
            raise ValueError("operator is not diagonal")
        local_idx = np.ravel_multi_index(
            tuple(self.space.numbers(m) for m in self.modes), self.local_space.dims
        )
        return self.diagonal[local_idx]

    def full(self, dense: bool = False):
        """Matrix on the whole space (sparse by default)."""
        if self.diagonal is not None:
            mat = sps.diags(self.full_diagonal(), format="csr")
        else:
            mat = self._kron_embed(sps.csr_matrix(self.local_matrix()))
        return mat.toarray() if dense else mat

    def _kron_embed(self, local):
        order = list(self.modes) + [m for m in range(self.space.mode_count) if m not in self.modes]
        rest = int(np.prod([self.space.dims[m] for m in order[len(self.modes):]], dtype=int))
        mat = sps.kron(local, sps.identity(rest, format="csr"), format="csr")
        if order == list(range(self.space.mode_count)):
            return mat
        # perm[i]: position of natural basis state i in the modes-first layout
        perm = np.ravel_multi_index(
            tuple(self.space.numbers(m) for m in order), [self.space.dims[m] for m in order]
        )
        return mat[perm][:, perm]

    def _local_apply(self, block: np.ndarray) -> np.ndarray:
        if self.diagonal is not None:
            return self.diagonal[:, None] * block
        return self.matrix @ block

    def apply(self, data):
        """Act on a vector, a (dim, K) column stack, or a FockVector."""
        if isinstance(data, FockVector):
            return FockVector(self.space, self.apply(data.amplitudes))
        data = np.asarray(data, dtype=complex)
        if data.shape[0] != self.space.dimension:
            raise ValueError("data does not live on this operator's space")
        if self.modes == tuple(range(self.space.mode_count)):
            out = self._local_apply(data.reshape(self.space.dimension, -1))
            return np.asarray(out).reshape(data.shape)
        return _apply_local(self._local_apply, self.space, self.modes, data)

    def adjoint(self) -> "ModeOperator":
        if self.diagonal is not None:
            return ModeOperator(self.space, self.modes, diagonal=self.diagonal.conj(), unitary=self.unitary)
        return ModeOperator(self.space, self.modes, self.matrix.conj().T, unitary=self.unitary)

    def conjugate_density(self, rho: DensityOperator) -> DensityOperator:
        """Return ``U rho U^dagger``."""
        left = self.apply(rho.matrix)
        both = self.apply(left.conj().T).conj().T
        return DensityOperator(rho.space, 0.5 * (both + both.conj().T))

    def hermiticity_error(self) -> float:
        if self.diagonal is not None:
            return float(np.abs(self.diagonal.imag).max(initial=0.0))
        return hermiticity_error(self.matrix)

    def unitarity_error(self) -> float:
        if self.diagonal is not None:
            return float(np.abs(np.abs(self.diagonal) - 1.0).max(initial=0.0))
        mat = self.matrix
        prod = mat.conj().T @ mat
        if sps.issparse(prod):
            prod = (prod - sps.identity(mat.shape[0])).tocoo()
            return float(np.abs(prod.data).max(initial=0.0))
        return float(np.abs(prod - np.eye(mat.shape[0])).max(initial=0.0))


def annihilation_op(space: FockSpace, mode: int) -> ModeOperator:
    mode = space.check_mode(mode)
    cutoff = space.cutoffs[mode]
    mat = np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)
    return ModeOperator(space, (mode,), mat)


def creation_op(space: FockSpace, mode: int) -> ModeOperator:
    return annihilation_op(space, mode).adjoint()


def number_op(space: FockSpace, mode: int) -> ModeOperator:
    mode = space.check_mode(mode)
    return ModeOperator(space, (mode,), diagonal=np.arange(space.cutoffs[mode] + 1, dtype=float))


def tensor(v1: FockVector, v2: FockVector) -> FockVector:
    space = FockSpace(v1.space.cutoffs + v2.space.cutoffs)
    return FockVector(space, np.kron(v1.amplitudes, v2.amplitudes))


def tensor_density(r1: DensityOperator, r2: DensityOperator) -> DensityOperator:
    space = FockSpace(r1.space.cutoffs + r2.space.cutoffs)
    return DensityOperator(space, np.kron(r1.matrix, r2.matrix))


def embed(state, space: FockSpace):
    """Zero-pad a vector or unblocked factored state into larger cutoffs."""
    old = state.space
    if space.mode_count != old.mode_count or any(n < o for n, o in zip(space.cutoffs, old.cutoffs)):
        raise ValueError(f"cannot embed {old} into {space}")
    if isinstance(state, FactoredDensity):
        cols = state.columns()
        out = np.zeros(space.dims + (cols.shape[1],), dtype=complex)
        out[tuple(slice(0, d) for d in old.dims)] = cols.reshape(old.dims + (-1,))
        return FactoredDensity.from_columns(space, out.reshape(space.dimension, -1))
    out = np.zeros(space.dims, dtype=complex)
    out[tuple(slice(0, d) for d in old.dims)] = state.tensor_view()
    return FockVector(space, out.reshape(-1))


def tensor_factored(f1: "FactoredDensity", f2: "FactoredDensity") -> "FactoredDensity":
    """Product state; column count is the product of the input ranks."""
    w1, w2 = f1.columns(), f2.columns()
    cols = np.einsum("ik,jl->ijkl", w1, w2).reshape(w1.shape[0] * w2.shape[0], -1)
    return FactoredDensity.from_columns(FockSpace(f1.space.cutoffs + f2.space.cutoffs), cols)


def partial_trace(rho: DensityOperator, keep: Iterable[int]) -> DensityOperator:
    keep = sorted({rho.space.check_mode(m) for m in keep})
    if not keep:
        raise ValueError("keep must name at least one mode")
    n = rho.space.mode_count
    dims = rho.space.dims
    tens = rho.matrix.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[i].upper() if i in keep else letters[i] for i in range(n)]
    out = "".join(letters[i] for i in keep) + "".join(letters[i].upper() for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, tens)
    sub = rho.space.subspace(keep)
    mat = reduced.reshape(sub.dimension, sub.dimension)
    return DensityOperator(sub, 0.5 * (mat + mat.conj().T))


@dataclass(frozen=True)
class FactoredDensity:
    """Mixed state stored as ``rho = sum_B W_B W_B^dagger``.

    Each block ``B`` is a pair ``(indices, factor)``: basis indices (into
    ``space``) spanned by the block and a ``(len(indices), rank)`` factor.
    Blocks have disjoint supports.  A state that has not been split into
    photon-number sectors is a single block covering the whole space.
    """

    space: FockSpace
    blocks: tuple[tuple[np.ndarray, np.ndarray], ...]

    @classmethod
    def from_columns(cls, space: FockSpace, factor: np.ndarray) -> "FactoredDensity":
        factor = np.asarray(factor, dtype=complex).reshape(space.dimension, -1)
        return cls(space, ((np.arange(space.dimension), factor),))

    @classmethod
    def from_vector(cls, vector: FockVector) -> "FactoredDensity":
        return cls.from_columns(vector.space, vector.amplitudes[:, None])

    @property
    def is_blocked(self) -> bool:
        return len(self.blocks) != 1 or len(self.blocks[0][0]) != self.space.dimension

    @property
    def rank(self) -> int:
        return sum(w.shape[1] for _, w in self.blocks)

    def columns(self) -> np.ndarray:
        """Full-space factor (dimension x total rank)."""
        out = np.zeros((self.space.dimension, self.rank), dtype=complex)
        col = 0
        for idx, w in self.blocks:
            out[idx, col : col + w.shape[1]] = w
            col += w.shape[1]
        return out

    def trace(self) -> float:
        return float(sum(np.vdot(w, w).real for _, w in self.blocks))

    def dense(self) -> DensityOperator:
        mat = np.zeros((self.space.dimension,) * 2, dtype=complex)
        for idx, w in self.blocks:
            mat[np.ix_(idx, idx)] += w @ w.conj().T
        return DensityOperator(self.space, mat)

    def diagonal(self) -> np.ndarray:
        out = np.zeros(self.space.dimension)
        for idx, w in self.blocks:
            out[idx] += np.sum(np.abs(w) ** 2, axis=1)
        return out

    def mean_number(self, modes: Iterable[int] | None = None) -> float:
        return float(self.diagonal() @ self.space.total_number(modes))

    def map_columns(self, func) -> "FactoredDensity":
        """Apply a linear map to the full-space columns (unblocked states only)."""
        if self.is_blocked:
            raise ValueError("state is already split into sectors")
        return FactoredDensity.from_columns(self.space, func(self.blocks[0][1]))

    def compressed(self, rel_tol: float = 1e-14) -> "FactoredDensity":
        """Re-factor each block onto its eigenvectors, dropping negligible weight."""
        return FactoredDensity(self.space, tuple((idx, compress_factor(w, rel_tol)) for idx, w in self.blocks))

    def split(self, labels: np.ndarray) -> "FactoredDensity":
        """Project onto the level sets of ``labels`` (one block per value)."""
        labels = np.asarray(labels)
        blocks = []
        for idx, w in self.blocks:
            lab = labels[idx]
            order = np.argsort(lab, kind="stable")
            values, starts = np.unique(lab[order], return_index=True)
            bounds = list(starts[1:]) + [len(order)]
            for start, stop in zip(starts, bounds):
                sel = order[start:stop]
                sub = w[sel]
                if np.any(sub):
                    blocks.append((idx[sel], sub))
        return FactoredDensity(self.space, tuple(blocks))


def compress_factor(w: np.ndarray, rel_tol: float = 1e-14) -> np.ndarray:
    """Orthogonal factor with the same ``W W^dagger`` up to dropped eigenvalues.

    Columns of the result are eigenvectors scaled by sqrt(eigenvalue).
    """
    if w.shape[1] == 0:
        return w
    gram = w.conj().T @ w
    evals, evecs = np.linalg.eigh(0.5 * (gram + gram.conj().T))
    top = evals[-1]
    if top <= 0:
        return w[:, :0]
    keep = evals > rel_tol * top
    return w @ evecs[:, keep]
