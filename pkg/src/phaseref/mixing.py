"""Quantum Fisher information of ``B_tau rho0 B_tau^dag`` for every tau at once.

The beam splitter acts on modes a and b as exp(-2i theta J_x), with
sin^2 theta = tau and the Schwinger operators

    J_x = (a^dag b + a b^dag)/2,  J_y = (a^dag b - a b^dag)/(2i),
    J_z = (n_a - n_b)/2,  N = n_a + n_b.

Every phase generator used here is a combination ``p N + q J_z``.  Pulled
back through the beam splitter it becomes ``p N + q cos(2 theta) J_z +
q sin(2 theta) J_y``.  The spectrum of the rotated state does not depend on
tau, so the QFIM is a fixed 3 x 3 quadratic form in the frame
(N, J_z, J_y) evaluated on the tau-dependent coefficients.  Dephasing over
a set of modes that includes a and b commutes with the beam splitter and
is applied to ``rho0`` directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sps

from .fisher import FisherMatrix, _block_support
from .fock import FactoredDensity, FockSpace, FockVector
from .optics import GeneratorConvention

# (p, q) of each generator in p N + q J_z
FRAME_COEFFS = {
    GeneratorConvention.UPPER_ONLY: ((0.5, 1.0),),
    GeneratorConvention.SYMMETRIC: ((0.0, 1.0),),
    GeneratorConvention.TWO_PARAM: ((0.5, 1.0), (0.5, -1.0)),
}


@lru_cache(maxsize=16)
def _jy_matrix(dims: tuple[int, ...]) -> sps.csr_matrix:
    """J_y on modes 0 and 1 of a space with per-mode dimensions ``dims``."""
    da, db = dims[0], dims[1]
    rest = int(np.prod(dims[2:], dtype=np.int64)) if len(dims) > 2 else 1
    na, nb, nr = np.meshgrid(np.arange(da), np.arange(db), np.arange(rest), indexing="ij")
    na, nb, nr = na.ravel(), nb.ravel(), nr.ravel()

    def flat(a, b):
        return (a * db + b) * rest + nr[mask]

    # a^dag b: |na, nb> -> sqrt(na+1) sqrt(nb) |na+1, nb-1>
    mask = (na + 1 < da) & (nb > 0)
    rows_up, cols_up = flat(na[mask] + 1, nb[mask] - 1), flat(na[mask], nb[mask])
    vals_up = np.sqrt((na[mask] + 1.0) * nb[mask])
    mask = (na > 0) & (nb + 1 < db)
    rows_dn, cols_dn = flat(na[mask] - 1, nb[mask] + 1), flat(na[mask], nb[mask])
    vals_dn = np.sqrt(na[mask] * (nb[mask] + 1.0))
    dim = da * db * rest
    up = sps.csr_matrix((vals_up, (rows_up, cols_up)), shape=(dim, dim))
    down = sps.csr_matrix((vals_dn, (rows_dn, cols_dn)), shape=(dim, dim))
    return ((up - down) / 2j).tocsr()


@dataclass(frozen=True)
class MixingForm:
    """QFIM quadratic form of a state before the beam splitter.

    ``form[x, y]`` pairs the frame operators (N, J_z, J_y).
    """

    form: np.ndarray
    trace: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    @staticmethod
    def coefficients(tau: float, coeffs: Sequence[tuple[float, float]]) -> np.ndarray:
        if not 0.0 <= tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {tau}")
        cos2, sin2 = 1.0 - 2.0 * tau, 2.0 * np.sqrt(tau * (1.0 - tau))
        return np.array([[p, q * cos2, q * sin2] for p, q in coeffs])

    def fisher(self, tau: float, convention: GeneratorConvention | str,
               labels: Sequence[str] | None = None) -> FisherMatrix:
        coeffs = FRAME_COEFFS[GeneratorConvention(convention)]
        c = self.coefficients(tau, coeffs)
        mat = c @ self.form @ c.T / self.trace
        if labels is None:
            labels = ("phi",) if len(coeffs) == 1 else ("phi1", "phi2")
        return FisherMatrix(tuple(labels), mat, dict(self.diagnostics))


def mixing_form(state0, dephase_modes: Sequence[int] | None = None) -> MixingForm:
    """Quadratic form for ``state0`` (an input on a space closed under mixing)."""
    if isinstance(state0, FockVector):
        state0 = FactoredDensity.from_vector(state0)
    space: FockSpace = state0.space
    if dephase_modes is not None:
        modes = set(dephase_modes)
        if not {0, 1} <= modes:
            raise ValueError("dephasing must include both interferometer modes to commute with mixing")
        state0 = state0.split(space.total_number(sorted(modes)))
    tr = state0.trace()
    if tr <= 0:
        raise ValueError("state has zero trace")
    n_ab = space.total_number((0, 1)).astype(float)
    jz = 0.5 * (space.numbers(0) - space.numbers(1)).astype(float)
    jy = _jy_matrix(space.dims)

    systems = [(idx, _block_support(w)) for idx, w in state0.blocks]
    form = np.zeros((3, 3))
    dropped = 0.0
    for idx, (lam, u) in systems:
        keep = lam > 0.0
        dropped += float(lam[~keep].clip(0.0).sum())
        lam, u = lam[keep], u[:, keep]
        if lam.size == 0:
            continue
        sub = jy if len(idx) == space.dimension else jy[idx][:, idx]
        vecs = (n_ab[idx, None] * u, jz[idx, None] * u, sub @ u)
        mats = [u.conj().T @ v for v in vecs]
        weight = 8.0 * np.outer(lam, lam) / (lam[:, None] + lam[None, :])
        for x in range(3):
            for y in range(x, 3):
                diag = 4.0 * np.sum(lam * np.real(np.sum(vecs[x].conj() * vecs[y], axis=0)))
                cross = np.sum(weight * np.real(mats[x] * mats[y].T))
                form[x, y] += diag - cross
    form = np.triu(form) + np.triu(form, 1).T
    return MixingForm(form, tr, {"dropped_eigenvalue_weight": dropped, "trace": tr})
