"""Finite-difference magnetic Hamiltonian on the torus, used as an independent check.

The cell is sampled on ``x = (j1 e1 + j2 e2) / N``.  Covariant differences
carry the exact line integral of ``A`` along each grid edge (Peierls
phases), and hops leaving the cell pick up the magnetic-translation phase

    u(x + d) = exp(i [A0(d).x + pi w1 w2]) u(x),   d = w1 e1 + w2 e2,

which is the cocycle generated by ``u(x + e_j) = exp(i A0(e_j).x) u(x)``
when the flux through the cell is ``2 pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .errors import ConvergenceFailure, FluxNotQuantized
from .fields import MagneticPotential, ScalarField, eval_field
from .invariants import m0_phase
from .lattice import Lattice

TWO_PI = 2.0 * math.pi
_STEPS = ((1, 0), (0, 1), (1, 1), (1, -1))


@dataclass(frozen=True)
class DiscretizedHamiltonian:
    matrix: sp.csr_matrix
    n: int
    lattice: Lattice
    points: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def hermiticity_defect(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0


def corner_cocycle(A: MagneticPotential, x) -> complex:
    """Product of boundary phases around a cell corner; 1 when the flux is quantised."""
    lat = A.lattice
    x = np.asarray(x, dtype=float)
    e1, e2 = lat.e1, lat.e2
    via1 = A.A0(e2) @ (x + e1) + A.A0(e1) @ x
    via2 = A.A0(e1) @ (x + e2) + A.A0(e2) @ x
    return complex(np.exp(1j * (via1 - via2)))


def assemble(A: MagneticPotential, V: ScalarField | None, lat: Lattice, n: int,
             gauge=None) -> DiscretizedHamiltonian:
    """Sparse Hermitian discretisation of ``(-i grad - A)^2 + V``.

    ``gauge`` is an optional callable ``chi(x)`` (periodic up to ``2 pi``
    multiples) whose gradient is added to ``A``; with exact edge integrals
    this is the same as conjugating by ``diag(exp(i chi))``.
    """
    if n < 16:
        raise ValueError("grid size must be at least 16")
    if abs(A.b0 * lat.delta_area - TWO_PI) > 1e-9 * TWO_PI:
        raise FluxNotQuantized(
            f"flux b0 * area = {A.b0 * lat.delta_area:.12g}, expected 2 pi", field="B")
    h = 1.0 / n
    j1, j2 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    j1, j2 = j1.ravel(), j2.ravel()
    pts = lat.point(j1 * h, j2 * h)
    ginv = np.linalg.inv(lat.gram)
    weights = {
        (1, 0): ginv[0, 0],
        (0, 1): ginv[1, 1],
        (1, 1): 0.5 * ginv[0, 1],
        (1, -1): -0.5 * ginv[0, 1],
    }
    dim = n * n
    rows, cols, vals = [], [], []
    diag = np.zeros(dim)
    for v in _STEPS:
        c = weights[v] / h**2
        if c == 0.0:
            continue
        t1, t2 = j1 + v[0], j2 + v[1]
        w1, w2 = np.floor_divide(t1, n), np.floor_divide(t2, n)
        k1, k2 = t1 - w1 * n, t2 - w2 * n
        target = k1 * n + k2
        dest = pts + h * (v[0] * lat.e1 + v[1] * lat.e2)
        wrapped = pts[target]
        link = m0_phase(A, dest, pts)
        if gauge is not None:
            link = link + gauge(dest) - gauge(pts)
        shift = lat.vector(w1, w2)
        bc = np.einsum("ij,ij->i", wrapped, A.A0(shift)) + math.pi * w1 * w2
        hop = np.exp(1j * (bc - link))
        rows.append(np.arange(dim))
        cols.append(target)
        vals.append(-c * hop)
        diag += 2 * c
    T = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dim, dim))
    H = T + T.conj().T
    if V is not None:
        diag = diag + eval_field(V, pts)
    H = (H + sp.diags(diag)).tocsr()
    return DiscretizedHamiltonian(H, n, lat, pts)


def eigenvalues(H: DiscretizedHamiltonian | sp.spmatrix | np.ndarray, n_lowest: int,
                residual_tol: float = 1e-8, return_vectors: bool = False):
    """Lowest ``n_lowest`` eigenvalues, sorted, with a residual check."""
    M = H.matrix if isinstance(H, DiscretizedHamiltonian) else H
    dim = M.shape[0]
    if n_lowest > dim:
        raise ValueError("n_lowest exceeds the matrix dimension")
    if dim <= 400 or n_lowest >= dim - 1:
        dense = M.toarray() if sp.issparse(M) else np.asarray(M)
        w, vec = np.linalg.eigh(dense)
        w, vec = w[:n_lowest], vec[:, :n_lowest]
    else:
        M = sp.csc_matrix(M)
        # Gershgorin bound gives a shift strictly below the spectrum
        d = M.diagonal().real
        radius = np.asarray(abs(M).sum(axis=1)).ravel() - np.abs(d)
        sigma = float(min(d - radius).min()) - 1.0
        sigma = max(sigma, float(d.min()) - 10.0 * float(np.abs(d).max()))
        try:
            w, vec = eigsh(M, k=n_lowest, sigma=sigma, which="LM", tol=1e-12)
        except Exception as exc:  # ARPACK errors carry no common base class
            raise ConvergenceFailure(f"eigensolver failed: {exc}") from exc
        order = np.argsort(w)
        w, vec = w[order].real, vec[:, order]
    res = np.linalg.norm(M @ vec - vec * w, axis=0) / np.linalg.norm(vec, axis=0)
    scale = max(1.0, float(np.abs(w).max()))
    if res.max() > residual_tol * scale:
        raise ConvergenceFailure(f"eigen-residual {res.max():.3e} exceeds tolerance")
    w = np.sort(np.asarray(w, dtype=float))
    return (w, vec) if return_vectors else w


def isospectrality_check(spec1, spec2, n: int) -> float:
    spec1, spec2 = np.asarray(spec1), np.asarray(spec2)
    if len(spec1) < n or len(spec2) < n:
        raise ValueError("both spectra need at least n eigenvalues")
    return float(np.abs(spec1[:n] - spec2[:n]).max())


def trace_width_floor(lambda_max: float, suppression: float = 1e-3) -> float:
    """Smallest Gaussian width whose cutoff weight at ``lambda_max`` is below ``suppression``."""
    if lambda_max <= 0:
        return 0.0
    return math.sqrt(2.0 * math.log(1.0 / suppression) / lambda_max)


def smoothed_wave_trace(spectrum, t_grid, width: float) -> np.ndarray:
    """``sum_j cos(t sqrt(lambda_j)) exp(-width**2 lambda_j / 2)``.

    The Gaussian weight smooths the trace in ``t`` at scale ``width``; the
    truncated spectrum only resolves widths above :func:`trace_width_floor`.
    """
    lam = np.asarray(spectrum, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    if lam.size == 0:
        return np.zeros(t.shape)
    floor = trace_width_floor(float(lam.max()))
    if width < floor:
        raise ValueError(f"width {width:g} below resolution floor {floor:.4g}")
    omega = np.sqrt(np.clip(lam, 0.0, None))
    g = np.exp(-0.5 * width**2 * lam)
    return np.cos(t[:, None] * omega[None, :]) @ g


def local_maxima(t, values) -> np.ndarray:
    v = np.abs(np.asarray(values))
    idx = np.where((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:]))[0] + 1
    return np.asarray(t)[idx]
