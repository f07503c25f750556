import math

import numpy as np
import pytest
import scipy.sparse as sp
from numpy.testing import assert_allclose

from tsi.errors import FluxNotQuantized
from tsi.fields import constant_field, make_field, make_potential
from tsi.spectral_oracle import (
    assemble,
    corner_cocycle,
    eigenvalues,
    isospectrality_check,
    local_maxima,
    smoothed_wave_trace,
    trace_width_floor,
)

TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def flagship_H(oblique, flagship):
    B, V = flagship
    return assemble(make_potential(B, (0.3, 0.7)), V, oblique, 24)


def test_hermitian(flagship_H):
    assert flagship_H.hermiticity_defect() < 1e-12
    assert flagship_H.dim == 24 * 24


def test_corner_cocycle(oblique, flagship):
    A = make_potential(flagship[0], (0.3, 0.7))
    for x in np.random.default_rng(0).uniform(-2, 2, size=(10, 2)):
        assert abs(corner_cocycle(A, x) - 1.0) < 1e-12


def test_flux_not_quantized(oblique):
    B = make_field(oblique, {(0, 0): 5.0})
    with pytest.raises(FluxNotQuantized):
        assemble(make_potential(B), None, oblique, 16)


def test_grid_too_small(oblique):
    with pytest.raises(ValueError):
        assemble(make_potential(constant_field(oblique)), None, oblique, 8)


def test_dense_small_matrix():
    M = sp.csr_matrix(np.array([[2.0, 1j], [-1j, 2.0]]))
    assert_allclose(eigenvalues(M, 2), [1.0, 3.0], atol=1e-14)


def test_potential_shift(oblique, flagship):
    B, V = flagship
    A = make_potential(B, (0.3, 0.7))
    Vc = make_field(oblique, {**V.coeffs, (0, 0): 0.75})
    base = eigenvalues(assemble(A, V, oblique, 20), 6)
    shifted = eigenvalues(assemble(A, Vc, oblique, 20), 6)
    assert_allclose(shifted - base, 0.75, atol=1e-10)


def test_sparse_matches_dense(flagship_H):
    dense = np.linalg.eigvalsh(flagship_H.matrix.toarray())[:6]
    assert_allclose(eigenvalues(flagship_H, 6), dense, atol=1e-9)


def test_landau_level(oblique):
    A = make_potential(constant_field(oblique))
    lam = eigenvalues(assemble(A, None, oblique, 64), 3)
    assert abs(lam[0] / A.b0 - 1.0) < 1e-3
    assert abs(lam[1] / A.b0 - 3.0) < 1e-2


def test_gauge_covariance(oblique, flagship):
    # a periodic gauge change acts by conjugation with diag(exp(i chi))
    B, V = flagship
    A = make_potential(B, (0.3, 0.7))

    def chi(x):
        t1, t2 = x @ oblique.e1_star, x @ oblique.e2_star
        return np.sin(TWO_PI * t1) + np.cos(TWO_PI * t2) + 0.3 * np.sin(TWO_PI * (t1 - t2))

    H = assemble(A, V, oblique, 20)
    Hg = assemble(A, V, oblique, 20, gauge=chi)
    D = sp.diags(np.exp(1j * chi(H.points)))
    diff = Hg.matrix - D @ H.matrix @ D.conj().T
    assert abs(diff).max() < 1e-10


def test_parity_and_lattice_shift(oblique, flagship):
    B, V = flagship
    a0 = np.array([0.3, 0.7])
    ref = eigenvalues(assemble(make_potential(B, a0), V, oblique, 24), 8)
    for other in (-a0, a0 + TWO_PI * oblique.e1_star, a0 - TWO_PI * oblique.e2_star):
        lam = eigenvalues(assemble(make_potential(B, other), V, oblique, 24), 8)
        assert isospectrality_check(ref, lam, 8) < 1e-9


def test_distinct_gauge_classes_split(oblique, flagship):
    B, V = flagship
    a = eigenvalues(assemble(make_potential(B, (0.0, 0.0)), V, oblique, 24), 8)
    b = eigenvalues(assemble(make_potential(B, (1.0, 0.4)), V, oblique, 24), 8)
    assert isospectrality_check(a, b, 8) > 1e-2


def test_isospectrality_needs_length():
    with pytest.raises(ValueError):
        isospectrality_check([1.0], [1.0, 2.0], 2)


def test_trace_basics():
    t = np.linspace(0, 3, 31)
    assert_allclose(smoothed_wave_trace([], t, 1.0), 0.0)
    lam = np.array([1.0, 4.0, 9.0])
    w = trace_width_floor(lam.max())
    tr = smoothed_wave_trace(lam, t, w)
    assert_allclose(tr[0], np.exp(-0.5 * w**2 * lam).sum())
    assert_allclose(np.exp(-0.5 * w**2 * 9.0), 1e-3)
    with pytest.raises(ValueError, match="floor"):
        smoothed_wave_trace(lam, t, 0.5 * w)


def test_local_maxima():
    t = np.linspace(0, 4 * math.pi, 4001)
    peaks = local_maxima(t, np.cos(t))
    assert_allclose(peaks, [math.pi, 2 * math.pi, 3 * math.pi], atol=2e-3)


def test_constant_field_trace_matches_landau_sum(oblique):
    # each Landau level has multiplicity one when the flux is 2 pi
    A = make_potential(constant_field(oblique))
    lam = eigenvalues(assemble(A, None, oblique, 64), 6)
    exact = A.b0 * (2 * np.arange(6) + 1)
    t = np.linspace(0, 3, 301)
    w = trace_width_floor(lam.max())
    got = smoothed_wave_trace(lam, t, w)
    ref = np.cos(t[:, None] * np.sqrt(exact)) @ np.exp(-0.5 * w**2 * exact)
    assert np.abs(got - ref).max() < 0.05 * np.abs(ref).max()
