import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynlearn import qcore
from dynlearn.errors import ConvergenceError, ValidationError

from conftest import random_density

X, Y, Z, I = (qcore.pauli(w) for w in "XYZI")


def test_pauli_conventions():
    assert np.array_equal(I, np.eye(2))
    assert np.array_equal(Z, np.diag([-1, 1]))
    assert np.array_equal(X @ X, np.eye(2))
    np.testing.assert_allclose(X @ Y @ Z, 1j * np.eye(2))


def test_pauli_rejects_unknown():
    with pytest.raises(ValidationError):
        qcore.pauli("Q")


def test_kron2_examples():
    assert np.array_equal(qcore.kron2(I, I), np.eye(4))
    assert np.array_equal(qcore.kron2(Z, Z), np.diag([1, -1, -1, 1]))
    e00 = np.array([1, 0, 0, 0])
    np.testing.assert_array_equal(qcore.kron2(X, I) @ e00, [0, 0, 1, 0])


def test_kron2_dimension_mismatch():
    with pytest.raises(ValidationError):
        qcore.kron2(np.eye(4), I)


def test_kron2_trace_factorizes(rng):
    for _ in range(100):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        assert abs(np.trace(qcore.kron2(a, b)) - np.trace(a) * np.trace(b)) < 1e-12


def test_herm_eig_examples():
    vals, _ = qcore.herm_eig(np.diag([3.0, 1, 2, 0]).astype(complex))
    np.testing.assert_allclose(vals, [3, 2, 1, 0])
    vals, _ = qcore.herm_eig(qcore.SX_A)
    np.testing.assert_allclose(vals, [1, 1, -1, -1], atol=1e-14)


def _random_hermitian(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    return a + a.conj().T


def test_herm_eig_trace_identities_and_orthonormality(rng):
    for _ in range(50):
        h = _random_hermitian(rng)
        vals, vecs = qcore.herm_eig(h)
        assert abs(vals.sum() - np.trace(h).real) < 1e-10
        assert abs((vals**2).sum() - np.trace(h @ h).real) < 1e-10
        assert np.max(np.abs(vecs.conj().T @ vecs - np.eye(4))) <= 1e-10
        assert np.all(np.diff(vals) <= 0)
        np.testing.assert_allclose(vecs @ np.diag(vals) @ vecs.conj().T, h, atol=1e-8)


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        qcore.herm_eig(np.triu(np.ones((4, 4))))


def test_herm_eig_non_finite_is_pathological():
    m = np.eye(4, dtype=complex)
    m[0, 1] = m[1, 0] = np.nan
    with pytest.raises((ValidationError, ConvergenceError)):
        qcore.herm_eig(m)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=16, max_size=16))
def test_herm_eig_reconstructs(entries):
    a = np.array(entries).reshape(4, 4)
    h = (a + a.T) / 2 + 1j * (a - a.T) / 2
    vals, vecs = qcore.herm_eig(h)
    scale = max(1.0, np.abs(h).max())
    assert np.max(np.abs(vecs @ np.diag(vals) @ vecs.conj().T - h)) <= 1e-9 * scale


def test_psd_sqrt_examples(rng):
    np.testing.assert_allclose(qcore.psd_sqrt(np.eye(4)), np.eye(4), atol=1e-14)
    np.testing.assert_allclose(qcore.psd_sqrt(np.diag([4.0, 1, 0, 9])), np.diag([2, 1, 0, 3]),
                               atol=1e-12)
    psi = qcore.ket(rng.normal(size=4) + 1j * rng.normal(size=4))
    p = qcore.projector(psi)
    np.testing.assert_allclose(qcore.psd_sqrt(p), p, atol=1e-8)


def test_psd_sqrt_reconstructs_random(rng):
    for _ in range(100):
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        m = g.conj().T @ g
        s = qcore.psd_sqrt(m)
        assert qcore.is_hermitian(s, 1e-10)
        assert np.max(np.abs(s @ s - m)) <= 1e-9 * max(1, np.abs(m).max())


def test_psd_sqrt_rejects_negative_and_clamps_tiny():
    with pytest.raises(ValidationError):
        qcore.psd_sqrt(np.diag([1.0, 0, 0, -1e-3]))
    s = qcore.psd_sqrt(np.diag([1.0, 0, 0, -1e-10]))
    assert s[3, 3] == 0


def test_commutator_antisymmetry(rng):
    a = _random_hermitian(rng)
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.array_equal(qcore.commutator(a, b), -qcore.commutator(b, a))


def test_is_density(rng):
    assert qcore.is_density(random_density(rng))
    assert not qcore.is_density(np.diag([1.5, -0.5, 0, 0]))
    assert not qcore.is_density(2 * np.eye(4) / 4)
