"""Small dense complex linear algebra for one and two qubits.

Matrices are plain ``numpy`` complex arrays of shape (2, 2) or (4, 4); kets are
shape (4,). Basis order for two qubits is |00>, |01>, |10>, |11> with the first
label belonging to qubit A.

Pauli convention: sigma_z = diag(-1, +1) on (|0>, |1>), so logical 0 reads as -1
and logical 1 as +1. sigma_y is fixed by sigma_x sigma_y sigma_z = i I.
"""

from __future__ import annotations

import numpy as np

from dynlearn.errors import ConvergenceError, ValidationError

PSD_TOL = 1e-9
JACOBI_MAX_SWEEPS = 100
JACOBI_OFF_TOL = 1e-13

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "Z": np.array([[-1, 0], [0, 1]], dtype=complex),
}


def pauli(which: str) -> np.ndarray:
    """Return the 2x2 Pauli operator named by ``which`` (one of I, X, Y, Z)."""
    try:
        return _PAULI[which.upper()].copy()
    except KeyError:
        raise ValidationError(f"unknown Pauli operator {which!r}") from None


def kron2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Two-qubit operator with ``a`` acting on qubit A and ``b`` on qubit B."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise ValidationError(f"kron2 needs two 2x2 operators, got {a.shape} and {b.shape}")
    return np.kron(a, b)


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - dagger(m))) <= tol)


def is_density(m: np.ndarray, tol: float = 1e-9) -> bool:
    """Hermitian, unit trace and positive semidefinite, all within ``tol``."""
    m = np.asarray(m)
    if not np.all(np.isfinite(m)) or not is_hermitian(m, tol):
        return False
    if abs(np.trace(m) - 1.0) > tol:
        return False
    vals, _ = herm_eig(m, tol)
    return bool(vals[-1] >= -tol)


def ket(amplitudes) -> np.ndarray:
    """Normalized ket from (possibly unnormalized) amplitudes."""
    psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm = np.linalg.norm(psi)
    if not np.isfinite(norm) or norm == 0:
        raise ValidationError("cannot normalize a zero or non-finite ket")
    return psi / norm


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def herm_eig(m: np.ndarray, tol: float = PSD_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` with eigenvalues sorted descending and the
    matching orthonormal eigenvectors as the columns of ``vectors``.
    """
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"square matrix required, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix has non-finite entries")
    if not is_hermitian(a, tol):
        raise ValidationError("herm_eig requires a Hermitian matrix")
    n = a.shape[0]
    a = 0.5 * (a + dagger(a))
    v = np.eye(n, dtype=complex)
    threshold = JACOBI_OFF_TOL * max(1.0, float(np.linalg.norm(a)))

    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum(np.abs(a[~np.eye(n, dtype=bool)]) ** 2))
        if off < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r < 1e-300:
                    continue
                phase = apq / r
                theta = 0.5 * np.arctan2(2.0 * r, (a[p, p] - a[q, q]).real)
                c, s = np.cos(theta), np.sin(theta)
                sp, sq = s * np.conj(phase), s * phase
                # a <- R^H a R with R = [[c, -sq], [sp, c]] acting on (p, q)
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * ap + sp * aq, c * aq - sq * ap
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * ap + sq * aq, c * aq - sp * ap
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp + sp * vq, c * vq - sq * vp
    else:
        raise ConvergenceError(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")

    vals = np.real(np.diag(a))
    order = np.argsort(-vals, kind="stable")
    return vals[order], v[:, order]


def psd_sqrt(m: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Hermitian square root of a positive semidefinite matrix.

    Eigenvalues in [-100*tol, 0) are clamped to zero; anything more negative
    means the input is not a valid density-like operator.
    """
    vals, vecs = herm_eig(m, tol)
    if vals[-1] < -100 * tol:
        raise ValidationError(f"matrix is not positive semidefinite (eigenvalue {vals[-1]:.3e})")
    roots = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * roots) @ dagger(vecs)


# Two-qubit operators used throughout.
IDENTITY4 = np.eye(4, dtype=complex)
SX_A = kron2(pauli("X"), pauli("I"))
SX_B = kron2(pauli("I"), pauli("X"))
SZ_A = kron2(pauli("Z"), pauli("I"))
SZ_B = kron2(pauli("I"), pauli("Z"))
SZZ = kron2(pauli("Z"), pauli("Z"))
SXX = kron2(pauli("X"), pauli("X"))
SYY = kron2(pauli("Y"), pauli("Y"))
