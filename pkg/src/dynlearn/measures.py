"""Reference entanglement quantities for two-qubit density matrices."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from dynlearn import qcore
from dynlearn.errors import ValidationError

CLAMP_TOL = 1e-9
# sandwich eigenvalues are squares of the s_i, so round-off of ~1e-16 would
# surface as ~1e-8 in C; values below this floor are treated as zero
NOISE_FLOOR = 1e-14

_YY = qcore.kron2(qcore.pauli("Y"), qcore.pauli("Y"))
_TG = qcore.IDENTITY4 - qcore.SXX - qcore.SZZ


def _density(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4) or not qcore.is_density(rho, 1e-8):
        raise ValidationError("expected a 4x4 density matrix")
    return rho


def correlation_sq(rho) -> float:
    """Square of the z-z correlator, [tr(rho sz_A sz_B)]^2."""
    return _corr_sq(_density(rho))


def _corr_sq(rho):
    return float(np.real(np.trace(rho @ qcore.SZZ)) ** 2)


def spin_flip(rho) -> np.ndarray:
    """rho~ = (sy x sy) rho* (sy x sy)."""
    rho = np.asarray(rho, dtype=complex)
    return _YY @ rho.conj() @ _YY


def concurrence(rho) -> float:
    """Wootters concurrence.

    The square roots of the eigenvalues of rho rho~ are the eigenvalues of the
    Hermitian matrix sqrt(sqrt(rho) rho~ sqrt(rho)), which keeps the eigensolver
    on Hermitian input.
    """
    return _concurrence(_density(rho))


def _concurrence(rho):
    root = qcore.psd_sqrt(rho, CLAMP_TOL)
    sandwich = root @ spin_flip(rho) @ root
    sandwich = 0.5 * (sandwich + qcore.dagger(sandwich))
    vals, _ = qcore.herm_eig(sandwich, CLAMP_TOL)
    vals = np.where(vals < NOISE_FLOOR * max(1.0, vals[0]), 0.0, vals)
    s = np.sqrt(vals)
    return float(max(0.0, s[0] - s[1] - s[2] - s[3]))


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return float(-x * np.log2(x) - (1 - x) * np.log2(1 - x))


def eof_from_concurrence(c: float) -> float:
    c = min(max(c, 0.0), 1.0)
    return binary_entropy(0.5 * (1 + np.sqrt(1 - c * c)))


def eof(rho) -> float:
    """Entanglement of formation from the concurrence."""
    return eof_from_concurrence(concurrence(rho))


def spin_flip_overlap(rho, normalized: bool = True) -> float:
    """tr(rho rho~) / tr(rho^2); equals concurrence^2 for pure states.

    Dividing by the purity only matters for mixed states and keeps the value
    in [0, 1] (Cauchy-Schwarz, since rho~ has the purity of rho). With
    ``normalized=False`` the bare trace is returned.
    """
    return _overlap(_density(rho), normalized)


def _overlap(rho, normalized=True):
    value = float(np.real(np.trace(rho @ spin_flip(rho))))
    if normalized:
        value /= float(np.real(np.trace(rho @ rho)))
    return value


def tg_witness(rho) -> float:
    """tr(rho (I - sx_A sx_B - sz_A sz_B)); negative values flag entanglement."""
    return _tg(_density(rho))


def _tg(rho):
    return float(np.real(np.trace(rho @ _TG)))


@dataclass(frozen=True)
class MeasureReport:
    correlation_sq: float
    concurrence: float
    eof: float
    spin_flip_overlap: float
    tg_witness: float

    def as_dict(self) -> dict:
        return asdict(self)


def report(rho) -> MeasureReport:
    rho = _density(rho)  # validated once, not per measure
    c = _concurrence(rho)
    return MeasureReport(
        correlation_sq=_corr_sq(rho),
        concurrence=c,
        eof=eof_from_concurrence(c),
        spin_flip_overlap=_overlap(rho),
        tg_witness=_tg(rho),
    )
