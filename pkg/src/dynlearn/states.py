"""Two-qubit state families used for training, testing and sweeps.

Every constructor returns a 4x4 density matrix in the |00>, |01>, |10>, |11>
basis. Kets are normalized before the outer product.

Families are also addressable by a short text spec, e.g. ``bell:theta=3.14``
or ``werner:F=0.8``, which is what the CLI uses.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from dynlearn import qcore
from dynlearn.errors import ValidationError


def _pure(amps) -> np.ndarray:
    if not np.all(np.isfinite(np.asarray(amps, dtype=complex))):
        raise ValidationError("non-finite amplitude")
    return qcore.projector(qcore.ket(amps))


def _finite(*xs):
    for x in xs:
        if not np.isfinite(x):
            raise ValidationError(f"non-finite parameter {x!r}")


PHI_PLUS = qcore.ket([1, 0, 0, 1])
PHI_MINUS = qcore.ket([1, 0, 0, -1])
PSI_PLUS = qcore.ket([0, 1, 1, 0])
PSI_MINUS = qcore.ket([0, 1, -1, 0])


def bell(theta: float = 0.0) -> np.ndarray:
    _finite(theta)
    return _pure([1, 0, 0, np.exp(1j * theta)])


def epr(theta: float = 0.0) -> np.ndarray:
    _finite(theta)
    return _pure([0, 1, np.exp(1j * theta), 0])


def flat() -> np.ndarray:
    return _pure([1, 1, 1, 1])


def c_state(gamma: complex = 0.5) -> np.ndarray:
    """|0>_A (|0> + gamma |1>)_B."""
    _finite(gamma)
    return _pure([1, gamma, 0, 0])


def c_phase(theta: float = 0.0, gamma: float = 1.0) -> np.ndarray:
    """C state with a complex coefficient gamma * e^{i theta}."""
    _finite(theta, gamma)
    return c_state(gamma * np.exp(1j * theta))


def p_state() -> np.ndarray:
    return _pure([0, 1, 1, 1])


def p2_state() -> np.ndarray:
    return _pure([1, 0, 1, 1])


def p3(gamma: float = 1.0) -> np.ndarray:
    """(|00> + |11> + gamma |01>) / sqrt(2 + gamma^2)."""
    _finite(gamma)
    return _pure([1, gamma, 0, 1])


def p_phase(theta: float = 0.0) -> np.ndarray:
    """(|00> + |11> + e^{i theta} |01>) / sqrt 3: phase against the pair."""
    _finite(theta)
    return _pure([1, np.exp(1j * theta), 0, 1])


def p_phase2(theta: float = 0.0) -> np.ndarray:
    """(|00> + e^{i theta} |11> + |01>) / sqrt 3: phase inside the pair."""
    _finite(theta)
    return _pure([1, 1, 0, np.exp(1j * theta)])


def mixed_m() -> np.ndarray:
    return np.diag([0.5, 0, 0, 0.5]).astype(complex)


def werner(F: float = 1.0) -> np.ndarray:
    _finite(F)
    if not 0.0 <= F <= 1.0:
        raise ValidationError(f"Werner fidelity must lie in [0, 1], got {F}")
    rest = sum(qcore.projector(v) for v in (PSI_PLUS, PSI_MINUS, PHI_MINUS))
    return F * qcore.projector(PHI_PLUS) + (1 - F) / 3 * rest


def mprime(gamma: float = 1.0, variant: str = "01") -> np.ndarray:
    """(gamma |v><v| + |Phi+><Phi+|) / (1 + gamma) with v = 01 (default) or 11."""
    _finite(gamma)
    if gamma < 0:
        raise ValidationError("gamma must be non-negative")
    if variant not in ("01", "11"):
        raise ValidationError(f"mprime variant must be '01' or '11', got {variant!r}")
    v = np.zeros(4, dtype=complex)
    v[int(variant, 2)] = 1
    return (gamma * qcore.projector(v) + qcore.projector(PHI_PLUS)) / (1 + gamma)


def product(alpha: complex, beta: complex, gamma: complex, delta: complex) -> np.ndarray:
    """(alpha |1> + beta |0>)_A (gamma |1> + delta |0>)_B, normalized."""
    a = qcore.ket([beta, alpha])
    b = qcore.ket([delta, gamma])
    return qcore.projector(np.kron(a, b))


def generic_ket(a00: complex, a01: complex, a10: complex, a11: complex) -> np.ndarray:
    return _pure([a00, a01, a10, a11])


def basis(label: str = "00") -> np.ndarray:
    if len(label) != 2 or set(label) - {"0", "1"}:
        raise ValidationError(f"bad basis label {label!r}")
    v = np.zeros(4)
    v[int(label, 2)] = 1
    return _pure(v)


FAMILIES: dict[str, Callable[..., np.ndarray]] = {
    "bell": bell,
    "epr": epr,
    "flat": flat,
    "c": c_state,
    "c_phase": c_phase,
    "p": p_state,
    "p2": p2_state,
    "p3": p3,
    "p_phase": p_phase,
    "p_phase2": p_phase2,
    "m": mixed_m,
    "werner": werner,
    "mprime": mprime,
    "product": product,
    "ket": generic_ket,
    "basis": basis,
}


def _parse_value(text: str):
    text = text.strip()
    if text in ("01", "11", "00", "10"):
        return text
    if text.lower() in ("pi", "π"):
        return math.pi
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return complex(text.replace("i", "j"))
    except ValueError:
        return text


def make(spec: str) -> np.ndarray:
    """Build a state from ``name`` or ``name:key=value,key=value``."""
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    if name not in FAMILIES:
        raise ValidationError(f"unknown state family {name!r}; known: {sorted(FAMILIES)}")
    kwargs = {}
    if rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise ValidationError(f"bad parameter {item!r} in {spec!r}")
            kwargs[key.strip()] = _parse_value(val)
    try:
        return FAMILIES[name](**kwargs)
    except TypeError as exc:
        raise ValidationError(f"{spec!r}: {exc}") from None


def _grid_axis(n: int, rng: np.random.Generator) -> np.ndarray:
    # cell-centred points in [-1, 1] with a seeded jitter; never exactly 0
    edges = np.linspace(-1.0, 1.0, n + 1)
    width = edges[1] - edges[0]
    jitter = rng.uniform(0.25, 0.75, size=n)
    return edges[:-1] + jitter * width


def product_grid(n_per_axis: int = 10, seed: int = 0) -> np.ndarray:
    """Real-amplitude product states on an n^4 grid of (alpha, beta, gamma, delta).

    Returns an array of shape (n^4, 4, 4). Amplitudes are real because the
    witness is trained on real-coefficient states; complex phases are the
    subject of the phase sweeps instead.
    """
    if n_per_axis < 1:
        raise ValidationError("n_per_axis must be >= 1")
    rng = np.random.default_rng(seed)
    axes = [_grid_axis(n_per_axis, rng) for _ in range(4)]
    al, be, ga, de = np.meshgrid(*axes, indexing="ij")
    qa = np.stack([be.ravel(), al.ravel()], axis=1)
    qb = np.stack([de.ravel(), ga.ravel()], axis=1)
    qa /= np.linalg.norm(qa, axis=1, keepdims=True)
    qb /= np.linalg.norm(qb, axis=1, keepdims=True)
    psi = np.einsum("ni,nj->nij", qa, qb).reshape(-1, 4).astype(complex)
    return np.einsum("ni,nj->nij", psi, psi.conj())


def mixed_grid(count: int = 10_000, seed: int = 0) -> np.ndarray:
    """Seeded convex mixtures of 2-4 real product states; separable by construction."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty((count, 4, 4), dtype=complex)
    for n in range(count):
        k = int(rng.integers(2, 5))
        weights = rng.dirichlet(np.ones(k))
        angles = rng.uniform(0, 2 * np.pi, size=(k, 2))
        rho = np.zeros((4, 4), dtype=complex)
        for w, (ta, tb) in zip(weights, angles):
            psi = np.kron([np.cos(ta), np.sin(ta)], [np.cos(tb), np.sin(tb)]).astype(complex)
            rho += w * np.outer(psi, psi)
        out[n] = rho
    return out
