"""Two-qubit Hamiltonian with piecewise-constant controls and RK4 propagation.

H(t) = w*KA sx_A + w*KB sx_B + w*epsA sz_A + w*epsB sz_B + w*zeta sz_A sz_B

where each parameter is a step function over [0, t_f] with uniform segments and
``w`` is the unit conversion factor (hbar = 1).

Every RK4 step lies inside a single constant-H interval (segment boundaries must
fall on the step grid), so one step of classical RK4 on the linear system
dy/dt = A y is exactly y -> P(hA) y with P(z) = 1 + z + z^2/2 + z^3/6 + z^4/24.
In the eigenbasis of a constant H that map is diagonal, so a whole interval of
steps is a table of scalar powers; no per-step Python loop is needed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from dynlearn import qcore
from dynlearn.errors import PropagationError, ValidationError

DEFAULT_STEP = 0.05
DRIFT_ABORT = 1e-6


class ParamId(str, enum.Enum):
    KA = "KA"
    KB = "KB"
    EpsA = "EpsA"
    EpsB = "EpsB"
    Zeta = "Zeta"


PARAM_ORDER: tuple[ParamId, ...] = tuple(ParamId)

_GENERATORS = {
    ParamId.KA: qcore.SX_A,
    ParamId.KB: qcore.SX_B,
    ParamId.EpsA: qcore.SZ_A,
    ParamId.EpsB: qcore.SZ_B,
    ParamId.Zeta: qcore.SZZ,
}


def generator(p: ParamId) -> np.ndarray:
    """dH/dw for a weight of parameter ``p``, before unit conversion."""
    return _GENERATORS[ParamId(p)].copy()


class UnitConvention(str, enum.Enum):
    """How a stored "MHz" value maps to an angular frequency per time unit."""

    RAW_MILLI = "raw"
    TWO_PI_MILLI = "twopi"

    @property
    def factor(self) -> float:
        if self is UnitConvention.RAW_MILLI:
            return 1e-3
        return 2.0 * math.pi * 1e-3


@dataclass(frozen=True)
class ParamSchedule:
    """Piecewise-constant values of the five Hamiltonian parameters.

    ``values[p][k]`` holds parameter ``p`` on [k*t_f/S, (k+1)*t_f/S) where S is
    the number of segments of ``p``. ``trainable[p]`` marks which parameters
    gradient descent may move.
    """

    t_f: float
    values: dict[ParamId, tuple[float, ...]]
    trainable: dict[ParamId, bool] = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.t_f) and self.t_f >= 0):
            raise ValidationError(f"t_f must be finite and non-negative, got {self.t_f}")
        vals = {}
        for p in PARAM_ORDER:
            seg = tuple(float(v) for v in self.values.get(p, (0.0,)))
            if len(seg) < 1:
                raise ValidationError(f"{p.value} needs at least one segment")
            if not all(math.isfinite(v) for v in seg):
                raise ValidationError(f"{p.value} has non-finite values")
            vals[p] = seg
        train = {p: bool(self.trainable.get(p, True)) for p in PARAM_ORDER}
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "trainable", train)

    @classmethod
    def constant(cls, t_f: float, trainable=None, **values) -> "ParamSchedule":
        """Build from keyword values; a scalar means one segment."""
        vals = {}
        for name, v in values.items():
            vals[ParamId(name)] = tuple(np.atleast_1d(np.asarray(v, dtype=float)))
        return cls(t_f, vals, trainable or {})

    def segments(self, p: ParamId) -> int:
        return len(self.values[p])

    def segment_index(self, p: ParamId, t: float) -> int:
        s = self.segments(p)
        if self.t_f == 0:
            return 0
        k = int(math.floor(t * s / self.t_f + 1e-12))
        return min(max(k, 0), s - 1)

    def value_at(self, p: ParamId, t: float) -> float:
        return self.values[p][self.segment_index(p, t)]

    def vector(self, trainable_only: bool = True) -> np.ndarray:
        """Flatten (trainable) segment values in ParamId order."""
        parts = [
            np.asarray(self.values[p])
            for p in PARAM_ORDER
            if self.trainable[p] or not trainable_only
        ]
        return np.concatenate(parts) if parts else np.zeros(0)

    def with_vector(self, vec, trainable_only: bool = True) -> "ParamSchedule":
        vec = np.asarray(vec, dtype=float)
        vals = dict(self.values)
        i = 0
        for p in PARAM_ORDER:
            if trainable_only and not self.trainable[p]:
                continue
            n = self.segments(p)
            vals[p] = tuple(vec[i : i + n])
            i += n
        if i != vec.size:
            raise ValidationError(f"vector length {vec.size} does not match schedule ({i})")
        return ParamSchedule(self.t_f, vals, self.trainable)

    def scaled(self, s: float) -> "ParamSchedule":
        """All values times ``s`` and t_f divided by ``s``: the same dynamics."""
        vals = {p: tuple(s * v for v in seg) for p, seg in self.values.items()}
        return ParamSchedule(self.t_f / s, vals, self.trainable)


@dataclass(frozen=True)
class Trajectory:
    """States at t = 0, h, 2h, ..., t_f (leading axis is time)."""

    h: float
    states: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(len(self.states))

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def step_count(t_f: float, h: float) -> int:
    if h <= 0:
        raise ValidationError(f"step size must be positive, got {h}")
    n = int(round(t_f / h))
    if abs(n * h - t_f) > 1e-9 * max(1.0, t_f):
        raise ValidationError(f"t_f={t_f} is not an integer multiple of h={h}")
    return n


def hamiltonian_at(schedule: ParamSchedule, units: UnitConvention, t: float) -> np.ndarray:
    if not (0.0 <= t <= schedule.t_f + 1e-12):
        raise ValidationError(f"t={t} outside [0, {schedule.t_f}]")
    w = UnitConvention(units).factor
    h = np.zeros((4, 4), dtype=complex)
    for p in PARAM_ORDER:
        v = schedule.value_at(p, t)
        if v:
            h += (w * v) * _GENERATORS[p]
    return h


class Interval:
    """A run of ``count`` RK4 steps starting at step ``start`` with constant H.

    Holds the eigen-decomposition H = U diag(d) U^dagger and the per-step RK4
    amplification factors in that basis.
    """

    def __init__(self, start: int, count: int, ham: np.ndarray, h: float):
        self.start = start
        self.count = count
        self.ham = ham
        self.h = h
        self.evals, self.evecs = qcore.herm_eig(ham, 1e-9)
        d = self.evals
        # commutator flow -i[H, X]: element (i, j) in the eigenbasis
        self.rho_z = -1j * h * (d[:, None] - d[None, :])
        self.rho_factor = rk4_factor(self.rho_z)
        # Schroedinger flow -i H psi
        self.ket_z = -1j * h * d
        self.ket_factor = rk4_factor(self.ket_z)
        growth = count * np.log(np.max(np.abs(self.rho_factor)))
        if growth > np.log1p(DRIFT_ABORT):
            raise PropagationError(
                f"RK4 step h={h} is unstable for a spectral spread of {d[0] - d[-1]:.3g}")

    def rho_powers(self) -> np.ndarray:
        """rho_factor**k for k = 0..count, shape (count+1, 4, 4)."""
        return _powers(self.rho_factor, self.count)

    def ket_powers(self) -> np.ndarray:
        return _powers(self.ket_factor, self.count)

    def to_eig(self, x: np.ndarray) -> np.ndarray:
        u = self.evecs
        return qcore.dagger(u) @ x @ u

    def from_eig(self, y: np.ndarray) -> np.ndarray:
        u = self.evecs
        return u @ y @ qcore.dagger(u)

    def to_adjoint_eig(self, lam: np.ndarray) -> np.ndarray:
        # H^T = conj(U) diag(d) U^T
        u = self.evecs
        return u.T @ lam @ u.conj()

    def from_adjoint_eig(self, w: np.ndarray) -> np.ndarray:
        u = self.evecs
        return u.conj() @ w @ u.T

    def advance_rho(self, rho: np.ndarray) -> np.ndarray:
        return self.from_eig(self.rho_factor**self.count * self.to_eig(rho))

    def retreat_adjoint(self, lam: np.ndarray) -> np.ndarray:
        return self.from_adjoint_eig(self.rho_factor**self.count * self.to_adjoint_eig(lam))

    def advance_ket(self, psi: np.ndarray) -> np.ndarray:
        u = self.evecs
        return ((psi @ u.conj()) * self.ket_factor**self.count) @ u.T

    def retreat_lambda(self, lam: np.ndarray) -> np.ndarray:
        # d lambda/dt' = +i H* lambda; H* = conj(U) diag(d) U^T
        u = self.evecs
        return ((lam @ u) * np.conj(self.ket_factor) ** self.count) @ u.conj().T


def _powers(factor: np.ndarray, count: int) -> np.ndarray:
    reps = np.broadcast_to(factor, (count,) + factor.shape)
    return np.concatenate([np.ones((1,) + factor.shape, dtype=complex), np.cumprod(reps, axis=0)])


def intervals(schedule: ParamSchedule, units: UnitConvention, h: float):
    """Constant-Hamiltonian stretches of the step grid.

    Returns ``(n_steps, [(first_step, n, H), ...])`` covering steps 0..n_steps-1.
    """
    n_steps = step_count(schedule.t_f, h)
    if n_steps == 0:
        return 0, []
    cuts = {0, n_steps}
    for p in PARAM_ORDER:
        s = schedule.segments(p)
        if n_steps % s:
            raise ValidationError(
                f"{p.value}: {s} segments do not align with {n_steps} steps of h={h}"
            )
        cuts.update(range(0, n_steps, n_steps // s))
    edges = sorted(cuts)
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        out.append((a, b - a, hamiltonian_at(schedule, units, a * h)))
    return n_steps, out


def plan(schedule: ParamSchedule, units: UnitConvention, h: float = DEFAULT_STEP) -> list[Interval]:
    """Eigen-decomposed constant-H intervals, in time order."""
    _, ivs = intervals(schedule, units, h)
    return [Interval(a, n, hm, h) for a, n, hm in ivs]


def rk4_factor(z):
    """Amplification of one classical RK4 step on dy/dt = (z/h) y."""
    return 1 + z * (1 + z / 2 * (1 + z / 3 * (1 + z / 4)))


def rk4_divided(z1, z2):
    """(r(z1) - r(z2)) / (z1 - z2) for the RK4 polynomial r, written without division."""
    s2 = z1 + z2
    s3 = z1 * z1 + z1 * z2 + z2 * z2
    s4 = s2 * (z1 * z1 + z2 * z2)
    return 1 + s2 / 2 + s3 / 6 + s4 / 24


def final_rho(rho0, ivs: list[Interval]) -> np.ndarray:
    """rho(t_f) for a batch, without storing the trajectory."""
    rho0 = np.asarray(rho0, dtype=complex)
    rho = rho0
    for iv in ivs:
        rho = iv.advance_rho(rho)
    _check_rho(rho0, rho)
    return rho


def _check_rho(first: np.ndarray, last: np.ndarray) -> None:
    # RK4 keeps the trace of a commutator flow exactly, so an unstable step
    # (|h * (d_i - d_j)| > 2 sqrt 2) shows up as growth of the Frobenius norm
    drift = np.max(np.abs(np.einsum("...ii", last) - np.einsum("...ii", first)), initial=0.0)
    if drift > DRIFT_ABORT:
        raise PropagationError(f"trace drift {drift:.2e}: step too large for these parameters")
    n0 = np.linalg.norm(first, axis=(-2, -1))
    growth = np.max(np.linalg.norm(last, axis=(-2, -1)) - n0 * (1 + DRIFT_ABORT), initial=0.0)
    if growth > 0 or not np.all(np.isfinite(last)):
        raise PropagationError("norm growth: step too large for these parameters")


def final_ket(psi0, ivs: list[Interval]) -> np.ndarray:
    psi = np.asarray(psi0, dtype=complex)
    n0 = np.linalg.norm(psi, axis=-1)
    for iv in ivs:
        psi = iv.advance_ket(psi)
    drift = np.max(np.abs(np.linalg.norm(psi, axis=-1) - n0), initial=0.0)
    if drift > DRIFT_ABORT:
        raise PropagationError(f"norm drift {drift:.2e}: step too large for these parameters")
    return psi


def _rho_trajectory(x0: np.ndarray, ivs: list[Interval], adjoint: bool) -> np.ndarray:
    """Stored trajectory of a commutator flow; ``ivs`` in integration order."""
    pieces = [x0[None]]
    x = x0
    for iv in ivs:
        if iv.count == 0:
            continue
        to_eig, from_eig = (
            (iv.to_adjoint_eig, iv.from_adjoint_eig) if adjoint else (iv.to_eig, iv.from_eig)
        )
        powers = iv.rho_powers()[1:]
        block = from_eig(powers[:, None] * to_eig(x)[None])
        pieces.append(block)
        x = block[-1]
    return np.concatenate(pieces)


def _ket_trajectory(y0: np.ndarray, ivs: list[Interval], adjoint: bool) -> np.ndarray:
    pieces = [y0[None]]
    y = y0
    for iv in ivs:
        if iv.count == 0:
            continue
        u = iv.evecs
        if adjoint:
            powers = np.conj(iv.ket_powers()[1:])
            block = (powers[:, None, :] * (y @ u)[None]) @ u.conj().T
        else:
            powers = iv.ket_powers()[1:]
            block = (powers[:, None, :] * (y @ u.conj())[None]) @ u.T
        pieces.append(block)
        y = block[-1]
    return np.concatenate(pieces)


def _as_batch(x: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape == shape:
        return x[None]
    if x.shape[1:] != shape:
        raise ValidationError(f"expected shape {shape} or (batch, *{shape}), got {x.shape}")
    return x


def evolve_rho_batch(rho0, schedule, units, h=DEFAULT_STEP, check=True) -> np.ndarray:
    """Forward density-matrix trajectories, shape (N+1, batch, 4, 4)."""
    rho0 = _as_batch(rho0, (4, 4))
    traj = _rho_trajectory(rho0, plan(schedule, units, h), adjoint=False)
    if check:
        _check_rho(traj[0], traj[-1])
    return traj


def evolve_rho(rho0, schedule, units, h=DEFAULT_STEP) -> Trajectory:
    """Integrate d rho/dt = -i [H(t), rho] from 0 to t_f with fixed-step RK4."""
    rho0 = np.asarray(rho0, dtype=complex)
    if not qcore.is_density(rho0, 1e-9):
        raise ValidationError("rho0 is not a density matrix")
    return Trajectory(h, evolve_rho_batch(rho0, schedule, units, h)[:, 0])


def evolve_adjoint_rho_batch(lam_tf, schedule, units, h=DEFAULT_STEP) -> np.ndarray:
    """Backward multiplier trajectories in forward time order, (N+1, batch, 4, 4).

    Integrates d Lambda/dt = +i [H^T, Lambda] from t_f down to 0 by stepping
    forward in t' = t_f - t, where it reads d Lambda/dt' = -i [H^T, Lambda].
    """
    lam_tf = _as_batch(lam_tf, (4, 4))
    traj = _rho_trajectory(lam_tf, plan(schedule, units, h)[::-1], adjoint=True)
    return traj[::-1]


def evolve_adjoint_rho(lam_tf, schedule, units, h=DEFAULT_STEP) -> Trajectory:
    return Trajectory(h, evolve_adjoint_rho_batch(lam_tf, schedule, units, h)[:, 0])


def evolve_ket_batch(psi0, schedule, units, h=DEFAULT_STEP, check=True) -> np.ndarray:
    """Forward ket trajectories, shape (N+1, batch, 4)."""
    psi0 = _as_batch(psi0, (4,))
    traj = _ket_trajectory(psi0, plan(schedule, units, h), adjoint=False)
    if check:
        norms = np.linalg.norm(traj, axis=-1)
        drift = np.max(np.abs(norms - norms[0]))
        if drift > DRIFT_ABORT:
            raise PropagationError(f"norm drift {drift:.2e}: step too large for these parameters")
    return traj


def evolve_ket(psi0, schedule, units, h=DEFAULT_STEP) -> Trajectory:
    """Integrate d psi/dt = -i H(t) psi with fixed-step RK4."""
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (4,) or abs(np.linalg.norm(psi0) - 1) > 1e-9:
        raise ValidationError("psi0 must be a normalized 4-component ket")
    return Trajectory(h, evolve_ket_batch(psi0, schedule, units, h)[:, 0])


def evolve_lambda_ket_batch(lam_tf, schedule, units, h=DEFAULT_STEP) -> np.ndarray:
    """Backward ket multipliers for d lambda/dt = -i H* lambda, forward time order."""
    lam_tf = _as_batch(lam_tf, (4,))
    traj = _ket_trajectory(lam_tf, plan(schedule, units, h)[::-1], adjoint=True)
    return traj[::-1]


def evolve_lambda_ket(lam_tf, schedule, units, h=DEFAULT_STEP) -> Trajectory:
    return Trajectory(h, evolve_lambda_ket_batch(lam_tf, schedule, units, h)[:, 0])


def segment_integrals(f: np.ndarray, schedule: ParamSchedule, h: float) -> dict[ParamId, np.ndarray]:
    """Trapezoid integral of per-parameter integrands over each segment.

    ``f`` has shape (N+1, len(PARAM_ORDER), ...) sampled on the step grid; the
    result maps each parameter to an array (segments, ...).
    """
    n_steps = f.shape[0] - 1
    cum = np.concatenate([np.zeros_like(f[:1]), np.cumsum(0.5 * h * (f[1:] + f[:-1]), axis=0)])
    out = {}
    for i, p in enumerate(PARAM_ORDER):
        s = schedule.segments(p)
        edges = np.arange(s + 1) * (n_steps // s)
        out[p] = cum[edges[1:], i] - cum[edges[:-1], i]
    return out
