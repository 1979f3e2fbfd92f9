"""Quantum control in the ket picture: drive psi(0) toward a target state.

The output of a pair is the overlap z = <psi_des | psi(t_f)>. Two losses are
supported:

* ``"overlap"``  (default): 1/2 |1 - z|^2, phase sensitive.
* ``"fidelity"``: 1/2 (1 - |z|^2), blind to the global phase of each pair.

Both have the form dL = -Re[c* dz] with c = 1 - z or c = z, so the multiplier
starts at lambda(t_f) = -c/2 psi_des, obeys d lambda/dt = -i H* lambda, and the
gradient of weight w is  w_factor * integral 2 Re[-i lambda^dagger G_w psi] dt.
Gradient methods mirror :mod:`dynlearn.learn_rho`: ``"exact"`` (divided
differences of the RK4 map), ``"trapezoid"`` and ``"trajectory"``.

The Hamiltonian is traceless, so det U = 1 inside each block of fixed qubit-A
state when qubit A is pinned. A phase-exact CNOT (det -1 on the flipped block)
is therefore out of reach, and under the phase-sensitive loss the no-flip map
scores better than any flip. The CNOT preset trains with ``"fidelity"``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from dynlearn.dynamics import (
    DEFAULT_STEP,
    PARAM_ORDER,
    ParamId,
    ParamSchedule,
    UnitConvention,
    evolve_ket_batch,
    evolve_lambda_ket_batch,
    final_ket,
    generator,
    plan,
    rk4_divided,
    segment_integrals,
    step_count,
)
from dynlearn.errors import DivergenceError, PropagationError, ValidationError
from dynlearn.learn_rho import DIVERGENCE_RMS, MAX_HALVINGS, TrainConfig, _to_segments

log = logging.getLogger(__name__)

LOSSES = ("overlap", "fidelity")
_GENS = np.stack([generator(p) for p in PARAM_ORDER])


@dataclass(frozen=True)
class KetTrainingPair:
    psi0: np.ndarray
    psi_des: np.ndarray
    label: str = ""

    def __post_init__(self):
        for name in ("psi0", "psi_des"):
            v = np.asarray(getattr(self, name), dtype=complex)
            if v.shape != (4,) or abs(np.linalg.norm(v) - 1) > 1e-9:
                raise ValidationError(f"pair {self.label!r}: {name} must be a normalized ket")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class ControlResult:
    overlap: complex
    fidelity: float
    final_state: np.ndarray


def _check_loss(loss: str) -> str:
    if loss not in LOSSES:
        raise ValidationError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    return loss


def pair_losses(z: np.ndarray, loss: str = "overlap") -> np.ndarray:
    if _check_loss(loss) == "overlap":
        return 0.5 * np.abs(1 - z) ** 2
    return 0.5 * (1 - np.abs(z) ** 2)


def control_output(pair: KetTrainingPair, schedule, units, h=DEFAULT_STEP) -> ControlResult:
    psi_f = final_ket(pair.psi0[None], plan(schedule, units, h))[0]
    z = complex(np.vdot(pair.psi_des, psi_f))
    return ControlResult(z, abs(z) ** 2, psi_f)


def overlaps(psi0s, psi_des, schedule, units, h=DEFAULT_STEP, ivs=None) -> np.ndarray:
    if ivs is None:
        ivs = plan(schedule, units, h)
    psi_f = final_ket(np.asarray(psi0s, dtype=complex).reshape(-1, 4), ivs)
    return np.einsum("bi,bi->b", np.conj(psi_des), psi_f)


def terminal_lambda_ket(z, psi_des, loss: str = "overlap") -> np.ndarray:
    z = np.asarray(z)
    c = (1 - z) if _check_loss(loss) == "overlap" else z
    return -0.5 * c[..., None] * np.asarray(psi_des)


def _kernel_gradient(psi0s, lam_tf, ivs, factor, exact=True):
    starts = []
    psi = psi0s
    for iv in ivs:
        starts.append(psi)
        psi = iv.advance_ket(psi)
    out = np.zeros((psi0s.shape[0], len(PARAM_ORDER), len(ivs)))
    lam = lam_tf
    for j in range(len(ivs) - 1, -1, -1):
        iv = ivs[j]
        u = iv.evecs
        pw = iv.ket_powers()
        if exact:
            z = iv.ket_z
            kern = np.einsum("ki,kj->ij", pw[-2::-1], pw[:-1])
            kern = kern * iv.h * rk4_divided(z[:, None], z[None])
        else:
            w = np.full(iv.count + 1, iv.h)
            w[0] = w[-1] = 0.5 * iv.h
            kern = np.einsum("k,ki,kj->ij", w, pw[::-1], pw)
        a0 = starts[j] @ u.conj()
        nu = lam @ u
        gh = u.T @ _GENS @ u
        s = np.einsum("bi,pij,bj,ij->bp", np.conj(nu), gh, a0, kern)
        out[:, :, j] = factor * 2 * np.real(-1j * s)
        lam = iv.retreat_lambda(lam)
    return out


def _trajectory_gradient(psi0s, lam_tf, schedule, units, h, factor):
    psi_t = evolve_ket_batch(psi0s, schedule, units, h)
    lam_t = evolve_lambda_ket_batch(lam_tf, schedule, units, h)
    f = factor * 2 * np.real(-1j * np.einsum("tbi,pij,tbj->tpb", np.conj(lam_t), _GENS, psi_t))
    per_seg = segment_integrals(f, schedule, h)
    return {p: np.moveaxis(v, -1, 0) for p, v in per_seg.items()}


def batch_gradients_ket(psi0s, psi_des, schedule, units, h=DEFAULT_STEP, loss="overlap",
                        method="exact"):
    """Per-pair gradients and overlaps; ``grads[p]`` has shape (batch, segments)."""
    units = UnitConvention(units)
    psi0s = np.asarray(psi0s, dtype=complex).reshape(-1, 4)
    psi_des = np.asarray(psi_des, dtype=complex).reshape(-1, 4)
    ivs = plan(schedule, units, h)
    z = overlaps(psi0s, psi_des, schedule, units, h, ivs)
    lam_tf = terminal_lambda_ket(z, psi_des, loss)
    n_steps = step_count(schedule.t_f, h)
    if n_steps == 0:
        return {p: np.zeros((len(z), schedule.segments(p))) for p in PARAM_ORDER}, z
    if method in ("exact", "trapezoid"):
        per_iv = _kernel_gradient(psi0s, lam_tf, ivs, units.factor, method == "exact")
        grads = _to_segments(per_iv, schedule, ivs, n_steps)
    elif method == "trajectory":
        grads = _trajectory_gradient(psi0s, lam_tf, schedule, units, h, units.factor)
    else:
        raise ValidationError(f"unknown gradient method {method!r}")
    return grads, z


def gradient_ket(pair: KetTrainingPair, schedule, units, h=DEFAULT_STEP, loss="overlap",
                 method="exact") -> dict[ParamId, np.ndarray]:
    grads, _ = batch_gradients_ket(pair.psi0, pair.psi_des, schedule, units, h, loss, method)
    return {p: g[0] for p, g in grads.items()}


def total_loss(pairs, schedule, units, h=DEFAULT_STEP, loss="overlap") -> float:
    z = overlaps(np.stack([p.psi0 for p in pairs]), np.stack([p.psi_des for p in pairs]),
                 schedule, units, h)
    return float(np.sum(pair_losses(z, loss)))


def train_control(pairs: list[KetTrainingPair], schedule: ParamSchedule, cfg: TrainConfig,
                  loss: str = "overlap") -> tuple[ParamSchedule, list[float]]:
    """Batch gradient descent on the summed pair losses.

    ``loss_history[k]`` is the total loss after k updates. Divergence handling
    matches :func:`dynlearn.learn_rho.train`.
    """
    if not pairs:
        raise ValidationError("train_control needs at least one pair")
    _check_loss(loss)
    psi0s = np.stack([p.psi0 for p in pairs])
    psi_des = np.stack([p.psi_des for p in pairs])

    def total(s):
        return float(np.sum(pair_losses(overlaps(psi0s, psi_des, s, cfg.units, cfg.h), loss)))

    eta = cfg.eta
    halvings = 0
    history = [total(schedule)]
    epoch = 0
    while epoch < cfg.epochs:
        if cfg.stop_rms is not None and history[-1] <= cfg.stop_rms:
            break
        try:
            grads, _ = batch_gradients_ket(psi0s, psi_des, schedule, cfg.units, cfg.h, loss)
            step = np.concatenate([grads[p].sum(axis=0) for p in PARAM_ORDER
                                   if schedule.trainable[p]] or [np.zeros(0)])
            candidate = schedule.with_vector(schedule.vector() - eta * step)
            value = total(candidate)
        except PropagationError as exc:
            log.warning("epoch %d failed: %s", epoch, exc)
            value = float("inf")
        if not np.isfinite(value) or value > DIVERGENCE_RMS:
            halvings += 1
            if halvings > MAX_HALVINGS:
                raise DivergenceError(f"control training diverged at epoch {epoch}")
            eta /= 2
            continue
        schedule = candidate
        history.append(value)
        epoch += 1
    return schedule, history


def basis_ket(label: str) -> np.ndarray:
    """|ab> for a two-character bit label such as "10"."""
    if len(label) != 2 or set(label) - {"0", "1"}:
        raise ValidationError(f"bad basis label {label!r}")
    v = np.zeros(4, dtype=complex)
    v[int(label, 2)] = 1.0
    return v


def cnot_pairs() -> list[KetTrainingPair]:
    mapping = {"00": "00", "01": "01", "10": "11", "11": "10"}
    return [KetTrainingPair(basis_ket(a), basis_ket(b), f"{a}->{b}") for a, b in mapping.items()]


def amplitude_table(schedule, units, h=DEFAULT_STEP) -> np.ndarray:
    """Row i holds the output amplitudes for basis input i (as in a gate table)."""
    psi_f = final_ket(np.eye(4, dtype=complex), plan(schedule, units, h))
    return psi_f


def qubit_a_leakage(schedule, units, h=DEFAULT_STEP) -> float:
    """Largest population moved across qubit-A branches for basis inputs."""
    amps = np.abs(amplitude_table(schedule, units, h)) ** 2
    a_bit = np.array([0, 0, 1, 1])
    return float(max(amps[i][a_bit != a_bit[i]].sum() for i in range(4)))

