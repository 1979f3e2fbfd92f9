"""Adjoint-state ("dynamic learning") training in the density-matrix picture.

Loss per pair is 1/2 (d - output)^2 with output = tr(rho(t_f) O) (LINEAR) or its
square (SQUARED). The multiplier matrix Lambda starts at

    Lambda(t_f) = (d - output) * chain * O^T,   chain = 1 or 2 tr(rho(t_f) O),

runs backward under d Lambda/dt = i [H^T, Lambda], and the gradient of a weight
w is  w_factor * i * integral over w's segment of tr(Lambda^T [G_w, rho]) dt.

Three evaluations of that integral are available:

* ``"trajectory"`` stores forward and backward trajectories and applies the
  trapezoid rule directly. Simple, slow, kept as the reference.
* ``"trapezoid"`` computes the same trapezoid sum from power-sum kernels.
  Inside a constant-H interval every element of rho and Lambda in the
  eigenbasis is a pure power of its RK4 factor, so the sum over steps
  collapses to pair-independent (4, 4, 4) kernels.
* ``"exact"`` (default) swaps the trapezoid weights for the divided
  differences of the RK4 step polynomial. The result is the exact gradient of
  the discrete RK4 map, so it agrees with finite differences to round-off
  rather than to O(h^2).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from dynlearn import qcore
from dynlearn.dynamics import (
    DEFAULT_STEP,
    PARAM_ORDER,
    Interval,
    ParamId,
    ParamSchedule,
    UnitConvention,
    evolve_adjoint_rho_batch,
    evolve_rho_batch,
    final_rho,
    generator,
    plan,
    rk4_divided,
    segment_integrals,
    step_count,
)
from dynlearn.errors import DivergenceError, PropagationError, ValidationError

log = logging.getLogger(__name__)

IMAG_ABORT = 1e-8
DIVERGENCE_RMS = 1e3
MAX_HALVINGS = 6

_GENS = np.stack([generator(p) for p in PARAM_ORDER])


class ObsKind(str, enum.Enum):
    LINEAR = "linear"
    SQUARED = "squared"


@dataclass(frozen=True)
class ObservableSpec:
    kind: ObsKind
    operator: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kind", ObsKind(self.kind))
        op = np.asarray(self.operator, dtype=complex)
        if op.shape != (4, 4) or not qcore.is_hermitian(op, 1e-12):
            raise ValidationError("observable must be a Hermitian 4x4 matrix")
        object.__setattr__(self, "operator", op)

    @classmethod
    def linear(cls, op) -> "ObservableSpec":
        return cls(ObsKind.LINEAR, op)

    @classmethod
    def squared(cls, op) -> "ObservableSpec":
        return cls(ObsKind.SQUARED, op)

    def expectation(self, rho_f: np.ndarray) -> np.ndarray:
        """tr(rho O) for one or a batch of final states."""
        return np.real(np.einsum("...ij,ji->...", rho_f, self.operator))

    def output(self, rho_f: np.ndarray) -> np.ndarray:
        c = self.expectation(rho_f)
        return c if self.kind is ObsKind.LINEAR else c**2


@dataclass(frozen=True)
class RhoTrainingPair:
    rho0: np.ndarray
    target: float
    label: str = ""

    def __post_init__(self):
        rho0 = np.asarray(self.rho0, dtype=complex)
        if rho0.shape != (4, 4) or not qcore.is_density(rho0, 1e-9):
            raise ValidationError(f"pair {self.label!r}: rho0 is not a density matrix")
        if not np.isfinite(self.target):
            raise ValidationError(f"pair {self.label!r}: target must be finite")
        object.__setattr__(self, "rho0", rho0)
        object.__setattr__(self, "target", float(self.target))


class BatchMode(str, enum.Enum):
    BATCH = "batch"
    PER_PATTERN = "per_pattern"


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.01
    epochs: int = 100
    h: float = DEFAULT_STEP
    units: UnitConvention = UnitConvention.RAW_MILLI
    batch_mode: BatchMode = BatchMode.BATCH
    stop_rms: Optional[float] = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ValidationError(f"eta must be positive, got {self.eta}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        object.__setattr__(self, "units", UnitConvention(self.units))
        object.__setattr__(self, "batch_mode", BatchMode(self.batch_mode))


def terminal_lambda(output, d, obs: ObservableSpec, expectation=None) -> np.ndarray:
    """Lambda(t_f) for one pair (scalars) or a batch (1-d arrays).

    For SQUARED observables ``expectation`` = tr(rho(t_f) O) supplies the
    chain-rule factor; it defaults to sqrt(output), which loses the sign, so
    pass it whenever it is known.
    """
    output = np.asarray(output, dtype=float)
    coef = np.asarray(d, dtype=float) - output
    if obs.kind is ObsKind.SQUARED:
        c = np.sqrt(np.clip(output, 0, None)) if expectation is None else np.asarray(expectation)
        coef = coef * 2.0 * c
    return coef[..., None, None] * obs.operator.T


def forward_output(pair: RhoTrainingPair, schedule, obs: ObservableSpec, units, h=DEFAULT_STEP):
    """Propagate ``pair.rho0`` to t_f; return ``(output, trajectory states)``."""
    traj = evolve_rho_batch(pair.rho0, schedule, units, h)[:, 0]
    return float(obs.output(traj[-1])), traj


def outputs(rho0s, schedule, obs: ObservableSpec, units, h=DEFAULT_STEP, ivs=None) -> np.ndarray:
    """Outputs for a batch of initial densities, without storing trajectories."""
    rho0s = np.asarray(rho0s, dtype=complex).reshape(-1, 4, 4)
    if ivs is None:
        ivs = plan(schedule, units, h)
    return obs.output(final_rho(rho0s, ivs))


def _interval_kernels(iv: Interval, exact: bool = True):
    """Power-sum kernels for one interval, indexed [a, b, c].

    With F the per-step RK4 factors, z their arguments and n the step count:

    exact:      s1 = h q(z_ab, z_cb) sum_{k<n} F_ab^k F_cb^(n-1-k)
                s2 = h q(z_ab, z_ac) sum_{k<n} F_ab^k F_ac^(n-1-k)
    trapezoid:  s1 = sum_k w_k F_ab^k F_cb^(n-k),  s2 likewise with F_ac

    q is the divided difference of the RK4 polynomial, so the exact kernels are
    the divided differences of r(z)^n: the derivative of the discrete map.
    """
    fp = iv.rho_powers()
    if exact:
        head, rev = fp[:-1], fp[-2::-1]
        z = iv.rho_z
        s1 = np.einsum("kab,kcb->abc", head, rev) * iv.h * rk4_divided(z[:, :, None], z.T[None])
        s2 = np.einsum("kab,kac->abc", head, rev) * iv.h * rk4_divided(z[:, :, None], z[:, None])
        return s1, s2
    w = np.full(iv.count + 1, iv.h)
    w[0] = w[-1] = 0.5 * iv.h
    rev = fp[::-1]
    s1 = np.einsum("k,kab,kcb->abc", w, fp, rev)
    s2 = np.einsum("k,kab,kac->abc", w, fp, rev)
    return s1, s2


def _kernel_gradient(rho0s, lam_tf, ivs, factor, exact=True):
    """Per-pair gradients by interval kernels; returns (B, n_params, n_intervals) complex."""
    b = rho0s.shape[0]
    starts = []
    rho = rho0s
    for iv in ivs:
        starts.append(rho)
        rho = iv.advance_rho(rho)
    out = np.zeros((b, len(PARAM_ORDER), len(ivs)), dtype=complex)
    lam = lam_tf
    for j in range(len(ivs) - 1, -1, -1):
        iv = ivs[j]
        s1, s2 = _interval_kernels(iv, exact)
        x0 = iv.to_eig(starts[j])
        wc = iv.to_adjoint_eig(lam)
        u = iv.evecs
        gt = qcore.dagger(u) @ _GENS @ u
        t1 = np.einsum("pli,bij,blj,ijl->bp", gt, x0, wc, s1)
        t2 = np.einsum("pli,bji,bjl,jli->bp", gt, wc, x0, s2)
        out[:, :, j] = 1j * factor * (t1 - t2)
        lam = iv.retreat_adjoint(lam)
    return out


def _to_segments(per_interval, schedule: ParamSchedule, ivs, n_steps):
    """Sum interval contributions into each parameter's segments."""
    res = {}
    for i, p in enumerate(PARAM_ORDER):
        s = schedule.segments(p)
        seg_len = n_steps // s
        g = np.zeros(per_interval.shape[:1] + (s,), dtype=per_interval.dtype)
        for j, iv in enumerate(ivs):
            g[:, iv.start // seg_len] += per_interval[:, i, j]
        res[p] = g
    return res


def _trajectory_gradient(rho0s, lam_tf, schedule, units, h, factor):
    rho_t = evolve_rho_batch(rho0s, schedule, units, h)
    lam_t = evolve_adjoint_rho_batch(lam_tf, schedule, units, h)
    lt = np.swapaxes(lam_t, -1, -2)
    comm = rho_t @ lt - lt @ rho_t
    # tr(G [rho, Lambda^T]) for every generator
    f = 1j * factor * np.einsum("pij,tbji->tpb", _GENS, comm)
    per_seg = segment_integrals(f, schedule, h)
    return {p: np.moveaxis(v, -1, 0) for p, v in per_seg.items()}


def batch_gradients(rho0s, targets, schedule, obs: ObservableSpec, units, h=DEFAULT_STEP,
                    method: str = "exact"):
    """Gradients of 1/2 (d - output)^2 for every pair in a batch.

    Returns ``(grads, outputs)`` where ``grads[p]`` has shape (batch, segments).
    """
    units = UnitConvention(units)
    rho0s = np.asarray(rho0s, dtype=complex).reshape(-1, 4, 4)
    targets = np.asarray(targets, dtype=float).reshape(-1)
    ivs = plan(schedule, units, h)
    rho_f = final_rho(rho0s, ivs)
    c = obs.expectation(rho_f)
    out = obs.output(rho_f)
    lam_tf = terminal_lambda(out, targets, obs, expectation=c)
    n_steps = step_count(schedule.t_f, h)
    if n_steps == 0:
        return {p: np.zeros((len(out), schedule.segments(p))) for p in PARAM_ORDER}, out
    if method in ("exact", "trapezoid"):
        per_iv = _kernel_gradient(rho0s, lam_tf, ivs, units.factor, method == "exact")
        raw = _to_segments(per_iv, schedule, ivs, n_steps)
    elif method == "trajectory":
        raw = _trajectory_gradient(rho0s, lam_tf, schedule, units, h, units.factor)
    else:
        raise ValidationError(f"unknown gradient method {method!r}")
    grads = {}
    for p, g in raw.items():
        imag = np.max(np.abs(g.imag), initial=0.0)
        if imag > IMAG_ABORT:
            raise PropagationError(f"gradient of {p.value} has imaginary part {imag:.2e}")
        grads[p] = g.real
    return grads, out


def gradient(pair: RhoTrainingPair, schedule, obs: ObservableSpec, units, h=DEFAULT_STEP,
             method: str = "exact") -> dict[ParamId, np.ndarray]:
    """Per-segment gradient of 1/2 (d - output)^2 for one pair.

    Gradients are reported for every parameter, trainable or not.
    """
    grads, _ = batch_gradients(pair.rho0[None], [pair.target], schedule, obs, units, h, method)
    return {p: g[0] for p, g in grads.items()}


def loss(rho0s, targets, schedule, obs, units, h=DEFAULT_STEP) -> float:
    out = outputs(rho0s, schedule, obs, units, h)
    return float(0.5 * np.sum((np.asarray(targets) - out) ** 2))


def _flat(grads: dict, schedule: ParamSchedule) -> np.ndarray:
    parts = [grads[p] for p in PARAM_ORDER if schedule.trainable[p]]
    return np.concatenate(parts, axis=-1) if parts else np.zeros(0)


def rms(targets, outs) -> float:
    return float(np.sqrt(np.mean((np.asarray(targets) - np.asarray(outs)) ** 2)))


def _epoch(rho0s, targets, schedule, obs, cfg: TrainConfig, eta):
    """One epoch of updates; returns the new schedule and pre-update outputs."""
    if cfg.batch_mode is BatchMode.BATCH:
        grads, out = batch_gradients(rho0s, targets, schedule, obs, cfg.units, cfg.h)
        step = _flat(grads, schedule).sum(axis=0)
        return schedule.with_vector(schedule.vector() - eta * step), out
    outs = []
    for r, d in zip(rho0s, targets):
        grads, out = batch_gradients(r[None], [d], schedule, obs, cfg.units, cfg.h)
        outs.append(out[0])
        schedule = schedule.with_vector(schedule.vector() - eta * _flat(grads, schedule)[0])
    return schedule, np.array(outs)


def train(pairs: list[RhoTrainingPair], schedule: ParamSchedule, obs: ObservableSpec,
          cfg: TrainConfig) -> tuple[ParamSchedule, list[float]]:
    """Plain gradient descent w <- w - eta dL/dw over ``cfg.epochs`` epochs.

    ``rms_history[k]`` is the RMS error after k updates, so the list has
    ``epochs + 1`` entries unless ``cfg.stop_rms`` ends training early. An
    epoch that produces a non-finite or exploding RMS is rolled back and
    retried with half the learning rate, at most six times.
    """
    if not pairs:
        raise ValidationError("train needs at least one pair")
    rho0s = np.stack([p.rho0 for p in pairs])
    targets = np.array([p.target for p in pairs])
    eta = cfg.eta
    halvings = 0
    history = [rms(targets, outputs(rho0s, schedule, obs, cfg.units, cfg.h))]
    epoch = 0
    while epoch < cfg.epochs:
        if cfg.stop_rms is not None and history[-1] <= cfg.stop_rms:
            break
        try:
            candidate, _ = _epoch(rho0s, targets, schedule, obs, cfg, eta)
            new_rms = rms(targets, outputs(rho0s, candidate, obs, cfg.units, cfg.h))
        except PropagationError as exc:
            log.warning("epoch %d failed: %s", epoch, exc)
            new_rms = float("inf")
        if not np.isfinite(new_rms) or new_rms > DIVERGENCE_RMS:
            halvings += 1
            if halvings > MAX_HALVINGS:
                raise DivergenceError(
                    f"training diverged at epoch {epoch} (rms={new_rms:.3g}, eta={eta:.3g})"
                )
            eta /= 2
            log.warning("rms %.3g at epoch %d, halving eta to %.3g", new_rms, epoch, eta)
            continue
        schedule = candidate
        history.append(new_rms)
        epoch += 1
    return schedule, history
