"""Named experiment presets.

Each preset binds everything a run needs except the seed: the schedule shape
and initial values, the observable, the training pairs or evaluation set, and
default optimizer settings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from dynlearn import qcore, states
from dynlearn.dynamics import DEFAULT_STEP, PARAM_ORDER, ParamId, ParamSchedule, UnitConvention
from dynlearn.errors import ValidationError
from dynlearn.learn_ket import KetTrainingPair, cnot_pairs
from dynlearn.learn_rho import ObservableSpec, RhoTrainingPair, TrainConfig

GATE_T_F = 300.0
WITNESS_T_F = 1000.0
P_TARGET = 0.44317

# kind of run a preset drives
TRAIN_RHO = "train-rho"
TRAIN_KET = "train-ket"
EVAL = "eval"
SWEEP = "sweep"
SCAN = "scan"


@dataclass(frozen=True)
class SweepSpec:
    family: str
    param: str
    start: float
    stop: float
    points: int
    fixed: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    kind: str
    t_f: float
    observable: ObservableSpec | None
    initial: ParamSchedule | None
    config: TrainConfig
    description: str
    loss: str | None = None
    eval_set: str | None = None
    sweep: SweepSpec | None = None
    scan_values: tuple[float, ...] = ()
    _pairs: Callable[[], list] | None = None

    def pairs(self, p_target: float | None = None) -> list:
        if self._pairs is None:
            raise ValidationError(f"preset {self.name!r} has no training pairs")
        if p_target is None:
            return self._pairs()
        return witness_pairs(p_target)

    def segments(self) -> dict[str, int]:
        if self.initial is None:
            return {}
        return {p.value: self.initial.segments(p) for p in PARAM_ORDER}

    def describe(self) -> dict:
        out = {
            "name": self.name,
            "kind": self.kind,
            "description": self.description,
            "t_f": self.t_f,
            "h": self.config.h,
            "units": self.config.units.value,
        }
        if self.observable is not None:
            obs = self.observable
            out["observable"] = f"{obs.kind.value} {_op_name(obs.operator)}"
        if self.initial is not None:
            s = self.initial
            out["segments"] = self.segments()
            out["trainable"] = {p.value: s.trainable[p] for p in PARAM_ORDER}
            out["initial"] = {p.value: list(s.values[p]) for p in PARAM_ORDER}
        if self.kind in (TRAIN_RHO, TRAIN_KET, SCAN):
            out["eta"] = self.config.eta
            out["epochs"] = self.config.epochs
            out["batch_mode"] = self.config.batch_mode.value
        if self.loss:
            out["loss"] = self.loss
        if self._pairs is not None:
            out["pairs"] = [_pair_row(p) for p in self._pairs()]
        if self.eval_set:
            out["eval_set"] = self.eval_set
        if self.sweep:
            sw = self.sweep
            out["sweep"] = {"family": sw.family, "param": sw.param, "from": sw.start,
                            "to": sw.stop, "points": sw.points}
        if self.scan_values:
            out["scan_values"] = list(self.scan_values)
        return out


_OP_NAMES = {
    "sigma_z(B)": qcore.SZ_B,
    "sigma_z(A) sigma_z(B)": qcore.SZZ,
}


def _op_name(op: np.ndarray) -> str:
    for name, m in _OP_NAMES.items():
        if np.array_equal(op, m):
            return name
    return "custom"


def _pair_row(p) -> dict:
    if isinstance(p, RhoTrainingPair):
        return {"label": p.label, "target": p.target}
    return {"label": p.label}


def gate_pairs(kind: str) -> list[RhoTrainingPair]:
    """Basis inputs |ab> with targets -1 (logical 0) or +1 (logical 1)."""
    table = {"xor": (-1, 1, 1, -1), "xnor": (1, -1, -1, 1)}[kind]
    return [RhoTrainingPair(states.basis(lbl), float(d), lbl)
            for lbl, d in zip(("00", "01", "10", "11"), table)]


def witness_pairs(p_target: float = P_TARGET) -> list[RhoTrainingPair]:
    return [
        RhoTrainingPair(states.bell(0.0), 1.0, "bell"),
        RhoTrainingPair(states.flat(), 0.0, "flat"),
        RhoTrainingPair(states.c_state(0.5), 0.0, "c(0.5)"),
        RhoTrainingPair(states.p_state(), float(p_target), "p"),
    ]


def testing_set() -> list[tuple[str, np.ndarray, float]]:
    """(label, density, desired output) for the witness testing set."""
    return [
        ("epr(0)", states.epr(0.0), 1.0),
        ("epr(pi)", states.epr(math.pi), 1.0),
        ("bell(pi)", states.bell(math.pi), 1.0),
        ("00", states.basis("00"), 0.0),
        ("10+0.9*11", states.generic_ket(0, 0, 1, 0.9), 0.0),
        ("p2", states.p2_state(), P_TARGET),
        ("m", states.mixed_m(), 0.0),
    ]


def gate_schedule() -> ParamSchedule:
    return ParamSchedule.constant(
        GATE_T_F,
        trainable={ParamId.KA: False, ParamId.EpsA: False},
        KA=2.1333, KB=2.1333, Zeta=0.1, EpsA=1000.0, EpsB=[0.1, 0.1, 0.1],
    )


def witness_schedule() -> ParamSchedule:
    return ParamSchedule.constant(
        WITNESS_T_F, KA=[2.5] * 4, KB=[2.5] * 4, Zeta=[0.1] * 4, EpsA=[0.1] * 4, EpsB=[0.1] * 4,
    )


def cnot_schedule() -> ParamSchedule:
    return ParamSchedule.constant(
        GATE_T_F,
        trainable={ParamId.KA: False, ParamId.EpsA: False},
        KA=0.0, EpsA=0.0, KB=1.0, Zeta=0.1, EpsB=[0.1, 0.1, 0.1],
    )


_RAW = UnitConvention.RAW_MILLI
_GATE_CFG = TrainConfig(eta=5.0, epochs=300, h=DEFAULT_STEP, units=_RAW)
_WITNESS_CFG = TrainConfig(eta=1.0, epochs=2000, h=DEFAULT_STEP, units=_RAW)
_CNOT_CFG = TrainConfig(eta=2.0, epochs=500, h=DEFAULT_STEP, units=_RAW)
_EVAL_CFG = TrainConfig(h=DEFAULT_STEP, units=_RAW)
_WITNESS_OBS = ObservableSpec.squared(qcore.SZZ)
_TWO_PI = 2 * math.pi

SCAN_TARGETS = (0.32, 0.38, 0.42, 0.4432, 0.46, 0.50, 0.55)


def _witness_sweep(name, desc, sweep) -> ExperimentPreset:
    return ExperimentPreset(name, SWEEP, WITNESS_T_F, _WITNESS_OBS, None, _EVAL_CFG, desc,
                            sweep=sweep)


PRESETS: dict[str, ExperimentPreset] = {
    p.name: p
    for p in (
        ExperimentPreset("gates-xor", TRAIN_RHO, GATE_T_F, ObservableSpec.linear(qcore.SZ_B),
                         gate_schedule(), _GATE_CFG, "XOR gate read out on qubit B",
                         _pairs=lambda: gate_pairs("xor")),
        ExperimentPreset("gates-xnor", TRAIN_RHO, GATE_T_F, ObservableSpec.linear(qcore.SZ_B),
                         gate_schedule(), _GATE_CFG, "XNOR gate read out on qubit B",
                         _pairs=lambda: gate_pairs("xnor")),
        ExperimentPreset("control-cnot", TRAIN_KET, GATE_T_F, None, cnot_schedule(), _CNOT_CFG,
                         "CNOT up to phase with qubit A pinned (K_A = eps_A = 0)",
                         loss="fidelity", _pairs=cnot_pairs),
        ExperimentPreset("witness-train", TRAIN_RHO, WITNESS_T_F, _WITNESS_OBS,
                         witness_schedule(), _WITNESS_CFG,
                         "entanglement witness from four training pairs",
                         _pairs=witness_pairs),
        ExperimentPreset("witness-test", EVAL, WITNESS_T_F, _WITNESS_OBS, None, _EVAL_CFG,
                         "trained witness on the testing set", eval_set="table8"),
        ExperimentPreset("fig1-target-scan", SCAN, WITNESS_T_F, _WITNESS_OBS,
                         witness_schedule(), _WITNESS_CFG,
                         "retrain per target value for P, total train+test error",
                         scan_values=SCAN_TARGETS, _pairs=witness_pairs),
        _witness_sweep("fig2-p3", "P3(gamma) over gamma",
                       SweepSpec("p3", "gamma", 0.0, 2.0, 41)),
        _witness_sweep("fig3-werner", "Werner states over fidelity F",
                       SweepSpec("werner", "F", 0.0, 1.0, 21)),
        _witness_sweep("fig4-mprime", "M'(gamma) over gamma",
                       SweepSpec("mprime", "gamma", 0.0, 2.0, 21)),
        _witness_sweep("fig5-bell-phase", "Bell state phase sweep",
                       SweepSpec("bell", "theta", 0.0, _TWO_PI, 20)),
        _witness_sweep("fig6-c-phase", "C state with gamma = e^{i theta}",
                       SweepSpec("c_phase", "theta", 0.0, _TWO_PI, 20)),
        _witness_sweep("fig7-p-phase", "phase between the pair and |01>",
                       SweepSpec("p_phase", "theta", 0.0, _TWO_PI, 20)),
        _witness_sweep("fig8-p-phase2", "phase inside the entangled pair",
                       SweepSpec("p_phase2", "theta", 0.0, _TWO_PI, 20)),
        ExperimentPreset("grid-product", EVAL, WITNESS_T_F, _WITNESS_OBS, None, _EVAL_CFG,
                         "10,000 real product states, target 0", eval_set="grid-product"),
        ExperimentPreset("grid-mixed", EVAL, WITNESS_T_F, _WITNESS_OBS, None, _EVAL_CFG,
                         "10,000 separable mixtures, target 0", eval_set="grid-mixed"),
    )
}


def get(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None


def with_overrides(preset: ExperimentPreset, **cfg) -> ExperimentPreset:
    """Copy of ``preset`` whose TrainConfig has the given (non-None) fields replaced."""
    cfg = {k: v for k, v in cfg.items() if v is not None}
    if not cfg:
        return preset
    try:
        return replace(preset, config=replace(preset.config, **cfg))
    except TypeError as exc:
        raise ValidationError(str(exc)) from None


def is_witness(preset: ExperimentPreset) -> bool:
    return preset.observable is _WITNESS_OBS
