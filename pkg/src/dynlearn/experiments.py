"""Experiment runners and CSV emission used by the CLI and the acceptance suite."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from dynlearn import measures, presets, states
from dynlearn.dynamics import DEFAULT_STEP, UnitConvention
from dynlearn.errors import DivergenceError, ValidationError
from dynlearn.learn_ket import amplitude_table, train_control
from dynlearn.learn_rho import ObservableSpec, TrainConfig, outputs, train
from dynlearn.weights import Provenance, WeightFile, fixture

log = logging.getLogger(__name__)

SEED_ENV = "QNN_SEED"
GRID_SIZE = 10_000


@dataclass(frozen=True)
class RunConfig:
    """User-facing overrides; ``None`` keeps the preset default."""

    eta: float | None = None
    epochs: int | None = None
    h: float | None = None
    units: str | None = None
    batch_mode: str | None = None
    stop_rms: float | None = None
    seed: int = 0
    p_target: float | None = None
    loss: str | None = None

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def merged(self, **overrides) -> "RunConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def resolved_seed(self) -> int:
        env = os.environ.get(SEED_ENV)
        if env is None or env == "":
            return int(self.seed)
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"{SEED_ENV} must be an integer, got {env!r}") from None

    def train_config(self, base: TrainConfig) -> TrainConfig:
        return replace(base, **{k: getattr(self, k) for k in
                                ("eta", "epochs", "h", "units", "batch_mode", "stop_rms")
                                if getattr(self, k) is not None})


# ---------------------------------------------------------------- CSV output


def write_csv(meta: dict, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """CSV text with a ``# key: value`` metadata block in front."""
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}: {value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def read_csv(text: str) -> tuple[dict, list[dict]]:
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _provenance_meta(wf: WeightFile) -> str:
    p = wf.provenance
    return f"preset={p.preset} epochs={p.epochs} final_rms={p.final_rms} seed={p.seed}"


# ------------------------------------------------------------------ training


@dataclass(frozen=True)
class TrainingResult:
    weights: WeightFile
    history: list[float]
    outputs: dict[str, float]

    def history_csv(self) -> str:
        meta = {"preset": self.weights.provenance.preset,
                "units": self.weights.units.value,
                "seed": self.weights.provenance.seed}
        kind = "loss" if self.weights.provenance.preset == "control-cnot" else "rms"
        return write_csv(meta, ("epoch", kind), enumerate(self.history))


def run_training(name: str, cfg: RunConfig | None = None) -> TrainingResult:
    cfg = cfg or RunConfig()
    preset = presets.get(name)
    if preset.kind not in (presets.TRAIN_RHO, presets.TRAIN_KET):
        raise ValidationError(f"preset {name!r} is not a training preset")
    tcfg = cfg.train_config(preset.config)
    seed = cfg.resolved_seed()
    if preset.kind == presets.TRAIN_KET:
        loss = cfg.loss or preset.loss
        pairs = preset.pairs()
        schedule, history = train_control(pairs, preset.initial, tcfg, loss)
        amps = amplitude_table(schedule, tcfg.units, tcfg.h)
        outs = {p.label: float(abs(np.vdot(p.psi_des, amps[i])) ** 2)
                for i, p in enumerate(pairs)}
        note = f"loss={loss}"
    else:
        pairs = preset.pairs(cfg.p_target)
        schedule, history = train(pairs, preset.initial, preset.observable, tcfg)
        vals = outputs(np.stack([p.rho0 for p in pairs]), schedule, preset.observable,
                       tcfg.units, tcfg.h)
        outs = {p.label: float(v) for p, v in zip(pairs, vals)}
        note = f"eta={tcfg.eta} batch_mode={tcfg.batch_mode.value}"
        if cfg.p_target is not None:
            note += f" p_target={cfg.p_target}"
    prov = Provenance(preset=name, epochs=len(history) - 1, final_rms=float(history[-1]),
                      seed=seed, note=note)
    return TrainingResult(WeightFile(schedule, tcfg.units, prov), history, outs)


# ---------------------------------------------------------------- evaluation


EVAL_HEADER = ("state_id", "qnn_output", "concurrence", "eof", "spin_flip_overlap", "tg_witness")


@dataclass(frozen=True)
class EvalResult:
    labels: list[str]
    outputs: np.ndarray
    desired: np.ndarray | None
    reports: list[measures.MeasureReport]
    meta: dict

    @property
    def rms(self) -> float | None:
        if self.desired is None or not len(self.outputs):
            return None
        return float(np.sqrt(np.mean((self.outputs - self.desired) ** 2)))

    def by_label(self) -> dict[str, float]:
        return dict(zip(self.labels, map(float, self.outputs)))

    def csv(self) -> str:
        rows = ((lbl, out, r.concurrence, r.eof, r.spin_flip_overlap, r.tg_witness)
                for lbl, out, r in zip(self.labels, self.outputs, self.reports))
        meta = dict(self.meta)
        if self.rms is not None:
            meta["rms_vs_desired"] = repr(self.rms)
        return write_csv(meta, EVAL_HEADER, rows)


def observable_for(wf: WeightFile) -> ObservableSpec:
    """Observable of the preset that produced the weights; the witness by default."""
    try:
        obs = presets.get(wf.provenance.preset).observable
    except ValidationError:
        obs = None
    return obs if obs is not None else presets.get("witness-train").observable


def _check_units(wf: WeightFile, units) -> UnitConvention:
    if units is None:
        return wf.units
    units = UnitConvention(units)
    if units is not wf.units:
        raise ValidationError(
            f"weights were stored with units={wf.units.value}, request asked for {units.value}")
    return units


def resolve_set(spec: str, seed: int = 0) -> tuple[list[str], np.ndarray, np.ndarray | None]:
    """Labels, densities and (if known) desired outputs for an evaluation set."""
    if spec == "table8":
        rows = presets.testing_set()
        return ([r[0] for r in rows], np.stack([r[1] for r in rows]),
                np.array([r[2] for r in rows]))
    if spec == "grid-product":
        rhos = states.product_grid(10, seed)
        return [f"product-{i}" for i in range(len(rhos))], rhos, np.zeros(len(rhos))
    if spec == "grid-mixed":
        rhos = states.mixed_grid(GRID_SIZE, seed)
        return [f"mixed-{i}" for i in range(len(rhos))], rhos, np.zeros(len(rhos))
    if spec == "":
        return [], np.zeros((0, 4, 4), dtype=complex), None
    specs = [s.strip() for s in spec.split(";") if s.strip()]
    return specs, np.stack([states.make(s) for s in specs]), None


def run_eval(wf: WeightFile, set_spec: str, units=None, h: float = DEFAULT_STEP, seed: int = 0,
             with_measures: bool = True) -> EvalResult:
    units = _check_units(wf, units)
    labels, rhos, desired = resolve_set(set_spec, seed)
    obs = observable_for(wf)
    outs = outputs(rhos, wf.schedule, obs, units, h) if len(rhos) else np.zeros(0)
    reports = [measures.report(r) for r in rhos] if with_measures else [_NAN_REPORT] * len(rhos)
    meta = {"set": set_spec, "seed": seed, "units": units.value, "h": h,
            "weights": _provenance_meta(wf)}
    return EvalResult(labels, np.asarray(outs, dtype=float), desired, reports, meta)


_NAN_REPORT = measures.MeasureReport(*(math.nan,) * 5)


# -------------------------------------------------------------------- sweeps


SWEEP_HEADER = ("param", "qnn_output", "eof", "tg_witness")


@dataclass(frozen=True)
class SweepResult:
    param: str
    values: np.ndarray
    outputs: np.ndarray
    eof: np.ndarray
    tg_witness: np.ndarray
    meta: dict

    def csv(self) -> str:
        rows = zip(self.values, self.outputs, self.eof, self.tg_witness)
        return write_csv(self.meta, SWEEP_HEADER, rows)


def run_sweep(wf: WeightFile, family: str, param: str, start: float, stop: float,
              points: int = 20, fixed: dict | None = None, units=None,
              h: float = DEFAULT_STEP) -> SweepResult:
    units = _check_units(wf, units)
    if points < 1:
        raise ValidationError("points must be >= 1")
    if family not in states.FAMILIES:
        raise ValidationError(f"unknown family {family!r}")
    ctor = states.FAMILIES[family]
    grid = np.linspace(start, stop, points)
    try:
        rhos = np.stack([ctor(**{**(fixed or {}), param: float(v)}) for v in grid])
    except TypeError as exc:
        raise ValidationError(f"family {family!r} has no parameter {param!r}: {exc}") from None
    outs = outputs(rhos, wf.schedule, observable_for(wf), units, h)
    meta = {"family": family, "param": param, "from": start, "to": stop, "points": points,
            "units": units.value, "h": h, "weights": _provenance_meta(wf)}
    return SweepResult(param, grid, np.asarray(outs, dtype=float),
                       np.array([measures.eof(r) for r in rhos]),
                       np.array([measures.tg_witness(r) for r in rhos]), meta)


def run_preset_sweep(wf: WeightFile, name: str, units=None) -> SweepResult:
    sw = presets.get(name).sweep
    if sw is None:
        raise ValidationError(f"preset {name!r} is not a sweep")
    return run_sweep(wf, sw.family, sw.param, sw.start, sw.stop, sw.points, sw.fixed, units)


# --------------------------------------------------------------- target scan


SCAN_HEADER = ("target", "train_error", "test_error", "total_error", "status")


@dataclass(frozen=True)
class ScanResult:
    targets: list[float]
    train_error: list[float]
    test_error: list[float]
    status: list[str]
    meta: dict

    @property
    def total_error(self) -> list[float]:
        return [a + b for a, b in zip(self.train_error, self.test_error)]

    @property
    def best_target(self) -> float | None:
        ok = [(e, t) for e, t, s in zip(self.total_error, self.targets, self.status) if s == "ok"]
        return min(ok)[1] if ok else None

    def csv(self) -> str:
        rows = zip(self.targets, self.train_error, self.test_error, self.total_error, self.status)
        meta = dict(self.meta)
        meta["best_target"] = self.best_target
        return write_csv(meta, SCAN_HEADER, rows)


def scan_errors(wf: WeightFile, p_target: float, h: float = DEFAULT_STEP) -> tuple[float, float]:
    """Summed squared error on the training pairs and on the testing set.

    The P2 testing state is scored against the same target as P.
    """
    obs = observable_for(wf)
    pairs = presets.witness_pairs(p_target)
    train_out = outputs(np.stack([p.rho0 for p in pairs]), wf.schedule, obs, wf.units, h)
    train_err = float(np.sum((train_out - [p.target for p in pairs]) ** 2))
    rows = presets.testing_set()
    desired = np.array([p_target if lbl == "p2" else d for lbl, _, d in rows])
    test_out = outputs(np.stack([r[1] for r in rows]), wf.schedule, obs, wf.units, h)
    return train_err, float(np.sum((test_out - desired) ** 2))


def run_target_scan(values: Sequence[float], cfg: RunConfig | None = None) -> ScanResult:
    cfg = cfg or RunConfig()
    if not values:
        raise ValidationError("scan needs at least one target value")
    train_e, test_e, status = [], [], []
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"target {v} outside [0, 1]")
        try:
            res = run_training("witness-train", replace(cfg, p_target=float(v)))
            a, b = scan_errors(res.weights, float(v), cfg.h or DEFAULT_STEP)
            train_e.append(a)
            test_e.append(b)
            status.append("ok")
        except DivergenceError as exc:
            log.warning("target %s diverged: %s", v, exc)
            train_e.append(math.nan)
            test_e.append(math.nan)
            status.append("diverged")
    tcfg = cfg.train_config(presets.get("witness-train").config)
    meta = {"preset": "fig1-target-scan", "seed": cfg.resolved_seed(), "units": tcfg.units.value,
            "h": tcfg.h, "eta": tcfg.eta, "epochs": tcfg.epochs}
    return ScanResult([float(v) for v in values], train_e, test_e, status, meta)


# ------------------------------------------------------------ testing-set replay


@dataclass(frozen=True)
class ReplayResult:
    units: UnitConvention
    outputs: dict[str, float]
    rms: float
    reproduces: bool


REPLAY_TOL = 0.02


def testing_replay(units) -> ReplayResult:
    """Evaluate the published trained weights on the testing set under ``units``."""
    wf = fixture("witness-trained", units)
    res = run_eval(wf, "table8", with_measures=False)
    ok = bool(np.all(np.abs(res.outputs - res.desired) <= REPLAY_TOL))
    return ReplayResult(wf.units, res.by_label(), res.rms, ok)


def replay_report() -> str:
    rows = []
    for u in UnitConvention:
        r = testing_replay(u)
        rows.append((u.value, r.rms, "yes" if r.reproduces else "no",
                     *(r.outputs[k] for k in sorted(r.outputs))))
    labels = sorted(r[0] for r in presets.testing_set())
    return write_csv({"weights": "witness-trained", "tolerance": REPLAY_TOL},
                     ("units", "rms", "reproduces", *labels), rows)
