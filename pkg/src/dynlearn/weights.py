"""JSON persistence for trained schedules.

Files are written with sorted keys, fixed indentation and a trailing newline,
and floats go through ``repr`` (via :mod:`json`), so load followed by save
reproduces the original bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from dynlearn.dynamics import PARAM_ORDER, ParamId, ParamSchedule, UnitConvention
from dynlearn.errors import ValidationError

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Provenance:
    preset: str = ""
    epochs: int = 0
    final_rms: float | None = None
    seed: int | None = None
    note: str = ""

    def as_dict(self) -> dict:
        return {"preset": self.preset, "epochs": self.epochs, "final_rms": self.final_rms,
                "seed": self.seed, "note": self.note}


@dataclass(frozen=True)
class WeightFile:
    schedule: ParamSchedule
    units: UnitConvention
    provenance: Provenance = field(default_factory=Provenance)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        s = self.schedule
        return {
            "schema_version": self.schema_version,
            "units": UnitConvention(self.units).value,
            "t_f": s.t_f,
            "values": {p.value: list(s.values[p]) for p in PARAM_ORDER},
            "trainable": {p.value: bool(s.trainable[p]) for p in PARAM_ORDER},
            "provenance": self.provenance.as_dict(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_dict(cls, data: dict) -> "WeightFile":
        try:
            version = int(data["schema_version"])
            if version != SCHEMA_VERSION:
                raise ValidationError(f"unsupported schema_version {version}")
            units = UnitConvention(data["units"])
            t_f = float(data["t_f"])
            values = {ParamId(k): tuple(float(x) for x in v) for k, v in data["values"].items()}
            trainable = {ParamId(k): bool(v) for k, v in data.get("trainable", {}).items()}
            prov = Provenance(**data.get("provenance", {}))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"malformed weight file: {exc}") from None
        if not math.isfinite(t_f) or t_f < 0:
            raise ValidationError(f"t_f must be finite and non-negative, got {t_f}")
        for p, vals in values.items():
            if not vals:
                raise ValidationError(f"{p.value}: at least one segment required")
        schedule = ParamSchedule(t_f=t_f, values=values, trainable=trainable)
        return cls(schedule, units, prov, version)

    @classmethod
    def loads(cls, text: str) -> "WeightFile":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"weight file is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "WeightFile":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read weight file {path}: {exc}") from None
        return cls.loads(text)


FIXTURES = ("gate-initial", "xor-trained", "xnor-trained", "witness-initial", "witness-trained")


def fixture(name: str, units: UnitConvention | str = UnitConvention.RAW_MILLI) -> WeightFile:
    """Bundled published weights, e.g. ``fixture("witness-trained", "twopi")``."""
    if name not in FIXTURES:
        raise ValidationError(f"unknown fixture {name!r}; known: {FIXTURES}")
    units = UnitConvention(units)
    ref = resources.files("dynlearn") / "fixtures" / f"{name}.{units.value}.json"
    return WeightFile.loads(ref.read_text(encoding="utf-8"))
