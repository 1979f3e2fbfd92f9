"""Published parameter values (MHz) bundled as fixture weight files.

The gate tables list only the second and third eps_B segments; the first
segment copies the second. Run ``python3 -m dynlearn.published`` to rewrite
the JSON files under ``dynlearn/fixtures``.
"""

from __future__ import annotations

from pathlib import Path

from dynlearn.dynamics import ParamId, ParamSchedule, UnitConvention
from dynlearn.weights import FIXTURES, Provenance, WeightFile

_GATE_FIXED = {ParamId.KA: False, ParamId.EpsA: False}

VALUES: dict[str, tuple[float, dict]] = {
    "gate-initial": (300.0, dict(KA=2.1333, KB=2.1333, Zeta=0.1, EpsA=1000.0,
                                 EpsB=[0.1, 0.1, 0.1])),
    "xor-trained": (300.0, dict(KA=2.1333, KB=1.2684, Zeta=-0.97981, EpsA=1000.0,
                                EpsB=[1.0518, 1.0518, 1.0534])),
    "xnor-trained": (300.0, dict(KA=2.1333, KB=1.2682, Zeta=0.97973, EpsA=1000.0,
                                 EpsB=[1.0508, 1.0508, 1.0524])),
    "witness-initial": (1000.0, dict(KA=[2.5] * 4, KB=[2.5] * 4, Zeta=[0.1] * 4,
                                     EpsA=[0.1] * 4, EpsB=[0.1] * 4)),
    "witness-trained": (1000.0, dict(
        KA=[2.3576, 2.3576, 2.3577, 2.3461],
        KB=[2.3576, 2.3576, 2.3576, 2.3546],
        Zeta=[0.045026, 0.10117, 0.10771, 0.044221],
        EpsA=[0.10913, 0.03768, 0.08671, 0.071464],
        EpsB=[0.10913, 0.063774, 0.038802, 0.072387],
    )),
}

_EPOCHS = {"xor-trained": 300, "xnor-trained": 300, "witness-trained": 2000}
_RMS = {"xor-trained": 0.00446, "xnor-trained": 0.00447, "witness-trained": 1.08e-5}


def weight_file(name: str, units: UnitConvention) -> WeightFile:
    t_f, vals = VALUES[name]
    trainable = _GATE_FIXED if t_f == 300.0 else None
    schedule = ParamSchedule.constant(t_f, trainable=trainable, **vals)
    prov = Provenance(preset=name, epochs=_EPOCHS.get(name, 0), final_rms=_RMS.get(name),
                      note="published values")
    return WeightFile(schedule, units, prov)


def fixture_dir() -> Path:
    return Path(__file__).resolve().parent / "fixtures"


def write_all(out: Path | None = None) -> list[Path]:
    out = out or fixture_dir()
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in FIXTURES:
        for units in UnitConvention:
            path = out / f"{name}.{units.value}.json"
            weight_file(name, units).save(path)
            written.append(path)
    return written


if __name__ == "__main__":
    for p in write_all():
        print(p)
