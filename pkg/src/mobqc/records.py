"""Result records and their CSV / JSON serialization.

The CSV header is fixed to :data:`CSV_COLUMNS`. JSON carries every field of
:class:`ResultRecord`; NaN is written as ``null`` and read back as NaN, so a
parse of emitted JSON reproduces the record.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

CSV_COLUMNS = (
    "experiment_id", "q", "epsilon", "r", "p_acc", "se_acc", "p_gpass", "p_psipass",
    "alpha", "beta1", "beta2", "beta3", "delta", "q_star", "gap",
)


@dataclass
class ResultRecord:
    experiment_id: str
    q: float
    epsilon: float
    r: int
    p_acc: float
    se_acc: float
    p_gpass: float
    p_psipass: float
    alpha: float
    beta1: float
    beta2: float
    beta3: float
    delta: float
    q_star: float
    gap: float
    se_gpass: float = math.nan
    se_psipass: float = math.nan
    p_compute: float = math.nan
    se_compute: float = math.nan
    p_compute_oracle: float = math.nan
    a: float = math.nan
    b: float = math.nan
    delta1: float = math.nan
    delta2: float = math.nan
    delta3: float = math.nan
    soundness_case: int = 0
    bound_name: str = ""
    bound: float = math.nan
    mode: str = "sample"
    trials: int = 0
    secrets_averaged: int = 0
    seed: int = 0
    strategy: str = ""
    counts: dict = field(default_factory=dict)
    accepted: dict = field(default_factory=dict)
    wall_time: float | None = None

    def __post_init__(self):
        # numpy scalars would leak into reprs and JSON
        for name in _FLOAT_FIELDS:
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, float(v))
        self.r = int(self.r)

    def validate(self) -> None:
        for name in ("p_acc", "p_gpass", "p_psipass", "p_compute"):
            v = getattr(self, name)
            if not math.isnan(v) and not -1e-12 <= v <= 1 + 1e-12:
                raise ValueError(f"{name} = {v} outside [0, 1]")
        if self.counts and sum(self.counts.values()) != self.trials:
            raise ValueError(f"branch counts {self.counts} do not sum to trials {self.trials}")

    def as_dict(self) -> dict:
        out = asdict(self)
        if out["wall_time"] is None:
            del out["wall_time"]
        return out


_FLOAT_FIELDS = {f.name for f in fields(ResultRecord) if f.type in ("float", "float | None")}


def _encode(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    return value


def _decode(key: str, value):
    if value is None and key in _FLOAT_FIELDS and key != "wall_time":
        return math.nan
    return value


def to_json(records: list[ResultRecord]) -> str:
    payload = [{k: _encode(v) for k, v in r.as_dict().items()} for r in records]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def from_json(text: str) -> list[ResultRecord]:
    return [ResultRecord(**{k: _decode(k, v) for k, v in row.items()}) for row in json.loads(text)]


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def to_csv(records: list[ResultRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([_csv_cell(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    for row in rows:
        for k, v in row.items():
            if k == "experiment_id":
                continue
            row[k] = math.nan if v == "" else (int(v) if k == "r" else float(v))
    return rows


def render(records: list[ResultRecord], fmt: str) -> str:
    if fmt == "csv":
        return to_csv(records)
    if fmt == "json":
        return to_json(records)
    raise ValueError(f"unknown format {fmt!r}")
