"""Flat CSV metrics rows, one per evaluation, appended atomically."""

import csv
import os
from dataclasses import dataclass, fields

HEADER = ("run_id,seed,env,algo,env_steps,episodes,loss,"
          "test_return_mean,test_return_std,task_metric_name,task_metric_value")
COLUMNS = tuple(HEADER.split(","))

_STR_FIELDS = ("run_id", "env", "algo", "task_metric_name")
_INT_FIELDS = ("seed", "env_steps", "episodes")


def format_float(x) -> str:
    return "%.6g" % float(x)


@dataclass(frozen=True)
class MetricsRow:
    run_id: str
    seed: int
    env: str
    algo: str
    env_steps: int
    episodes: int
    loss: float
    test_return_mean: float
    test_return_std: float
    task_metric_name: str
    task_metric_value: float

    def __post_init__(self):
        for name in _STR_FIELDS:
            v = getattr(self, name)
            if "," in v or "\n" in v:
                raise ValueError(f"{name}={v!r} must not contain commas or newlines")

    def to_line(self) -> str:
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in _STR_FIELDS:
                parts.append(v)
            elif f.name in _INT_FIELDS:
                parts.append(str(int(v)))
            else:
                parts.append(format_float(v))
        return ",".join(parts)


def append_row(path, row: MetricsRow):
    """Append one row (plus the header on first write) in a single write call."""
    text = row.to_line() + "\n"
    if not os.path.exists(path) or os.path.getsize(path) == 0:
        text = HEADER + "\n" + text
    fd = os.open(path, os.O_CREAT | os.O_WRONLY | os.O_APPEND, 0o644)
    try:
        os.write(fd, text.encode("utf-8"))
    finally:
        os.close(fd)


def read_rows(path):
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"unexpected metrics header in {path}: {reader.fieldnames}")
        for rec in reader:
            kwargs = {}
            for name in COLUMNS:
                if name in _STR_FIELDS:
                    kwargs[name] = rec[name]
                elif name in _INT_FIELDS:
                    kwargs[name] = int(rec[name])
                else:
                    kwargs[name] = float(rec[name])
            out.append(MetricsRow(**kwargs))
    return out
