"""Per-iteration trace records and their CSV encoding.

The CSV header is a stable external contract:
``t,grad_norm,y_err,z_err,eps_err,phi,calls_gxF,calls_gyF,calls_gyG,calls_hxy,calls_hyy``.
Missing metrics are written as empty fields, never as omitted columns.
Float fields use the shortest round-tripping decimal form, so parsing a
trace and re-emitting it reproduces the file byte for byte.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable

CSV_HEADER = ("t,grad_norm,y_err,z_err,eps_err,phi,"
              "calls_gxF,calls_gyF,calls_gyG,calls_hxy,calls_hyy")

_METRIC_COLUMNS = ("grad_norm", "y_err", "z_err", "eps_err", "phi")
_CALL_COLUMNS = ("calls_gxF", "calls_gyF", "calls_gyG", "calls_hxy", "calls_hyy")
COLUMNS = ("t",) + _METRIC_COLUMNS + _CALL_COLUMNS


@dataclass(frozen=True)
class TraceRecord:
    """One iteration's metrics; ``None`` marks a metric that was not computed."""

    t: int
    grad_norm: float | None
    y_err: float | None
    z_err: float | None
    eps_err: float | None
    phi: float | None
    calls_gxF: int
    calls_gyF: int
    calls_gyG: int
    calls_hxy: int
    calls_hyy: int

    def __post_init__(self) -> None:
        for name in ("grad_norm", "y_err", "z_err", "eps_err"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative, got {v}")


@dataclass
class Trace:
    """An ordered run trace plus run-level events."""

    records: list[TraceRecord] = field(default_factory=list)
    skipped_steps: list[int] = field(default_factory=list)
    aborted_at: int | None = None

    def append(self, rec: TraceRecord) -> None:
        if self.records and rec.t <= self.records[-1].t:
            raise ValueError("trace iteration indices must be strictly increasing")
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> list[float | int | None]:
        if name not in COLUMNS:
            raise KeyError(name)
        return [getattr(r, name) for r in self.records]


def _fmt(v: float | int | None) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        raise TypeError("bool is not a trace value")
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def trace_to_csv(trace: Trace) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in trace.records:
        buf.write(",".join(_fmt(getattr(r, c)) for c in COLUMNS) + "\n")
    return buf.getvalue()


def write_trace(path, trace: Trace) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(trace_to_csv(trace))


def _parse_opt_float(s: str) -> float | None:
    return None if s == "" else float(s)


def trace_from_csv(text: str) -> Trace:
    lines = text.splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"bad trace header; expected {CSV_HEADER!r}")
    trace = Trace()
    for line in lines[1:]:
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(COLUMNS):
            raise ValueError(f"bad trace row: {line!r}")
        trace.append(TraceRecord(
            t=int(parts[0]),
            grad_norm=_parse_opt_float(parts[1]),
            y_err=_parse_opt_float(parts[2]),
            z_err=_parse_opt_float(parts[3]),
            eps_err=_parse_opt_float(parts[4]),
            phi=_parse_opt_float(parts[5]),
            calls_gxF=int(parts[6]), calls_gyF=int(parts[7]),
            calls_gyG=int(parts[8]), calls_hxy=int(parts[9]),
            calls_hyy=int(parts[10]),
        ))
    return trace


def read_trace(path) -> Trace:
    with open(path, "r", newline="") as fh:
        return trace_from_csv(fh.read())


def traces_equal_bytes(paths: Iterable) -> bool:
    blobs = []
    for p in paths:
        with open(p, "rb") as fh:
            blobs.append(fh.read())
    return all(b == blobs[0] for b in blobs[1:])
