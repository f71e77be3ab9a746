"""Metric reports and their deterministic serialization.

Reports are written with sorted keys and floats rendered at 17 significant
digits, so identical reports always produce identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ValidationError

REPORT_FORMATS = ("json", "csv")


@dataclass(frozen=True, order=True)
class MetricEntry:
    timestep: int
    block: int
    metric: str
    value: float


@dataclass
class MetricReport:
    """Per-(timestep, block) metric values plus run metadata.

    Entries are kept in lexicographic (timestep, block, metric) order and
    must all be finite.
    """

    entries: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, timestep: int, block: int, metric: str, value: float) -> None:
        self.entries.append(MetricEntry(int(timestep), int(block), str(metric), float(value)))

    def sort(self) -> None:
        self.entries.sort(key=lambda e: (e.timestep, e.block, e.metric))

    def validate(self) -> None:
        for entry in self.entries:
            if not math.isfinite(entry.value):
                raise ValidationError(
                    f"non-finite value for metric {entry.metric!r} at "
                    f"(t={entry.timestep}, b={entry.block})"
                )

    def values(self, metric: str) -> dict:
        """Map (timestep, block) -> value for one metric."""
        return {(e.timestep, e.block): e.value for e in self.entries if e.metric == metric}


def format_float(value: float) -> str:
    return format(float(value), ".17g")


def render_json(obj) -> str:
    """Deterministic JSON: sorted keys, 17-significant-digit floats."""
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return _escape(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValidationError("non-finite value is not representable in JSON")
        return format_float(obj)
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        return "{" + ",".join(f"{_escape(str(k))}:{render_json(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(render_json(v) for v in obj) + "]"
    try:
        # numpy scalars
        if hasattr(obj, "item"):
            return render_json(obj.item())
    except (TypeError, ValueError):
        pass
    raise ValidationError(f"unserializable value of type {type(obj).__name__}")


_ESCAPES = {'"': '\\"', "\\": "\\\\", "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _escape(text: str) -> str:
    out = []
    for ch in text:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def render_report(report: MetricReport, fmt: str) -> bytes:
    if fmt not in REPORT_FORMATS:
        raise ValidationError(f"unknown report format {fmt!r}")
    report.validate()
    entries = sorted(report.entries, key=lambda e: (e.timestep, e.block, e.metric))
    if fmt == "json":
        payload = {
            "metadata": report.metadata,
            "entries": [
                {
                    "timestep": e.timestep,
                    "block": e.block,
                    "metric": e.metric,
                    "value": e.value,
                }
                for e in entries
            ],
        }
        return (render_json(payload) + "\n").encode("utf-8")
    lines = [
        f"# {key}: {render_json(report.metadata[key])}"
        for key in sorted(report.metadata, key=str)
    ]
    lines.append("timestep,block,metric,value")
    for e in entries:
        lines.append(f"{e.timestep},{e.block},{e.metric},{format_float(e.value)}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def write_report(path, report: MetricReport, fmt: str = "json") -> None:
    """Serialize a report; identical reports give identical bytes."""
    data = render_report(report, fmt)
    with open(path, "wb") as fh:
        fh.write(data)


def write_sweep_csv(path, sections, metadata=None) -> None:
    """Consolidated CSV for a scaling-factor sweep.

    ``sections`` is a list of (sigma, MetricReport) in ascending sigma order.
    """
    lines = [
        f"# {key}: {render_json(metadata[key])}"
        for key in sorted(metadata or {}, key=str)
    ]
    lines.append("sigma,timestep,block,metric,value")
    for sigma, report in sections:
        report.validate()
        for e in sorted(report.entries, key=lambda e: (e.timestep, e.block, e.metric)):
            lines.append(
                f"{format_float(sigma)},{e.timestep},{e.block},{e.metric},{format_float(e.value)}"
            )
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
