"""Persisted record of one protocol execution.

On disk a RunLog is a YAML header (spec, digest, events, derived metrics)
followed by a ``---`` line and a CSV sample table::

    schema_version: 1
    kind: stress_test
    ...
    ---
    timestamp,step_index,displacement,force,pressure,trial,phase
    0.030000,0,0.0000,0.2994,145.8900,0,datum
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import yaml

from .errors import IngestionError, SchemaVersionError
from .units import DisplacementMm, ForceN, PressureKpa, Sample

SCHEMA_VERSION = 1
SEPARATOR = "---\n"
COLUMNS = ("timestamp", "step_index", "displacement", "force", "pressure", "trial", "phase")


def config_digest(mapping) -> str:
    blob = json.dumps(mapping, sort_keys=True, separators=(",", ":"), default=str)
    return "sha256:" + hashlib.sha256(blob.encode()).hexdigest()


def _plain(obj):
    """Recursively convert tuples and numpy scalars into YAML-safe builtins."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return int(obj)
    if isinstance(obj, float):
        return float(obj)
    if hasattr(obj, "item"):
        return _plain(obj.item())
    return obj


@dataclass
class RunLog:
    kind: str
    spec: Dict[str, Any]
    backend: str
    device_config_digest: str
    samples: List[Sample] = field(default_factory=list)
    events: List[Tuple[float, str]] = field(default_factory=list)
    derived: Dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def event(self, t: float, text: str):
        self.events.append((float(t), str(text)))

    # -- text form -----------------------------------------------------------
    def to_text(self, precision: int = 4) -> str:
        header = {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "backend": self.backend,
            "device_config_digest": self.device_config_digest,
            "precision": int(precision),
            "spec": _plain(self.spec),
            "events": [[round(t, max(precision, 6)), text] for t, text in self.events],
            "derived": _plain(self.derived),
        }
        out = io.StringIO()
        out.write(yaml.safe_dump(header, sort_keys=True, default_flow_style=None, width=100))
        out.write(SEPARATOR)
        w = csv.writer(out, lineterminator="\n")
        w.writerow(COLUMNS)
        tp = max(precision, 6)
        for s in self.samples:
            w.writerow([f"{s.timestamp:.{tp}f}", s.step_index, f"{float(s.displacement):.{precision}f}",
                        f"{float(s.force):.{precision}f}", f"{float(s.pressure):.{precision}f}",
                        s.trial, s.phase])
        return out.getvalue()

    @classmethod
    def from_text(cls, text: str, source: str = "<runlog>") -> "RunLog":
        head, sep, table = text.partition("\n" + SEPARATOR)
        if not sep:
            raise IngestionError("missing '---' separator before the sample table", source=source)
        try:
            header = yaml.safe_load(head)
        except yaml.YAMLError as exc:
            raise IngestionError(f"unreadable run-log header: {exc}", source=source) from exc
        if not isinstance(header, dict) or "schema_version" not in header:
            raise IngestionError("run-log header lacks schema_version", source=source)
        if header["schema_version"] != SCHEMA_VERSION:
            raise SchemaVersionError(
                f"{source}: run-log schema_version {header['schema_version']!r} is not supported "
                f"(expected {SCHEMA_VERSION})")
        rows = csv.reader(io.StringIO(table))
        cols = next(rows, None)
        if tuple(cols or ()) != COLUMNS:
            raise IngestionError(f"unexpected sample columns {cols!r}", source=source)
        samples = []
        line0 = head.count("\n") + 4  # header lines, separator, column row
        for n, row in enumerate(rows):
            try:
                t, step, d, f, p, trial, phase = row
                samples.append(Sample(float(t), int(step), DisplacementMm(d), ForceN(f),
                                      PressureKpa(p), int(trial), phase))
            except (ValueError, TypeError) as exc:
                raise IngestionError(f"bad sample row {row!r}: {exc}", row=line0 + n,
                                     source=source) from exc
        return cls(
            kind=header["kind"],
            spec=header.get("spec") or {},
            backend=header.get("backend", ""),
            device_config_digest=header["device_config_digest"],
            samples=samples,
            events=[(float(t), str(e)) for t, e in header.get("events") or []],
            derived=header.get("derived") or {},
            schema_version=header["schema_version"],
        )
