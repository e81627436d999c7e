"""Materials-testing CSV ingestion.

Input is comma-separated UTF-8 with a header row.  A file holds either one
curve (id from the file name, day from ``--day``) or many in long form with
id/day columns.  Columns are chosen by header name or 0-based index.
"""

from __future__ import annotations

import csv
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .errors import IngestionError, QuantityError
from .units import FruitSample, IndentationCurve

Column = Union[str, int]
META = {"axial_length": "axial_length_mm", "radial_length": "radial_length_mm", "mass": "mass_g"}


def _resolve(header: List[str], col: Optional[Column], source, required=True) -> Optional[int]:
    if col is None:
        return None
    if isinstance(col, int) or (isinstance(col, str) and col.isdigit()):
        i = int(col)
        if i >= len(header):
            raise IngestionError(f"column index {i} out of range ({len(header)} columns)",
                                 row=1, source=source)
        return i
    if col in header:
        return header.index(col)
    if required:
        raise IngestionError(f"no column named {col!r} in header {header}", row=1, source=source)
    return None


def read_curves(path, displacement: Column = "displacement_mm", force: Column = "force_n",
                sample_id: Optional[Column] = None, day: Optional[Column] = None,
                default_day: Optional[int] = None) -> List[FruitSample]:
    path = Path(path)
    src = str(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestionError(f"cannot read: {exc}", source=src) from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise IngestionError("empty file", row=1, source=src)
    header = [h.strip() for h in rows[0]]
    di = _resolve(header, displacement, src)
    fi = _resolve(header, force, src)
    ii = _resolve(header, sample_id if sample_id is not None else "sample_id", src,
                  required=sample_id is not None)
    dyi = _resolve(header, day if day is not None else "day", src, required=day is not None)
    meta = {m: _resolve(header, h, src, required=False) for m, h in META.items()}

    groups: Dict[str, dict] = OrderedDict()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise IngestionError(f"expected {len(header)} fields, got {len(row)}", row=lineno,
                                 source=src)
        try:
            d = float(row[di])
            f = float(row[fi])
        except ValueError:
            raise IngestionError(f"non-numeric displacement/force {row[di]!r}, {row[fi]!r}",
                                 row=lineno, source=src) from None
        sid = row[ii].strip() if ii is not None else path.stem
        if dyi is not None:
            try:
                dy = int(row[dyi])
            except ValueError:
                raise IngestionError(f"non-integer day {row[dyi]!r}", row=lineno,
                                     source=src) from None
        elif default_day is not None:
            dy = int(default_day)
        else:
            raise IngestionError("no day column and no default day given", row=lineno, source=src)
        g = groups.setdefault(sid, {"day": dy, "d": [], "f": [], "rows": [], "meta": {}})
        if g["day"] != dy:
            raise IngestionError(f"sample {sid!r} changes day {g['day']} -> {dy}", row=lineno,
                                 source=src)
        g["d"].append(d)
        g["f"].append(f)
        g["rows"].append(lineno)
        for m, mi in meta.items():
            if mi is not None and row[mi].strip() and m not in g["meta"]:
                try:
                    g["meta"][m] = float(row[mi])
                except ValueError:
                    raise IngestionError(f"non-numeric {header[mi]} {row[mi]!r}", row=lineno,
                                         source=src) from None

    samples = []
    for sid, g in groups.items():
        d = np.asarray(g["d"])
        bad = np.nonzero(np.diff(d) <= 0)[0]
        if bad.size:
            raise IngestionError(f"sample {sid!r}: displacement not strictly increasing",
                                 row=g["rows"][bad[0] + 1], source=src)
        try:
            curve = IndentationCurve(tuple(g["d"]), tuple(g["f"]))
            samples.append(FruitSample(id=sid, day=g["day"], curve=curve, **g["meta"]))
        except QuantityError as exc:
            raise IngestionError(f"sample {sid!r}: {exc}", row=g["rows"][0], source=src) from exc
    if not samples:
        raise IngestionError("no data rows", row=2, source=src)
    return samples


def write_curves(path, samples: Sequence[FruitSample]):
    """Long-form CSV in the layout :func:`read_curves` reads by default."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "day", "displacement_mm", "force_n",
                    "axial_length_mm", "radial_length_mm", "mass_g"])
        for s in samples:
            for d, f in s.curve.points:
                w.writerow([s.id, s.day, repr(d), repr(f),
                            "" if s.axial_length is None else s.axial_length,
                            "" if s.radial_length is None else s.radial_length,
                            "" if s.mass is None else s.mass])
