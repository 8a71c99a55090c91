"""Line-oriented text formats: record streams, prototype sets, and report
tables. Every file starts with a JSON header line carrying the format name,
a version, and the embedding dimension, so readers can fail fast.

Floats are written with Python's shortest round-trip repr, which is
deterministic across platforms; round trips are exact for the float32
values stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import (LabeledRecord, LabelRegistry, PrototypeSet, SpcError,
                   check_unit, normalize)

RECORDS_FORMAT = "spc-records"
PROTOS_FORMAT = "spc-prototypes"
FORMAT_VERSION = 1


class FileFormatError(SpcError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def _vec_to_list(vec: np.ndarray) -> list[float]:
    return [float(x) for x in np.asarray(vec, dtype=np.float32)]


def _read_header(line: str, path, expected_format: str) -> dict:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path}:1: malformed header: {e}") from None
    if header.get("format") != expected_format:
        raise FileFormatError(
            f"{path}:1: expected format {expected_format!r}, "
            f"got {header.get('format')!r}")
    if header.get("version") != FORMAT_VERSION:
        raise FileFormatError(f"{path}:1: unsupported version "
                              f"{header.get('version')!r}")
    if not isinstance(header.get("dim"), int) or header["dim"] < 1:
        raise FileFormatError(f"{path}:1: bad dim {header.get('dim')!r}")
    return header


def write_records(records, path, normalize_on_load: bool = False,
                  registry: LabelRegistry | None = None,
                  dim: int | None = None) -> None:
    """Write labeled records as header + one JSON object per line."""
    records = list(records)
    if dim is None:
        if not records:
            raise SpcError("cannot infer dim from an empty record list")
        dim = len(records[0].vec)
    resolve = registry.resolve if registry is not None else str
    with open(path, "w", encoding="utf-8") as f:
        f.write(_dump({"format": RECORDS_FORMAT, "version": FORMAT_VERSION,
                       "dim": dim, "normalize": normalize_on_load}) + "\n")
        for rec in records:
            f.write(_dump({"user": rec.user, "t": rec.t,
                           "label": resolve(rec.class_id),
                           "vec": _vec_to_list(rec.vec)}) + "\n")


def read_records(path, registry: LabelRegistry | None = None):
    """Parse a record file; returns (records, registry).

    Vectors are normalized on load when the header says normalize=true,
    otherwise they must already be unit within tolerance. Errors cite the
    offending line number.
    """
    if registry is None:
        registry = LabelRegistry()
    records: list[LabeledRecord] = []
    with open(path, "r", encoding="utf-8") as f:
        header = _read_header(f.readline(), path, RECORDS_FORMAT)
        dim = header["dim"]
        renorm = bool(header.get("normalize", False))
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                user, t, label = obj["user"], obj["t"], obj["label"]
                vec = np.asarray(obj["vec"], dtype=np.float32)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise FileFormatError(f"{path}:{lineno}: malformed record: {e}") \
                    from None
            if vec.shape != (dim,):
                raise FileFormatError(
                    f"{path}:{lineno}: vec length {vec.shape[0] if vec.ndim == 1 else '?'}"
                    f" does not match dim {dim}")
            if renorm:
                vec = normalize(vec)
            else:
                try:
                    check_unit(vec)
                except SpcError as e:
                    raise FileFormatError(f"{path}:{lineno}: {e}") from None
            records.append(LabeledRecord(user=str(user), t=int(t),
                                         class_id=registry.intern(label),
                                         vec=vec))
    return records, registry


def write_prototypes(protos: PrototypeSet, path,
                     registry: LabelRegistry | None = None) -> None:
    """One line per class: label, training count, prototype vector."""
    resolve = registry.resolve if registry is not None else str
    with open(path, "w", encoding="utf-8") as f:
        f.write(_dump({"format": PROTOS_FORMAT, "version": FORMAT_VERSION,
                       "dim": protos.dim}) + "\n")
        for i, c in enumerate(protos.class_ids):
            count = protos.counts.get(int(c)) if protos.counts else None
            f.write(_dump({"label": resolve(int(c)), "count": count,
                           "vec": _vec_to_list(protos.matrix[i])}) + "\n")


def read_prototypes(path, registry: LabelRegistry | None = None):
    """Parse a prototype file; returns (PrototypeSet, registry).

    An empty file (header only) is a legal empty prototype set.
    """
    if registry is None:
        registry = LabelRegistry()
    with open(path, "r", encoding="utf-8") as f:
        header = _read_header(f.readline(), path, PROTOS_FORMAT)
        dim = header["dim"]
        seen: set[str] = set()
        ids, vecs, counts = [], [], {}
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                label = obj["label"]
                vec = np.asarray(obj["vec"], dtype=np.float32)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise FileFormatError(f"{path}:{lineno}: malformed line: {e}") \
                    from None
            if label in seen:
                raise FileFormatError(f"{path}:{lineno}: duplicate label "
                                      f"{label!r}")
            seen.add(label)
            if vec.shape != (dim,):
                raise FileFormatError(f"{path}:{lineno}: vec length mismatch")
            cid = registry.intern(label)
            ids.append(cid)
            vecs.append(vec)
            if obj.get("count") is not None:
                counts[cid] = int(obj["count"])
    vectors = np.stack(vecs) if vecs else None
    return PrototypeSet(dim=dim, class_ids=ids, vectors=vectors,
                        counts=counts or None), registry


@dataclass
class ReportTable:
    """A report: one label per row, one value per (bucket, k) column.

    Values are fractions in [0, 1]; None renders as a blank cell
    (e.g. a conditional accuracy over an empty subset).
    """

    columns: list[str]
    rows: list[tuple[str, list[float | None]]]
    notes: list[str] = field(default_factory=list)

    def row(self, label: str) -> list[float | None]:
        for name, values in self.rows:
            if name == label:
                return values
        raise KeyError(label)


def _render_cell(value: float | None) -> str:
    return "-" if value is None else f"{100.0 * value:.1f}"


def _render_precise(value: float | None) -> str:
    return "-" if value is None else repr(value)


def render_report(table: ReportTable, fmt: str = "tsv",
                  precise: bool = False) -> str:
    """Render a report table; percent with one decimal, deterministic."""
    columns = list(table.columns)
    if precise:
        columns += [c + " (raw)" for c in table.columns]
    out = []
    if fmt == "tsv":
        out.append("\t".join(["method"] + columns))
        for label, values in table.rows:
            cells = [_render_cell(v) for v in values]
            if precise:
                cells += [_render_precise(v) for v in values]
            out.append("\t".join([label] + cells))
        for note in table.notes:
            out.append(f"# {note}")
    elif fmt == "markdown":
        out.append("| method | " + " | ".join(columns) + " |")
        out.append("|" + "---|" * (len(columns) + 1))
        for label, values in table.rows:
            cells = [_render_cell(v) for v in values]
            if precise:
                cells += [_render_precise(v) for v in values]
            out.append("| " + " | ".join([label] + cells) + " |")
        for note in table.notes:
            out.append("")
            out.append(f"_{note}_")
    else:
        raise SpcError(f"unknown report format {fmt!r}")
    return "\n".join(out) + "\n"


def write_report(table: ReportTable, path, fmt: str = "tsv",
                 precise: bool = False) -> None:
    if not table.rows:
        raise SpcError("refusing to write an empty report")
    text = render_report(table, fmt=fmt, precise=precise)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
