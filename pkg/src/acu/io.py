"""File formats: matrix, pair and path JSON, report JSON, benchmark CSV.

A matrix is stored as ``{"n": n, "entries": [[[re, im], ...], ...]}``.
Python's float ``repr`` is the shortest string that round-trips, so a
write followed by a read reproduces every entry bit for bit.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Optional, Union

import numpy as np

from .errors import InvalidInput
from .homotopy import Segment, UnitaryPath

SCHEMA_VERSION = "1.0"
PathLike = Union[str, Path]


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------


def matrix_to_json(a) -> dict:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    return {
        "n": int(a.shape[0]),
        "entries": [[[float(z.real), float(z.imag)] for z in row] for row in a],
    }


def matrix_from_json(obj: Any) -> np.ndarray:
    """Parse and validate a matrix document.

    Raises
    ------
    InvalidInput
        Missing keys, wrong nesting, non-square data, size mismatch with
        ``n`` or non-finite entries.
    """
    if not isinstance(obj, dict) or "n" not in obj or "entries" not in obj:
        raise InvalidInput("matrix JSON needs keys 'n' and 'entries'")
    n = obj["n"]
    rows = obj["entries"]
    if not isinstance(n, int) or n < 1:
        raise InvalidInput("'n' must be a positive integer")
    if not isinstance(rows, list) or len(rows) != n or any(not isinstance(r, list) or len(r) != n for r in rows):
        raise InvalidInput(f"'entries' must be an {n}x{n} array")
    try:
        arr = np.array(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed entries: {exc}") from exc
    if arr.shape != (n, n, 2):
        raise InvalidInput("every entry must be a [re, im] pair")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("matrix has non-finite entries")
    return arr[..., 0] + 1j * arr[..., 1]


def pair_to_json(u, v, meta: Optional[dict] = None) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "u": matrix_to_json(u), "v": matrix_to_json(v)}
    if meta:
        doc["meta"] = meta
    return doc


def pair_from_json(obj: Any) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(obj, dict) or "u" not in obj or "v" not in obj:
        raise InvalidInput("pair JSON needs keys 'u' and 'v'")
    u = matrix_from_json(obj["u"])
    v = matrix_from_json(obj["v"])
    if u.shape != v.shape:
        raise InvalidInput(f"pair sizes differ: {u.shape} vs {v.shape}")
    return u, v


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


def path_to_json(path: UnitaryPath, certificate: Optional[dict] = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "stage_boundaries": list(path.stage_boundaries),
        "segments": [
            {
                "label": s.label,
                "kind": s.kind,
                "base": matrix_to_json(s.base),
                "generator": matrix_to_json(s.generator),
            }
            for s in path.segments
        ],
    }
    if certificate is not None:
        doc["certificate"] = certificate
    return doc


def path_from_json(obj: Any) -> UnitaryPath:
    if not isinstance(obj, dict) or not isinstance(obj.get("segments"), list) or not obj["segments"]:
        raise InvalidInput("path JSON needs a non-empty 'segments' list")
    segs = []
    for item in obj["segments"]:
        if not isinstance(item, dict) or "base" not in item or "generator" not in item:
            raise InvalidInput("each segment needs 'base' and 'generator'")
        base = matrix_from_json(item["base"])
        gen = matrix_from_json(item["generator"])
        if base.shape != gen.shape:
            raise InvalidInput("segment base and generator differ in size")
        segs.append(Segment(base, gen, item.get("label", ""), item.get("kind", "exponential")))
    if len({s.base.shape for s in segs}) != 1:
        raise InvalidInput("segments differ in size")
    return UnitaryPath(segs, list(obj.get("stage_boundaries", [])))


# ---------------------------------------------------------------------------
# generic JSON files
# ---------------------------------------------------------------------------


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _sanitize(o):
    """Replace non-finite floats by strings so the output stays strict JSON."""
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    if isinstance(o, dict):
        return {k: _sanitize(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_sanitize(v) for v in o]
    return o


def dumps(obj: Any) -> str:
    return json.dumps(_sanitize(json.loads(json.dumps(obj, default=_default))), indent=2, allow_nan=False)


def write_json(obj: Any, target: Optional[PathLike]) -> str:
    """Serialise ``obj``; write it to ``target`` when given, and return the text."""
    text = dumps(obj)
    if target is not None:
        Path(target).write_text(text + "\n")
    return text


def read_json(source: PathLike) -> Any:
    try:
        return json.loads(Path(source).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{source}: not valid JSON ({exc})") from exc


def load_schema(name: str) -> dict:
    """Shipped JSON schema document ``name`` (``matrix``, ``pair``, ``path``, ``report``, ``bench_row``)."""
    from importlib.resources import files

    return json.loads(files("acu").joinpath("schemas", f"{name}.schema.json").read_text())


# ---------------------------------------------------------------------------
# benchmark rows
# ---------------------------------------------------------------------------


@dataclass
class BenchRow:
    """One benchmark line; the field order is the CSV column order."""

    instance: str
    n_total: int
    delta: float
    eps: float
    N: Optional[int]
    d: int
    distance_u: float
    distance_v: float
    commutator_residual: float
    winding: Optional[int]
    isospec: Optional[int]
    mode: str
    runtime_ms: float

    @property
    def distance(self) -> float:
        return self.distance_u + self.distance_v

    def to_dict(self) -> dict:
        return asdict(self)


BENCH_COLUMNS = tuple(f.name for f in fields(BenchRow))


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def bench_csv(rows: Iterable[BenchRow]) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for row in rows:
        writer.writerow([_csv_cell(getattr(row, c)) for c in BENCH_COLUMNS])
    return buf.getvalue()


def read_bench_csv(text: str) -> list[dict]:
    reader = csv.DictReader(_io.StringIO(text))
    if tuple(reader.fieldnames or ()) != BENCH_COLUMNS:
        raise InvalidInput(f"bench CSV columns must be {BENCH_COLUMNS}")
    return list(reader)
