"""JSON inputs with schema checks, atomic artifact writes, versioned CSV."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import jsonschema

from . import __version__
from .errors import PreconditionError
from .mollify import GridFunction
from .patterns import IntervalSet
from .poly import Polynomial
from .scales import AdmissiblePair

_NUM = {"type": "number"}

POLY_SCHEMA = {
    "type": "object",
    "required": ["coeffs"],
    "properties": {
        "degree": {"type": "integer", "minimum": 2},
        "coeffs": {
            "oneOf": [
                {"type": "array", "items": _NUM, "minItems": 2},
                {"type": "object", "patternProperties": {"^[0-9]+$": _NUM},
                 "additionalProperties": False, "minProperties": 1},
            ]
        }
    },
}

GRID_SCHEMA = {
    "type": "object",
    "required": ["n"],
    "properties": {
        "n": {"type": "integer", "minimum": 1, "maximum": 26},
        "values": {"type": "array", "items": _NUM},
        "indicator": {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
    },
    "oneOf": [{"required": ["values"]}, {"required": ["indicator"]}],
}

SET_SCHEMA = {
    "type": "object",
    "required": ["N", "intervals"],
    "properties": {
        "N": {"type": "number", "exclusiveMinimum": 0},
        "intervals": {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
    },
}

PAIRS_SCHEMA = {
    "type": "object",
    "required": ["pairs"],
    "properties": {
        "pairs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["j", "ell", "d0", "m0"],
                "properties": {k: {"type": ["integer", "null"]} for k in ("j", "ell", "d0", "m0", "d1", "b1", "q0")},
            },
        }
    },
}


class SchemaError(PreconditionError):
    """Input document does not match its schema; ``pointer`` locates the fault."""

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"


def validate(doc, schema, source: str = "") -> None:
    err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(schema).iter_errors(doc))
    if err is not None:
        pointer = "".join(f"/{p}" for p in err.absolute_path)
        raise SchemaError(f"{source + ': ' if source else ''}{err.message}", pointer)


def load_json(path) -> object:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise PreconditionError(f"{path}: no such file") from None
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from None


def poly_from_doc(doc, source: str = "") -> Polynomial:
    """{"coeffs": [a1, ..., ad]} or {"coeffs": {"1": a1, ..., "d": 1}}."""
    validate(doc, POLY_SCHEMA, source)
    c = doc["coeffs"]
    if isinstance(c, dict):
        if float(c.get("0", 0.0)) != 0.0:
            raise SchemaError("constant term must be zero", "/coeffs/0")
        p = Polynomial.from_dict({int(k): v for k, v in c.items() if k != "0"})
    else:
        p = Polynomial.from_list(c)
    if "degree" in doc and doc["degree"] != p.d:
        raise SchemaError(f"degree {doc['degree']} disagrees with coefficients (degree {p.d})", "/degree")
    return p


def poly_to_doc(p: Polynomial) -> dict:
    return {"degree": p.d, "coeffs": {str(r): p.coeffs[r] for r in p.support}}


def load_poly(path) -> Polynomial:
    return poly_from_doc(load_json(path), str(path))


def grid_from_doc(doc, source: str = "") -> GridFunction:
    """GridFunction JSON, or a Set JSON rescaled from [0, N] to [0, 1]."""
    if isinstance(doc, dict) and "N" in doc:
        validate(doc, SET_SCHEMA, source)
        n = int(doc.get("n", 12))
        N = float(doc["N"])
        return GridFunction.indicator([(a / N, b / N) for a, b in doc["intervals"]], n)
    validate(doc, GRID_SCHEMA, source)
    n = doc["n"]
    if "values" in doc:
        if len(doc["values"]) != 1 << n:
            raise SchemaError(f"expected {1 << n} values, got {len(doc['values'])}", "/values")
        return GridFunction(n, doc["values"])
    return GridFunction.indicator([tuple(iv) for iv in doc["indicator"]], n)


def load_grid(path) -> GridFunction:
    return grid_from_doc(load_json(path), str(path))


def set_from_doc(doc, source: str = "") -> IntervalSet:
    validate(doc, SET_SCHEMA, source)
    return IntervalSet(tuple(tuple(iv) for iv in doc["intervals"]), doc["N"])


def load_set(path) -> IntervalSet:
    return set_from_doc(load_json(path), str(path))


def load_pair(ref: str, p: Polynomial) -> AdmissiblePair:
    """Resolve ``pairs.json#k`` to the k-th stored pair (k defaults to 0)."""
    path, _, idx = ref.partition("#")
    doc = load_json(path)
    validate(doc, PAIRS_SCHEMA, path)
    try:
        k = int(idx) if idx else 0
        e = doc["pairs"][k]
    except (ValueError, IndexError):
        raise SchemaError(f"{path}: no pair {idx!r}", f"/pairs/{idx}") from None
    return AdmissiblePair(e["j"], e["ell"], p.d, e["d0"], e["m0"], e.get("d1"), e.get("b1"), e.get("q0"))


# ---------------------------------------------------------------- numbers

def dyadic(x) -> str:
    """'2^e' (or '-2^e') when x is an exact power of two, else repr."""
    x = float(x)
    if x != 0 and math.isfinite(x):
        m, e = math.frexp(abs(x))
        if m == 0.5:
            return f"{'-' if x < 0 else ''}2^{e - 1}"
    return repr(x)


def parse_number(s: str) -> float:
    s = s.strip()
    neg = s.startswith("-")
    body = s[1:] if neg else s
    if body.startswith("2^"):
        v = math.ldexp(1.0, int(body[2:]))
    else:
        v = float(body)
    return -v if neg else v


def parse_sweep(s: str, integer: bool = False) -> list:
    """'a:b' inclusive range (dyadic steps when both ends are '2^e'), or a comma list."""
    s = s.strip()
    if ":" in s:
        a, b = s.split(":", 1)
        if a.strip().startswith("2^") and b.strip().startswith("2^"):
            lo, hi = int(a.strip()[2:]), int(b.strip()[2:])
            return [math.ldexp(1.0, e) for e in range(lo, hi + 1)]
        lo, hi = int(parse_number(a)), int(parse_number(b))
        if hi < lo:
            raise PreconditionError(f"empty range {s!r}")
        return list(range(lo, hi + 1))
    vals = [parse_number(v) for v in s.split(",") if v.strip()]
    if not vals:
        raise PreconditionError("empty sweep")
    return [int(v) for v in vals] if integer else vals


# ---------------------------------------------------------------- artifacts

def header_line(command: str) -> str:
    return f"# polyroth {__version__} {command}"


def atomic_write(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(command: str, columns, rows, config: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(header_line(command) + "\n")
    if config is not None:
        buf.write("# config " + json.dumps(config, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def write_csv(path, command: str, columns, rows, config: dict | None = None) -> None:
    atomic_write(path, csv_text(command, columns, rows, config))


def write_json(path, command: str, payload: dict, config: dict | None = None) -> None:
    doc = {"tool": "polyroth", "version": __version__, "command": command}
    if config is not None:
        doc["config"] = config
    doc.update(payload)
    atomic_write(path, json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"not serializable: {type(o).__name__}")


def read_artifact(path) -> dict:
    """Parse a CSV or JSON artifact written by this tool into {command, version, ...}."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        doc = json.loads(text)
        return {"kind": "json", "command": doc.get("command"), "version": doc.get("version"), "doc": doc}
    lines = text.splitlines()
    command = version = None
    config = None
    body = []
    for ln in lines:
        if ln.startswith("# polyroth "):
            parts = ln.split()
            version, command = parts[2], parts[3] if len(parts) > 3 else None
        elif ln.startswith("# config "):
            config = json.loads(ln[len("# config "):])
        elif not ln.startswith("#"):
            body.append(ln)
    rows = list(csv.DictReader(body))
    return {"kind": "csv", "command": command, "version": version, "config": config, "rows": rows}
