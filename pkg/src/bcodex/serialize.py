"""JSON and CSV formats for states, operators, codes and result tables.

Floats in JSON use Python's shortest round-trip repr, so doubles survive a
dump/load cycle bit for bit; CSV cells use 17 significant digits.
"""

from __future__ import annotations

import io
import json
import math
from typing import Iterable, Sequence

import numpy as np

from .codes import BosonicCode
from .fock_core import FockOperator, FockVector

FORMAT_VERSION = 1


def fock_vector_to_dict(vec: FockVector) -> dict:
    return {"cutoffs": list(vec.cutoffs), "re": vec.amplitudes.real.tolist(),
            "im": vec.amplitudes.imag.tolist(), "format_version": FORMAT_VERSION}


def _complex_array(re, im) -> np.ndarray:
    # assign parts directly: re + 1j * im would turn -0.0 into 0.0
    re = np.asarray(re, dtype=float)
    out = np.empty(re.shape, dtype=complex)
    out.real = re
    out.imag = np.asarray(im, dtype=float)
    return out


def fock_vector_from_dict(doc: dict) -> FockVector:
    _check_version(doc)
    return FockVector(tuple(doc["cutoffs"]), _complex_array(doc["re"], doc["im"]))


def fock_operator_to_dict(op: FockOperator) -> dict:
    return {"cutoffs": list(op.cutoffs), "re": op.matrix.real.tolist(),
            "im": op.matrix.imag.tolist(), "format_version": FORMAT_VERSION}


def fock_operator_from_dict(doc: dict) -> FockOperator:
    _check_version(doc)
    return FockOperator(tuple(doc["cutoffs"]), _complex_array(doc["re"], doc["im"]))


def code_to_dict(code: BosonicCode) -> dict:
    return {"family": code.family, "params": _plain(code.params),
            "codewords": [fock_vector_to_dict(w) for w in code.codewords],
            "format_version": FORMAT_VERSION}


def code_from_dict(doc: dict) -> BosonicCode:
    _check_version(doc)
    words = tuple(fock_vector_from_dict(w) for w in doc["codewords"])
    return BosonicCode(doc.get("family", "custom"), dict(doc.get("params", {})), words)


def _check_version(doc: dict):
    if doc.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {doc.get('format_version')}")


def _plain(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(doc) -> str:
    return json.dumps(_plain(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def fmt17(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    f = float(x)
    if math.isnan(f):
        return "nan"
    return format(f, ".17g")


def csv_text(header: Sequence[str], rows: Iterable[Sequence], metadata: dict | None = None) -> str:
    """CSV with optional ``# key: json`` metadata lines before the header."""
    buf = io.StringIO()
    for key in sorted(metadata or {}):
        buf.write(f"# {key}: {json.dumps(_plain(metadata[key]), sort_keys=True)}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt17(v) for v in row) + "\n")
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], list[list[float]]]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [[float(c) for c in ln.split(",")] for ln in lines[1:]]


def write_text(path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
