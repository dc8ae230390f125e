"""JSON formats.

Matrices are ``{"d": n, "re": [[...]], "im": [[...]]}``; probability vectors
are plain arrays; a Lindbladian file is ``{"H": matrix, "L": [matrix, ...]}``.
Output is written with sorted keys and every float printed with 17
significant digits, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import hashlib
import json
import math
from typing import Any

import numpy as np

from .errors import ValidationError
from .lindblad import DensityMatrix, Lindbladian


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"d": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(data) -> np.ndarray:
    try:
        if isinstance(data, dict):
            re = np.asarray(data["re"], dtype=float)
            im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
            m = re + 1j * im
            d = int(data.get("d", m.shape[0]))
        else:
            m = np.asarray(data, dtype=complex)
            d = m.shape[0]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix: {exc}") from exc
    if m.ndim != 2 or m.shape != (d, d):
        raise ValidationError(f"matrix shape {m.shape} does not match d={d}")
    return m


def lindbladian_to_json(lind: Lindbladian) -> dict:
    return {"H": matrix_to_json(lind.hamiltonian), "L": [matrix_to_json(op) for op in lind.ops]}


def lindbladian_from_json(data) -> Lindbladian:
    if not isinstance(data, dict) or "L" not in data:
        raise ValidationError("Lindbladian JSON needs an 'L' list")
    ops = [matrix_from_json(op) for op in data["L"]]
    h = matrix_from_json(data["H"]) if data.get("H") is not None else None
    if h is None and not ops:
        raise ValidationError("Lindbladian JSON has neither H nor operators")
    return Lindbladian.from_ops(ops, h)


def state_from_json(data) -> DensityMatrix:
    """A density matrix, or a flat array read as a diagonal state."""
    if isinstance(data, list) and data and not isinstance(data[0], list):
        return DensityMatrix.diagonal(np.asarray(data, dtype=float))
    return DensityMatrix(matrix_from_json(data))


def _format(obj: Any, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            raise ValueError(f"cannot serialize {x} as JSON")
        out.append(format(x, ".17g") if x != int(x) or abs(x) >= 1e17 else format(x, ".1f"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for k, key in enumerate(sorted(obj)):
            if k:
                out.append(", ")
            out.append(json.dumps(str(key)))
            out.append(": ")
            _format(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for k, item in enumerate(obj):
            if k:
                out.append(", ")
            _format(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    out: list[str] = []
    _format(obj, out)
    return "".join(out) + "\n"


def lindbladian_hash(lind: Lindbladian) -> str:
    return hashlib.sha256(dumps(lindbladian_to_json(lind)).encode()).hexdigest()


def load_json(path: str) -> Any:
    with open(path) as fh:
        return json.load(fh)
