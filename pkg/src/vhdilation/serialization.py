"""JSON encodings for matrices, kernels, CP maps, linearisations and reports.

Complex numbers are ``[re, im]`` pairs, matrices are row-major nested lists.
Floats go through ``repr`` (shortest round-trip form), so decoding recovers
every value bit for bit.  Output uses sorted keys for byte-stable files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .algebra import AlgebraShape, as_shape
from .errors import ParseError, VersionMismatch
from .kernel import OperatorKernel
from .linearisation import Linearisation
from .stinespring import CPMap

SCHEMA_VERSION = 1


def encode_matrix(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 2 and a.shape[0] == 0:
        return []
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def decode_matrix(obj: Any, path: str = "", shape: tuple | None = None) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"not a complex matrix ({exc})", path) from None
    if arr.size == 0:
        out = np.zeros(shape if shape is not None else (0, 0), complex)
        return out
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ParseError(f"expected rows of [re, im] pairs, got array of shape {arr.shape}", path)
    out = arr[..., 0] + 1j * arr[..., 1]
    if shape is not None and out.shape != tuple(shape):
        raise ParseError(f"matrix of shape {out.shape}, expected {tuple(shape)}", path)
    return out


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def _read(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(str(exc), str(path)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}", str(path)) from None
    if not isinstance(data, dict):
        raise ParseError("top level must be an object", str(path))
    return data


def check_version(data: dict, path: str = "") -> None:
    v = data.get("schema_version", SCHEMA_VERSION)
    if v != SCHEMA_VERSION:
        raise VersionMismatch(f"{path}: schema version {v}, this build reads {SCHEMA_VERSION}")


def _field(data: dict, key: str, path: str):
    if key not in data:
        raise ParseError(f"missing field {key!r}", path)
    return data[key]


# --- kernels --------------------------------------------------------------------

def encode_kernel_values(k: OperatorKernel) -> list:
    n = k.n_points
    return [[[encode_matrix(v[x, y]) for v in k.values] for y in range(n)] for x in range(n)]


def decode_kernel_values(obj, shape: AlgebraShape, m: int, path: str = "kernel") -> OperatorKernel:
    if not isinstance(obj, list) or not obj:
        raise ParseError("kernel must be a nonempty N x N array", path)
    n = len(obj)
    vals = [np.zeros((n, n, m * d, m * d), complex) for d in shape.component_dims]
    for x, row in enumerate(obj):
        if not isinstance(row, list) or len(row) != n:
            raise ParseError(f"row {x} does not have {n} entries", f"{path}[{x}]")
        for y, entry in enumerate(row):
            if not isinstance(entry, list) or len(entry) != shape.s:
                raise ParseError(f"expected {shape.s} component matrices", f"{path}[{x}][{y}]")
            for i, (mat, d) in enumerate(zip(entry, shape.component_dims)):
                vals[i][x, y] = decode_matrix(mat, f"{path}[{x}][{y}][{i}]", (m * d, m * d))
    return OperatorKernel(shape, m, tuple(vals))


def kernel_to_dict(k: OperatorKernel) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "kernel", "shape": list(k.shape.component_dims),
            "m": k.m, "points": k.n_points, "values": encode_kernel_values(k)}


def kernel_from_dict(data: dict, path: str = "kernel") -> OperatorKernel:
    check_version(data, path)
    shape = as_shape(_field(data, "shape", path))
    return decode_kernel_values(_field(data, "values", path), shape, int(data.get("m", 1)), f"{path}.values")


def save_kernel(k: OperatorKernel, path) -> None:
    Path(path).write_text(dumps(kernel_to_dict(k)))


def load_kernel(path) -> OperatorKernel:
    return kernel_from_dict(_read(path), str(path))


# --- linearisations --------------------------------------------------------------

def linearisation_to_dict(lin: Linearisation) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "linearisation",
        "shape": list(lin.shape.component_dims),
        "m": lin.m,
        "points": lin.n_points,
        "tol": lin.tol,
        "route": lin.route,
        "kernel_hash": lin.kernel_digest,
        "components": [{"dim": f.shape[0], "factor": encode_matrix(f)} for f in lin.factors],
    }


def linearisation_from_dict(data: dict, path: str = "linearisation") -> Linearisation:
    check_version(data, path)
    if data.get("kind", "linearisation") != "linearisation":
        raise ParseError(f"expected a linearisation, found {data.get('kind')!r}", path)
    shape = as_shape(_field(data, "shape", path))
    m = int(_field(data, "m", path))
    n_pts = int(_field(data, "points", path))
    comps = _field(data, "components", path)
    if len(comps) != shape.s:
        raise ParseError(f"expected {shape.s} components", f"{path}.components")
    factors = []
    for i, (c, n) in enumerate(zip(comps, shape.component_dims)):
        d = int(_field(c, "dim", f"{path}.components[{i}]"))
        factors.append(decode_matrix(c.get("factor", []), f"{path}.components[{i}].factor", (d, n_pts * m * n)))
    return Linearisation(shape, m, n_pts, tuple(factors), float(_field(data, "tol", path)),
                         data.get("kernel_hash", ""), data.get("route", "eig"))


def save_linearisation(lin: Linearisation, path) -> None:
    Path(path).write_text(dumps(linearisation_to_dict(lin)))


def load_linearisation(path) -> Linearisation:
    return linearisation_from_dict(_read(path), str(path))


# --- CP maps -------------------------------------------------------------------------

def cp_map_to_dict(phi: CPMap) -> dict:
    values = {}
    for s, (c, j, k) in enumerate(phi.domain.matrix_units()):
        values[f"{c},{j},{k}"] = [encode_matrix(v[s]) for v in phi.values]
    return {"domain_shape": list(phi.domain.component_dims), "codomain_shape": list(phi.codomain.component_dims),
            "m": phi.m, "values": values}


def cp_map_from_dict(data: dict, path: str = "cp_map") -> CPMap:
    domain = as_shape(_field(data, "domain_shape", path))
    codomain = as_shape(_field(data, "codomain_shape", path))
    m = int(data.get("m", 1))
    raw = _field(data, "values", path)
    vals = [np.zeros((domain.dim, m * a, m * a), complex) for a in codomain.component_dims]
    for s, (c, j, k) in enumerate(domain.matrix_units()):
        key = f"{c},{j},{k}"
        if key not in raw:
            continue  # absent matrix units map to zero
        entry = raw[key]
        if len(entry) != codomain.s:
            raise ParseError(f"expected {codomain.s} codomain blocks", f"{path}.values[{key}]")
        for i, (mat, a) in enumerate(zip(entry, codomain.component_dims)):
            vals[i][s] = decode_matrix(mat, f"{path}.values[{key}][{i}]", (m * a, m * a))
    extra = set(raw) - {f"{c},{j},{k}" for c, j, k in domain.matrix_units()}
    if extra:
        raise ParseError(f"unknown matrix units {sorted(extra)}", f"{path}.values")
    return CPMap(domain, codomain, m, tuple(vals))


# --- reports ---------------------------------------------------------------------------

def save_report(report: dict, path) -> None:
    Path(path).write_text(dumps(report))


def load_report(path) -> dict:
    data = _read(path)
    check_version(data, str(path))
    return data
