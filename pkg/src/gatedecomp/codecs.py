"""File formats: matrices, circuits, binary matrices, permutation tables.

All writers emit *canonical* JSON: fixed key order, compact separators, and
floats printed with 17 significant digits, so encode -> decode -> encode is
byte-identical.  Files are written atomically (temp file + rename).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .gateir import (
    Ancilla,
    Circuit,
    CnotGate,
    ControlledGate,
    GenericGate,
    Gate,
    LocalGate,
    Metrics,
    PartySpace,
    TwoLevelGate,
    cnot,
    controlled,
    generic,
    local,
    two_level,
)
from .matcore import as_matrix, is_unitary, max_abs
from .permdecomp import ComplexPermutation
from .protocols import BinaryMatrix

MATRIX_KINDS = ("unitary", "permutation", "complexPermutation", "binary")


class CodecError(ValueError):
    pass


# ---------------------------------------------------------------------------
# canonical JSON


def _format_float(x: float) -> str:
    s = "%.17g" % float(x)
    if "e" not in s and "E" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps_canonical(obj) -> str:
    out: list[str] = []
    _emit(obj, out)
    return "".join(out)


def _emit(obj, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise CodecError("non-finite values cannot be serialized")
        out.append(_format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _emit(v, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(k)))
            out.append(":")
            _emit(v, out)
        out.append("}")
    else:
        raise CodecError(f"cannot serialize {type(obj).__name__}")


def atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _loads(text: str, path: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CodecError(f"{path}: malformed JSON at byte {exc.pos}: {exc.msg}") from exc


# ---------------------------------------------------------------------------
# matrices


@dataclass(frozen=True, eq=False)
class MatrixFile:
    kind: str
    dims: tuple[int, ...]
    matrix: np.ndarray


def _matrix_to_obj(m: np.ndarray):
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def _obj_to_matrix(obj, path: str) -> np.ndarray:
    try:
        rows = [[complex(re, im) for re, im in row] for row in obj]
    except (TypeError, ValueError) as exc:
        raise CodecError(f"{path}: bad matrix payload: {exc}") from exc
    return np.array(rows, dtype=complex)


def validate_matrix_kind(m: np.ndarray, dims, kind: str) -> np.ndarray:
    """Check (and for permutations, snap) the matrix against its declared kind."""
    if kind not in MATRIX_KINDS:
        raise CodecError(f"unknown matrix kind {kind!r}")
    if kind == "binary":
        BinaryMatrix.from_array(m)
        return m
    if kind == "unitary":
        if not is_unitary(m, 1e-9):
            raise CodecError("matrix fails unitarity validation at 1e-9")
        return m
    if kind == "permutation":
        snapped = np.round(np.real(m))
        if max_abs(m - snapped) > 1e-12 or ((snapped != 0) & (snapped != 1)).any():
            raise CodecError("permutation file entries must be within 1e-12 of {0,1}")
        ComplexPermutation.from_matrix(snapped, dims)
        return snapped.astype(complex)
    ComplexPermutation.from_matrix(m, dims)
    return m


def save_matrix_file(path: str, m, dims, kind: str) -> None:
    m = as_matrix(m)
    m = validate_matrix_kind(m, dims, kind)
    obj = {"kind": kind, "dims": [int(d) for d in dims], "matrix": _matrix_to_obj(m)}
    atomic_write(path, dumps_canonical(obj))


def load_matrix_file(path: str) -> MatrixFile:
    with open(path, encoding="utf-8") as fh:
        obj = _loads(fh.read(), path)
    for key in ("kind", "dims", "matrix"):
        if key not in obj:
            raise CodecError(f"{path}: missing field {key!r}")
    dims = tuple(int(d) for d in obj["dims"])
    m = _obj_to_matrix(obj["matrix"], path)
    n = math.prod(dims)
    if m.shape != (n, n):
        raise CodecError(f"{path}: matrix is {m.shape}, dims imply {(n, n)}")
    m = validate_matrix_kind(m, dims, obj["kind"])
    return MatrixFile(obj["kind"], dims, m)


# ---------------------------------------------------------------------------
# binary matrices


def save_binary_file(path: str, b: BinaryMatrix) -> None:
    obj = {
        "rows": b.rows,
        "cols": b.cols,
        "bits": "".join(str(x) for x in b.bits),
    }
    atomic_write(path, dumps_canonical(obj))


def load_binary_file(path: str) -> BinaryMatrix:
    with open(path, encoding="utf-8") as fh:
        obj = _loads(fh.read(), path)
    if "bits" in obj:
        bits = tuple(int(c) for c in obj["bits"])
        return BinaryMatrix(int(obj["rows"]), int(obj["cols"]), bits)
    mf = load_matrix_file(path)
    if mf.kind != "binary":
        raise CodecError(f"{path}: not a binary matrix file")
    return BinaryMatrix.from_array(np.real(mf.matrix))


# ---------------------------------------------------------------------------
# permutation tables


def save_table_file(path: str, cp: ComplexPermutation) -> None:
    if len(cp.dims) != 2:
        raise CodecError("table files are bipartite")
    da, db = cp.dims
    rows = []
    for a in range(da):
        for b in range(db):
            t = cp.targets[a * db + b]
            rows.append([a, b, t // db, t % db])
    obj = {"dims": [da, db], "table": rows}
    atomic_write(path, dumps_canonical(obj))


def load_table_file(path: str) -> ComplexPermutation:
    with open(path, encoding="utf-8") as fh:
        obj = _loads(fh.read(), path)
    da, db = (int(d) for d in obj["dims"])
    targets = [-1] * (da * db)
    for ia, ib, oa, ob in obj["table"]:
        targets[ia * db + ib] = oa * db + ob
    return ComplexPermutation((da, db), tuple(targets), (1.0,) * (da * db))


# ---------------------------------------------------------------------------
# circuits


def _space_to_obj(space: PartySpace):
    return {
        "parties": [{"name": n, "dim": d} for n, d in space.parties],
        "ancillas": [
            {"name": a.name, "host": a.host, "dim": a.dim, "init": a.init}
            for a in space.ancillas
        ],
    }


def _space_from_obj(obj) -> PartySpace:
    return PartySpace(
        parties=tuple((p["name"], int(p["dim"])) for p in obj["parties"]),
        ancillas=tuple(
            Ancilla(a["name"], a["host"], int(a["dim"]), int(a["init"]))
            for a in obj.get("ancillas", [])
        ),
    )


def _gate_to_obj(g: Gate):
    if isinstance(g, ControlledGate):
        return {
            "kind": g.kind,
            "controls": list(g.controls),
            "targets": list(g.targets),
            "branches": [
                {"control": list(k), "matrix": _matrix_to_obj(m)} for k, m in g.branches
            ],
        }
    if isinstance(g, LocalGate):
        return {"kind": g.kind, "axes": list(g.axes), "matrix": _matrix_to_obj(g.matrix)}
    if isinstance(g, TwoLevelGate):
        return {
            "kind": g.kind,
            "axis_a": g.axis_a,
            "pair_a": list(g.pair_a),
            "axis_b": g.axis_b,
            "pair_b": list(g.pair_b),
            "matrix": _matrix_to_obj(g.matrix),
        }
    if isinstance(g, CnotGate):
        return {
            "kind": g.kind,
            "control_axis": g.control_axis,
            "control_pair": list(g.control_pair),
            "target_axis": g.target_axis,
            "target_pair": list(g.target_pair),
        }
    if isinstance(g, GenericGate):
        return {
            "kind": g.kind,
            "axes": list(g.axes),
            "cut": g.cut,
            "matrix": _matrix_to_obj(g.matrix),
        }
    raise CodecError(f"cannot serialize gate {type(g).__name__}")


def _gate_from_obj(obj, path: str) -> Gate:
    kind = obj.get("kind")
    if kind == "ControlledComputational":
        return controlled(
            tuple(obj["controls"]),
            tuple(obj["targets"]),
            {
                tuple(br["control"]): _obj_to_matrix(br["matrix"], path)
                for br in obj["branches"]
            },
        )
    if kind == "Local":
        return local(tuple(obj["axes"]), _obj_to_matrix(obj["matrix"], path))
    if kind == "TwoLevelStandard":
        return two_level(
            int(obj["axis_a"]),
            tuple(obj["pair_a"]),
            int(obj["axis_b"]),
            tuple(obj["pair_b"]),
            _obj_to_matrix(obj["matrix"], path),
        )
    if kind == "CNOT":
        return cnot(
            int(obj["control_axis"]),
            tuple(obj["control_pair"]),
            int(obj["target_axis"]),
            tuple(obj["target_pair"]),
        )
    if kind == "GenericBipartite":
        return generic(
            tuple(obj["axes"]), _obj_to_matrix(obj["matrix"], path), int(obj["cut"])
        )
    raise CodecError(f"{path}: unknown gate kind {kind!r}")


def circuit_to_obj(c: Circuit):
    # gate order note: gates[0] is the leftmost product factor (applied last)
    met = {
        "gate_counts": {k: v for k, v in c.metrics.gate_counts},
        "nonlocal_cnot": c.metrics.nonlocal_cnot,
        "ebit_estimate": c.metrics.ebit_estimate,
    }
    return {
        "space": _space_to_obj(c.space),
        "gate_order": "product",
        "gates": [_gate_to_obj(g) for g in c.gates],
        "metrics": met,
    }


def save_circuit_file(path: str, c: Circuit) -> None:
    atomic_write(path, dumps_canonical(circuit_to_obj(c)))


def load_circuit_file(path: str) -> Circuit:
    with open(path, encoding="utf-8") as fh:
        obj = _loads(fh.read(), path)
    space = _space_from_obj(obj["space"])
    gates = tuple(_gate_from_obj(g, path) for g in obj["gates"])
    met_obj = obj.get("metrics") or {}
    ebit = met_obj.get("ebit_estimate")
    counts = tuple((k, int(v)) for k, v in met_obj.get("gate_counts", {}).items())
    metrics = Metrics(counts, int(met_obj.get("nonlocal_cnot", 0)), ebit)
    return Circuit(space, gates, metrics)
