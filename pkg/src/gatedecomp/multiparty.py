"""Generalized sandwich forms for n-party unitaries.

Every emitted gate is controlled in the computational basis from n-1 fixed
parties.  The n-party recursion cuts party 1 from the rest; the dedicated
4-party routine cuts AB from CD, which wins in some dimension regimes.  Gate
counts are bounded by the closed-form products evaluated by
``multiparty_bound`` and ``fourparty_bound``; identity stripping happens only
after bound accounting so the reported counts stay conservative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gateir import Circuit, ControlledGate, controlled, multiparty_space
from .matcore import PreconditionError, is_unitary, max_abs, require_square
from .sandwich import IDENTITY_TOL, _sandwich_gates


def multiparty_bound(dims) -> int:
    """Gate bound 2 * prod_{j<n} (2 d_j - 2) - 1 over the first n-1 parties."""
    dims = tuple(dims)
    prod = 1
    for d in dims[:-1]:
        prod *= 2 * d - 2
    return 2 * prod - 1


def fourparty_bound(da: int, db: int, dc: int, dd: int) -> int:
    """Gate bound 4 (dA dB - 1)(2 dA + 2 dC - 5) - 4 dA + 5 for the AB|CD cut."""
    return 4 * (da * db - 1) * (2 * da + 2 * dc - 5) - 4 * da + 5


@dataclass(frozen=True, eq=False)
class MultipartiteSandwichResult:
    """Circuit of (n-1)-controlled gates with its declared bound.

    ``patterns`` records each kept gate's controlling axis set;
    ``full_count`` is the gate count before identity stripping, which is what
    the bound certifies.
    """

    circuit: Circuit
    bound: int
    patterns: tuple[tuple[int, ...], ...]
    full_count: int


def _multi_gates(u: np.ndarray, dims: tuple[int, ...]):
    """(controls, target, branch-dict) triples in product order; fixed schedule."""
    n = len(dims)
    if n == 1:
        return [((), 0, {(): u})]
    d0 = dims[0]
    rest = math.prod(dims[1:])
    out = []
    for pos, g in enumerate(_sandwich_gates(u, d0, rest)):
        if pos % 2 == 0:
            subs = [_multi_gates(branch, dims[1:]) for branch in g.branches]
            for i in range(len(subs[0])):
                ctrl_rel, tgt_rel, _ = subs[0][i]
                controls = (0,) + tuple(c + 1 for c in ctrl_rel)
                target = tgt_rel + 1
                branches = {}
                for k in range(d0):
                    c_i, t_i, table_i = subs[k][i]
                    if (c_i, t_i) != (ctrl_rel, tgt_rel):
                        raise AssertionError("branch schedules diverged")
                    for key, mat in table_i.items():
                        branches[(k,) + key] = mat
                out.append((controls, target, branches))
        else:
            branches = {}
            for b, mat in enumerate(g.branches):
                key = tuple(int(x) for x in np.unravel_index(b, dims[1:]))
                branches[key] = mat
            out.append((tuple(range(1, n)), 0, branches))
    return out


def _is_identity_branches(branches: dict) -> bool:
    return all(max_abs(m - np.eye(m.shape[0])) <= IDENTITY_TOL for m in branches.values())


def _finalize(gates_spec, dims, bound: int) -> MultipartiteSandwichResult:
    records: list[ControlledGate] = []
    patterns: list[tuple[int, ...]] = []
    for controls, target, branches in gates_spec:
        if _is_identity_branches(branches):
            continue
        records.append(controlled(controls, (target,), branches))
        patterns.append(tuple(controls))
    if not records:
        n = len(dims)
        ident = {
            key: np.eye(dims[-1], dtype=complex)
            for key in np.ndindex(*dims[:-1])
        }
        records.append(controlled(tuple(range(n - 1)), (n - 1,), ident))
        patterns.append(tuple(range(n - 1)))
    circuit = Circuit(multiparty_space(dims), tuple(records))
    return MultipartiteSandwichResult(circuit, bound, tuple(patterns), len(gates_spec))


def decompose_multiparty(u, dims) -> MultipartiteSandwichResult:
    """Generalized sandwich form over the party-1-first recursion."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise PreconditionError("need at least two parties")
    if any(d < 2 for d in dims):
        raise PreconditionError("party dimensions must be >= 2")
    u = require_square(u)
    if u.shape[0] != math.prod(dims):
        raise ValueError(f"matrix is {u.shape}, expected dim {math.prod(dims)}")
    if not is_unitary(u, 1e-8):
        raise PreconditionError("input is not unitary")
    spec = _multi_gates(u, dims)
    bound = multiparty_bound(dims)
    if len(spec) > bound:
        raise AssertionError(f"schedule length {len(spec)} exceeds bound {bound}")
    return _finalize(spec, dims, bound)


def decompose_4party(u, dims) -> MultipartiteSandwichResult:
    """Generalized sandwich form for four parties via the AB|CD cut."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 4:
        raise PreconditionError("expected exactly four parties")
    if any(d < 2 for d in dims):
        raise PreconditionError("party dimensions must be >= 2")
    da, db, dc, dd = dims
    u = require_square(u)
    if u.shape[0] != math.prod(dims):
        raise ValueError(f"matrix is {u.shape}, expected dim {math.prod(dims)}")
    if not is_unitary(u, 1e-8):
        raise PreconditionError("input is not unitary")

    spec = []
    for pos, g in enumerate(_sandwich_gates(u, da * db, dc * dd)):
        if pos % 2 == 0:
            # controlled from the AB pair; re-decompose every CD branch
            subs = [_sandwich_gates(branch, dc, dd) for branch in g.branches]
            for i in range(len(subs[0])):
                branches = {}
                for k in range(da * db):
                    ka, kb = divmod(k, db)
                    sub = subs[k][i]
                    for v, mat in enumerate(sub.branches):
                        branches[(ka, kb, v)] = mat
                if i % 2 == 0:
                    spec.append(((0, 1, 2), 3, branches))
                else:
                    spec.append(((0, 1, 3), 2, branches))
        else:
            subs = [_sandwich_gates(branch, da, db) for branch in g.branches]
            for i in range(len(subs[0])):
                branches = {}
                for k in range(dc * dd):
                    kc, kd = divmod(k, dd)
                    sub = subs[k][i]
                    for v, mat in enumerate(sub.branches):
                        branches[(v, kc, kd)] = mat
                if i % 2 == 0:
                    spec.append(((0, 2, 3), 1, branches))
                else:
                    spec.append(((1, 2, 3), 0, branches))
    bound = fourparty_bound(da, db, dc, dd)
    if len(spec) > bound:
        raise AssertionError(f"schedule length {len(spec)} exceeds bound {bound}")
    return _finalize(spec, dims, bound)
