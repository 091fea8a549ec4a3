"""Ancilla-assisted CNOT protocols and the binary/XOR/nonnegative rank toolkit.

The permutation protocol tracks the dA x dB index table plus a flag qubit c
on the B side that addresses a backup copy of the table: each expansion term
moves its input rectangle to the backup at the target columns, permutes it
into the target rows, and restores the displaced partial rectangle.  Terms
whose rectangles are in place skip the backup entirely.  Every emitted
nonlocal gate is a two-term controlled permutation, so it costs two bipartite
CNOTs via the flag-ancilla construction (one qubit per side).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gateir import (
    Ancilla,
    Circuit,
    ControlledGate,
    PartySpace,
    cnot,
    controlled,
    generic,
)
from .matcore import PreconditionError, as_matrix, is_unitary, max_abs, require_square
from .schmidt import operator_schmidt


# ---------------------------------------------------------------------------
# partial-permutation expansions


def _check_partial_permutation(u) -> np.ndarray:
    a = as_matrix(u)
    b = np.real(a)
    if max_abs(a - np.round(b)) > 1e-12:
        raise PreconditionError("entries must be 0/1")
    b = np.round(b).astype(np.int64)
    if ((b != 0) & (b != 1)).any():
        raise PreconditionError("entries must be 0/1")
    if (b.sum(axis=0) > 1).any() or (b.sum(axis=1) > 1).any():
        raise PreconditionError("more than one nonzero in a row or column")
    return b


@dataclass(frozen=True, eq=False)
class PartialPermExpansion:
    """Exact expansion U = sum_j A_j (x) B_j into partial-permutation factors."""

    terms: tuple[tuple[np.ndarray, np.ndarray], ...]
    q: int
    bound_components: tuple[int, int, int, int, int]  # dA^2, dB^2, dA*r, dB*r, 2^r
    schmidt_rank: int

    def reconstruct(self) -> np.ndarray:
        da = self.terms[0][0].shape[0]
        db = self.terms[0][1].shape[0]
        out = np.zeros((da * db, da * db), dtype=np.int64)
        for a, b in self.terms:
            out += np.kron(a, b)
        return out


def _group_blocks(b: np.ndarray, da: int, db: int):
    """Distinct-nonzero-block grouping along the B side: terms (A_S, D_l)."""
    groups: dict[bytes, tuple[np.ndarray, list]] = {}
    order: list[bytes] = []
    for j in range(da):
        for k in range(da):
            blk = b[j * db : (j + 1) * db, k * db : (k + 1) * db]
            if not blk.any():
                continue
            key = blk.tobytes()
            if key not in groups:
                groups[key] = (blk, [])
                order.append(key)
            groups[key][1].append((j, k))
    terms = []
    for key in order:
        blk, cells = groups[key]
        a = np.zeros((da, da), dtype=np.int64)
        for j, k in cells:
            a[j, k] = 1
        terms.append((a, blk.copy()))
    return terms


def pp_expansion(u, da: int, db: int) -> PartialPermExpansion:
    """Group equal blocks of a (partial) permutation into an exact expansion.

    Both the B-side and the A-side block groupings are computed and the one
    with fewer terms is returned, so q never exceeds
    min(dA^2, dB^2, dA*r, dB*r, 2^r) with r the Schmidt rank.
    """
    b = _check_partial_permutation(u)
    if b.shape != (da * db, da * db):
        raise ValueError(f"matrix is {b.shape}, expected {(da * db, da * db)}")
    terms_b = _group_blocks(b, da, db)
    # transposed grouping: distinct dA x dA blocks indexed by B coordinates
    swapped = (
        b.reshape(da, db, da, db).transpose(1, 0, 3, 2).reshape(da * db, da * db)
    )
    terms_a_swapped = _group_blocks(swapped, db, da)
    terms_a = [(blk, a) for a, blk in terms_a_swapped]
    terms = terms_b if len(terms_b) <= len(terms_a) else terms_a
    r = operator_schmidt(b.astype(complex), da, db).rank
    comps = (da * da, db * db, da * r, db * r, 2**r if r < 60 else 2**60)
    return PartialPermExpansion(tuple(terms), len(terms), comps, r)


# ---------------------------------------------------------------------------
# two-term controlled gates via one flag qubit per side


def _check_projector_pair(p1, p2, eps=1e-9):
    p1 = require_square(p1)
    p2 = require_square(p2)
    d = p1.shape[0]
    for p in (p1, p2):
        if max_abs(p @ p - p) > eps or max_abs(p - p.conj().T) > eps:
            raise PreconditionError("branch selectors must be orthogonal projectors")
    if max_abs(p1 + p2 - np.eye(d)) > eps:
        raise PreconditionError("projectors must sum to the identity")
    if max_abs(p1 @ p2) > eps:
        raise PreconditionError("projectors must be orthogonal")
    r1 = int(round(np.real(np.trace(p1))))
    r2 = int(round(np.real(np.trace(p2))))
    if r1 == 0 or r2 == 0:
        raise PreconditionError("both projectors must be nonzero (two-term gate)")
    return p1, p2


def emit_two_term_cnot(p1, v1, p2, v2) -> Circuit:
    """Implement P1 (x) V1 + P2 (x) V2 with one flag qubit per side and 2 CNOTs.

    The sequence is V_Aa, CNOT_ab, W_bB, CNOT_ab, V_Aa: the A-side flag a
    marks which projector fired, the CNOT copies it to the B-side flag b,
    which selects V1 or V2; both flags are erased afterwards.
    """
    p1, p2 = _check_projector_pair(p1, p2)
    v1 = require_square(v1)
    v2 = require_square(v2)
    da = p1.shape[0]
    db = v1.shape[0]
    if v2.shape[0] != db:
        raise ValueError("branch unitaries must act on the same space")
    for v in (v1, v2):
        if not is_unitary(v):
            raise PreconditionError("branch operators must be unitary")
    space = PartySpace(
        parties=(("A", da), ("B", db)),
        ancillas=(Ancilla("a", "A", 2, 0), Ancilla("b", "B", 2, 0)),
    )
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    v_flag = generic((0, 2), np.kron(p1, np.eye(2)) + np.kron(p2, x), cut=1)
    copy = cnot(2, (0, 1), 3, (0, 1))
    w_gate = controlled((3,), (1,), {(0,): v1, (1,): v2})
    gates = (v_flag, copy, w_gate, copy, v_flag)
    return Circuit(space, gates).with_ebit_estimate(1.0)


# ---------------------------------------------------------------------------
# the backup-copy permutation protocol


def _chain_closure(mapping: dict[int, int], n: int) -> np.ndarray:
    """Close a partial injection into a full permutation, chain by chain.

    Open chains a1 -> a2 -> ... -> am are closed with am -> a1; untouched
    indices stay fixed.  Deterministic: chain heads and cycles are visited in
    increasing order of their smallest element.
    """
    perm = np.arange(n)
    ins = set(mapping)
    outs = set(mapping.values())
    visited: set[int] = set()
    for head in sorted(ins - outs):
        x = head
        while x in mapping:
            perm[x] = mapping[x]
            visited.add(x)
            x = mapping[x]
        perm[x] = head
    for s in sorted(ins):
        if s in visited:
            continue
        x = s
        while True:
            perm[x] = mapping[x]
            visited.add(x)
            x = mapping[x]
            if x == s:
                break
    return perm


def _pp_support(m: np.ndarray):
    """(ins, outs, mapping in->out) of a partial permutation matrix."""
    outs_idx, ins_idx = np.nonzero(m)
    mapping = {int(i): int(o) for o, i in zip(outs_idx, ins_idx)}
    return set(mapping), set(mapping.values()), mapping


def _perm_matrix(perm: np.ndarray) -> np.ndarray:
    m = np.zeros((perm.size, perm.size), dtype=complex)
    m[perm, np.arange(perm.size)] = 1.0
    return m


@dataclass(frozen=True, eq=False)
class BackupProtocolResult:
    """Backup-copy protocol circuits for a bipartite permutation.

    ``base`` acts on (A, B, c) with at most 3q two-term controlled-permutation
    gates; ``expanded`` additionally carries the flag qubits a, b and realizes
    every two-term gate with 2 bipartite CNOTs (at most 6q in total).
    """

    base: Circuit
    expanded: Circuit
    two_term_count: int
    cnot_count: int


def _term_gates(a_mat: np.ndarray, b_mat: np.ndarray, da: int, db: int, use_backup: bool):
    """Application-order gates for one expansion term, on axes (A=0, (B,c)=(1,2)).

    Branch matrices are over the (B, c) pair, row-major (b-major, c-minor).
    """
    ins_a, outs_a, map_a = _pp_support(a_mat)
    ins_b, outs_b, map_b = _pp_support(b_mat)
    dbc = 2 * db
    eye_bc = np.eye(dbc, dtype=complex)
    eye_a = np.eye(da, dtype=complex)
    gates = []

    def a_controlled(active: set, branch: np.ndarray):
        return controlled(
            (0,), (1, 2), {(a,): (branch if a in active else eye_bc) for a in range(da)}
        )

    def bc_controlled(active_pairs: set, branch: np.ndarray):
        return controlled(
            (1, 2),
            (0,),
            {
                (b, c): (branch if (b, c) in active_pairs else eye_a)
                for b in range(db)
                for c in range(2)
            },
        )

    pi = _chain_closure(map_a, da)
    pi_mat = _perm_matrix(pi)
    in_place = (ins_a == outs_a) and (ins_b == outs_b)

    if in_place and not use_backup:
        btil = _chain_closure(map_b, db)
        if (btil != np.arange(db)).any():
            # column permutation within the rectangle rows, on the c=0 copy
            s = np.zeros((dbc, dbc), dtype=complex)
            for b in range(db):
                s[2 * btil[b], 2 * b] = 1.0
                s[2 * b + 1, 2 * b + 1] = 1.0
            gates.append(a_controlled(ins_a, s))
        if (pi != np.arange(da)).any():
            gates.append(bc_controlled({(b, 0) for b in ins_b}, pi_mat))
        return gates

    # move the rectangle to the backup copy at the target columns
    s = eye_bc.copy()
    for b in ins_b:
        s[:, 2 * b] = 0.0
        s[:, 2 * map_b[b] + 1] = 0.0
        s[2 * map_b[b] + 1, 2 * b] = 1.0
        s[2 * b, 2 * map_b[b] + 1] = 1.0
    gates.append(a_controlled(ins_a, s))
    # permute into the target rows inside the backup copy
    if (pi != np.arange(da)).any():
        gates.append(bc_controlled({(b, 1) for b in outs_b}, pi_mat))
    # restore the displaced partial rectangle
    if ins_a != outs_a:
        gates.append(a_controlled(ins_a - outs_a, s))
    return gates


def emit_backup_protocol(u, expansion: PartialPermExpansion, da: int, db: int) -> BackupProtocolResult:
    """Implement a bipartite permutation from its partial-permutation expansion.

    Emits at most 3q two-term controlled-permutation gates on (A, B, c); the
    expanded circuit realizes each with two bipartite CNOTs through the flag
    qubits a and b, and the final flip of c is folded into the last A-side
    gate.  Exact reconstruction; the ebit estimate equals the two-term count.
    """
    b = _check_partial_permutation(u)
    if b.shape != (da * db, da * db):
        raise ValueError(f"matrix is {b.shape}, expected {(da * db, da * db)}")
    if (b.sum(axis=0) != 1).any() or (b.sum(axis=1) != 1).any():
        raise PreconditionError("protocol input must be a full permutation")
    if max_abs(expansion.reconstruct() - b) != 0.0:
        raise PreconditionError("expansion does not reproduce the permutation")

    terms = expansion.terms
    in_place_flags = []
    for a_mat, b_mat in terms:
        ia, oa, _ = _pp_support(a_mat)
        ib, ob, _ = _pp_support(b_mat)
        in_place_flags.append(ia == oa and ib == ob)
    use_backup = not all(in_place_flags)

    app_gates: list[ControlledGate] = []
    for a_mat, b_mat in terms:
        app_gates.extend(_term_gates(a_mat, b_mat, da, db, use_backup))

    prod_gates = list(reversed(app_gates))
    if use_backup:
        prod_gates = _absorb_final_flip(prod_gates, da, db)

    space = PartySpace(
        parties=(("A", da), ("B", db)),
        ancillas=(Ancilla("c", "B", 2, 0),),
    )
    expanded, n_two_term = _expand_two_term_gates(prod_gates, da, db)
    base = Circuit(space, tuple(prod_gates)).with_ebit_estimate(float(n_two_term))
    return BackupProtocolResult(base, expanded, n_two_term, 2 * n_two_term)


def _absorb_final_flip(prod_gates: list, da: int, db: int) -> list:
    """Fold the trailing X on the flag qubit c into the last A-controlled gate.

    Walking the product-order list, X_c commutes through (B,c)-controlled
    gates by relabeling their branches and multiplies into the first
    A-controlled gate encountered.
    """
    xc = np.zeros((2 * db, 2 * db), dtype=complex)
    for bb in range(db):
        xc[2 * bb, 2 * bb + 1] = 1.0
        xc[2 * bb + 1, 2 * bb] = 1.0
    out = list(prod_gates)
    for i, g in enumerate(out):
        if g.controls == (0,):
            out[i] = controlled((0,), (1, 2), {k: xc @ m for k, m in g.branches})
            return out
        if g.controls == (1, 2):
            out[i] = controlled(
                (1, 2), (0,), {(b, 1 - c): mat for (b, c), mat in g.branches}
            )
            continue
        raise AssertionError("unexpected gate kind in protocol")
    raise AssertionError("no A-controlled gate to absorb the flag flip")


def _two_term_split(g: ControlledGate):
    """Split a two-valued controlled gate into (value1, value2, active-set)."""
    items = list(g.branches)
    base_val = items[0][1]
    active = []
    other_val = None
    for key, mat in items:
        if np.array_equal(mat, base_val):
            continue
        if other_val is None:
            other_val = mat
        elif not np.array_equal(mat, other_val):
            raise PreconditionError("gate has more than two distinct branches")
        active.append(key)
    return base_val, other_val, active


def _expand_two_term_gates(prod_gates, da: int, db: int) -> Circuit:
    """Replace each two-term gate with the 2-CNOT flag construction.

    Expanded axis order: A=0, B=1, a=2, b=3, c=4; the base gates' (B, c)
    targets move to axes (1, 4).
    """
    space = PartySpace(
        parties=(("A", da), ("B", db)),
        ancillas=(Ancilla("a", "A", 2, 0), Ancilla("b", "B", 2, 0), Ancilla("c", "B", 2, 0)),
    )
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    eye2 = np.eye(2, dtype=complex)
    out = []
    n_two_term = 0
    for g in prod_gates:
        v1, v2, active = _two_term_split(g)
        if v2 is None:
            # single-valued gate: apply directly (local to one side)
            if g.controls == (0,):
                out.append(controlled((0,), (1, 4), {k: v1 for k, _ in g.branches}))
            else:
                out.append(controlled((1, 4), (0,), {k: v1 for k, _ in g.branches}))
            continue
        n_two_term += 1
        active_set = set(active)
        if g.controls == (0,):
            flag = controlled(
                (0,), (2,), {(a,): (x if (a,) in active_set else eye2) for a in range(da)}
            )
            copy = cnot(2, (0, 1), 3, (0, 1))
            apply_gate = controlled((3,), (1, 4), {(0,): v1, (1,): v2})
        else:
            flag = controlled(
                (1, 4),
                (3,),
                {
                    (b, c): (x if (b, c) in active_set else eye2)
                    for b in range(db)
                    for c in range(2)
                },
            )
            copy = cnot(3, (0, 1), 2, (0, 1))
            apply_gate = controlled((2,), (0,), {(0,): v1, (1,): v2})
        # palindrome: flag, copy, apply, copy, flag (product order = app order)
        out.extend([flag, copy, apply_gate, copy, flag])
    circuit = Circuit(space, tuple(out)).with_ebit_estimate(float(n_two_term))
    return circuit, n_two_term


# ---------------------------------------------------------------------------
# state-transfer protocol


@dataclass(frozen=True, eq=False)
class TransferResult:
    """Transfer-based implementation with 4*ceil(log2 min(dA,dB)) CNOTs.

    The smaller party is embedded into ``qubits`` two-level axes (the target
    unitary is padded by identity on the embedding complement and exposed as
    ``embedded`` with ``embedded_dims``); each qubit is moved to a fresh flag
    ancilla at the other party with two CNOTs, the padded unitary is applied
    as a single gate local to that party, and the transfer is inverted.
    """

    circuit: Circuit
    embedded: np.ndarray
    embedded_dims: tuple[int, ...]
    qubits: int
    transferred_side: str


def emit_transfer_protocol(u, da: int, db: int) -> TransferResult:
    u = require_square(u)
    if u.shape[0] != da * db:
        raise ValueError(f"matrix is {u.shape}, expected {(da * db, da * db)}")
    if not is_unitary(u, 1e-8):
        raise PreconditionError("input is not unitary")
    side = "A" if da <= db else "B"
    small = min(da, db)
    m = max(0, (small - 1).bit_length())
    dpad = 2**m

    if side == "A":
        dims = (2,) * m + (db,)
        total = dpad * db
        padded = np.eye(total, dtype=complex)
        padded[: da * db, : da * db] = u
        parties = tuple((f"A{i}", 2) for i in range(m)) + (("B", db),)
        host = "B"
        qubit_axes = list(range(m))
        local_axes = (m,) + tuple(m + 1 + i for i in range(m))
        # reorder the padded matrix onto axes (B, t_0..t_{m-1})
        order = [m] + list(range(m))
    else:
        dims = (da,) + (2,) * m
        total = da * dpad
        padded = np.eye(total, dtype=complex)
        rows = np.array([a * dpad + b for a in range(da) for b in range(db)])
        padded[np.ix_(rows, rows)] = u
        parties = (("A", da),) + tuple((f"B{i}", 2) for i in range(m))
        host = "A"
        qubit_axes = list(range(1, m + 1))
        local_axes = (0,) + tuple(m + 1 + i for i in range(m))
        order = [0] + list(range(1, m + 1))

    ancillas = tuple(Ancilla(f"t{i}", host, 2, 0) for i in range(m))
    space = PartySpace(parties=parties, ancillas=ancillas)

    if order != sorted(order):
        k = len(order)
        padded_local = (
            padded.reshape(dims + dims)
            .transpose(order + [o + k for o in order])
            .reshape(total, total)
        )
    else:
        padded_local = padded

    app = []
    for i, qa in enumerate(qubit_axes):
        ta = m + 1 + i
        app.append(cnot(qa, (0, 1), ta, (0, 1)))
        app.append(cnot(ta, (0, 1), qa, (0, 1)))
    app.append(generic(tuple(sorted(local_axes)), padded_local, cut=1))
    for i in reversed(range(m)):
        qa = qubit_axes[i]
        ta = m + 1 + i
        app.append(cnot(ta, (0, 1), qa, (0, 1)))
        app.append(cnot(qa, (0, 1), ta, (0, 1)))
    circuit = Circuit(space, tuple(reversed(app)))
    return TransferResult(circuit, padded, dims, m, side)


# ---------------------------------------------------------------------------
# rank toolkit


@dataclass(frozen=True)
class BinaryMatrix:
    rows: int
    cols: int
    bits: tuple[int, ...]  # row-major 0/1

    def __post_init__(self):
        if len(self.bits) != self.rows * self.cols:
            raise ValueError("bit count does not match shape")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("entries must be 0 or 1")

    def array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.int64).reshape(self.rows, self.cols)

    @classmethod
    def from_array(cls, a) -> "BinaryMatrix":
        arr = np.asarray(a)
        if arr.ndim != 2:
            raise ValueError("expected a matrix")
        ints = np.round(np.real(arr)).astype(np.int64)
        if max_abs(arr - ints) > 1e-12 or ((ints != 0) & (ints != 1)).any():
            raise ValueError("entries must be 0 or 1")
        return cls(arr.shape[0], arr.shape[1], tuple(int(x) for x in ints.reshape(-1)))


@dataclass(frozen=True, eq=False)
class RankReport:
    """Rank value or certified interval, with a re-verifiable certificate."""

    kind: str
    lower: int
    upper: int
    certificate: tuple

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    @property
    def value(self) -> int | None:
        return self.lower if self.exact else None


class _SearchBudget(Exception):
    pass


def _xor_factor(t: np.ndarray):
    """Peel rank-one binary terms whose mod-2 sum is t; len == GF(2) rank."""
    work = t.copy() % 2
    terms = []
    while work.any():
        i, j = np.argwhere(work)[0]
        u = work[:, j].copy()
        v = work[i, :].copy()
        terms.append((u, v))
        work ^= np.outer(u, v)
    return terms


def _greedy_partition(t: np.ndarray):
    """Disjoint all-ones rectangles summing to t; deterministic closure growth."""
    work = t.copy()
    rects = []
    while work.any():
        r0, c0 = np.argwhere(work)[0]
        cols = np.flatnonzero(work[r0])
        rows = np.flatnonzero((work[:, cols] == 1).all(axis=1))
        cols = np.flatnonzero((work[np.ix_(rows, range(t.shape[1]))] == 1).all(axis=0))
        rows = np.flatnonzero((work[:, cols] == 1).all(axis=1))
        rects.append((tuple(int(r) for r in rows), tuple(int(c) for c in cols)))
        work[np.ix_(rows, cols)] = 0
    return rects


def _distinct_row_partition(t: np.ndarray):
    groups: dict[bytes, list[int]] = {}
    for r in range(t.shape[0]):
        if t[r].any():
            groups.setdefault(t[r].tobytes(), []).append(r)
    rects = []
    for key, rows in groups.items():
        cols = tuple(int(c) for c in np.flatnonzero(t[rows[0]]))
        rects.append((tuple(rows), cols))
    return rects


def _fooling_bound(t: np.ndarray) -> int:
    """Greedy set of pairwise rectangle-incompatible 1-cells (a lower bound)."""
    cells = [tuple(x) for x in np.argwhere(t)]
    chosen: list[tuple[int, int]] = []
    for (r, c) in cells:
        if all(not (t[r2, c] and t[r, c2]) for (r2, c2) in chosen):
            chosen.append((r, c))
    return len(chosen)


def _max_rect_area(t: np.ndarray) -> int:
    """Largest all-ones combinatorial rectangle, via column-subset closures."""
    rows, cols = t.shape
    if cols > rows:
        return _max_rect_area(t.T)
    best = 1
    row_masks = [int("".join(map(str, t[r][::-1])), 2) if t[r].any() else 0 for r in range(rows)]
    seen = set()
    for r in range(rows):
        mask = row_masks[r]
        if not mask or mask in seen:
            continue
        seen.add(mask)
        covering = [m for m in row_masks if m & mask == mask]
        best = max(best, len(covering) * bin(mask).count("1"))
    return best


def _binary_partition_exact(t: np.ndarray, node_budget: int):
    """Branch-and-bound minimum disjoint rectangle partition; None on budget."""
    rows, cols = t.shape
    cell_bit = {(r, c): 1 << (r * cols + c) for r in range(rows) for c in range(cols)}
    full = 0
    for r, c in np.argwhere(t):
        full |= cell_bit[(int(r), int(c))]
    if full == 0:
        return 0, ()
    amax = _max_rect_area(t)
    memo: dict[int, int] = {}
    choice: dict[int, tuple] = {}
    nodes = 0

    def popcount(x: int) -> int:
        return bin(x).count("1")

    def solve(mask: int, limit: int) -> int:
        """Exact minimum partition size of mask, or limit if >= limit."""
        nonlocal nodes
        if mask == 0:
            return 0
        if mask in memo:
            return memo[mask]
        nodes += 1
        if nodes > node_budget:
            raise _SearchBudget
        if 1 + (popcount(mask) - 1) // amax > limit:
            return limit
        pos = (mask & -mask).bit_length() - 1
        r0, c0 = divmod(pos, cols)
        avail_cols = [c for c in range(cols) if c != c0 and (mask >> (r0 * cols + c)) & 1]
        best = limit
        best_rect = None
        for csub_bits in range(1 << len(avail_cols)):
            csub = [c0] + [avail_cols[i] for i in range(len(avail_cols)) if (csub_bits >> i) & 1]
            col_ok_rows = [
                r
                for r in range(rows)
                if r != r0 and all((mask >> (r * cols + c)) & 1 for c in csub)
            ]
            for rsub_bits in range(1 << len(col_ok_rows)):
                rsub = [r0] + [
                    col_ok_rows[i] for i in range(len(col_ok_rows)) if (rsub_bits >> i) & 1
                ]
                rect = 0
                for r in rsub:
                    for c in csub:
                        rect |= cell_bit[(r, c)]
                rest = mask & ~rect
                lb = 1 + (popcount(rest) + amax - 1) // amax if rest else 1
                if lb >= best:
                    continue
                sub = solve(rest, best - 1)
                if 1 + sub < best:
                    best = 1 + sub
                    best_rect = (tuple(sorted(rsub)), tuple(sorted(csub)))
        if best < limit:
            memo[mask] = best
            if best_rect is not None:
                choice[mask] = best_rect
        return best

    try:
        value = solve(full, popcount(full) + 1)
    except _SearchBudget:
        return None
    rects = []
    mask = full
    while mask:
        rect = choice[mask]
        rects.append(rect)
        for r in rect[0]:
            for c in rect[1]:
                mask &= ~cell_bit[(r, c)]
    return value, tuple(rects)


def _numerical_rank(t: np.ndarray) -> int:
    s = np.linalg.svd(np.asarray(t, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > 1e-9 * s[0]))


BINARY_EXACT_MAX_DIM = 12
BINARY_NODE_BUDGET = 300_000


def rank_toolkit(t, kind: str, node_budget: int = BINARY_NODE_BUDGET) -> RankReport:
    """Rank analysis of a binary (or nonnegative) matrix.

    kinds:
      rank    numerical rank (relative threshold 1e-9); certificate: SVD terms
      xor     rank over GF(2), exact; certificate: peeled rank-1 binary terms
      binary  minimum disjoint all-ones rectangle partition; exact via
              branch-and-bound when min(rows, cols) <= 12 within the node
              budget, otherwise a certified interval
      nonneg  interval [rank, constructive upper]; exact only when it collapses
    """
    if isinstance(t, BinaryMatrix):
        arr = t.array()
    else:
        arr = np.asarray(t)
    if kind in ("xor", "binary"):
        arr = BinaryMatrix.from_array(arr).array()
    if kind == "rank":
        a = np.asarray(arr)
        if np.iscomplexobj(a):
            if max_abs(a.imag) > 1e-12:
                raise ValueError("rank toolkit expects real nonnegative input")
            a = a.real
        a = np.asarray(a, dtype=float)
        if (a < -1e-12).any():
            raise ValueError("rank toolkit expects nonnegative input")
        r = _numerical_rank(a)
        u, s, vh = np.linalg.svd(a)
        cert = tuple((s[i] * u[:, i], vh[i]) for i in range(r))
        return RankReport("rank", r, r, cert)
    if kind == "xor":
        terms = _xor_factor(arr.astype(np.int64))
        return RankReport("xor", len(terms), len(terms), tuple(terms))
    if kind == "binary":
        if not arr.any():
            return RankReport("binary", 0, 0, ())
        greedy = _greedy_partition(arr)
        by_rows = _distinct_row_partition(arr)
        by_cols = [(c, r) for (r, c) in _distinct_row_partition(arr.T)]
        upper_cert = min((greedy, by_rows, by_cols), key=len)
        upper = len(upper_cert)
        lower = max(_numerical_rank(arr), _fooling_bound(arr))
        if lower < upper and min(arr.shape) <= BINARY_EXACT_MAX_DIM:
            exact = _binary_partition_exact(arr, node_budget)
            if exact is not None:
                value, rects = exact
                return RankReport("binary", value, value, rects)
        if lower == upper:
            return RankReport("binary", lower, upper, tuple(upper_cert))
        return RankReport("binary", lower, upper, tuple(upper_cert))
    if kind == "nonneg":
        a = np.real(np.asarray(arr, dtype=float))
        if (a < -1e-12).any():
            raise ValueError("nonnegative rank needs nonnegative entries")
        lower = _numerical_rank(a)
        is_binary = True
        try:
            BinaryMatrix.from_array(a)
        except ValueError:
            is_binary = False
        if is_binary:
            b = rank_toolkit(a, "binary", node_budget)
            upper = b.upper
            cert = b.certificate
        else:
            nz_rows = int(np.sum(a.any(axis=1)))
            nz_cols = int(np.sum(a.any(axis=0)))
            upper = min(nz_rows, nz_cols)
            cert = ()
        return RankReport("nonneg", lower, upper, cert)
    raise ValueError(f"unknown rank kind {kind!r}")


# ---------------------------------------------------------------------------
# the flagged pair-swap permutation family


def pair_swap_family_unitary(flags) -> np.ndarray:
    """Permutation built from diagonal 0/1 flag blocks.

    ``flags`` is an M x dB 0/1 array; row i controls an X on the A-basis pair
    (2i, 2i+1) applied exactly on the B-levels flagged by that row:

        U = sum_i [pair_i projector (x) (I - C_i) + pair_i swap (x) C_i].
    """
    f = BinaryMatrix.from_array(flags).array()
    m, db = f.shape
    da = 2 * m
    u = np.zeros((da * db, da * db), dtype=np.int64)
    for i in range(m):
        for b in range(db):
            r0 = (2 * i) * db + b
            r1 = (2 * i + 1) * db + b
            if f[i, b]:
                u[r0, r1] = 1
                u[r1, r0] = 1
            else:
                u[r0, r0] = 1
                u[r1, r1] = 1
    return u


def pair_swap_family_offdiagonal(flags) -> np.ndarray:
    """The off-diagonal (flagged) part of the family unitary; a partial permutation."""
    f = BinaryMatrix.from_array(flags).array()
    m, db = f.shape
    da = 2 * m
    u = np.zeros((da * db, da * db), dtype=np.int64)
    for i in range(m):
        for b in range(db):
            if f[i, b]:
                u[(2 * i) * db + b, (2 * i + 1) * db + b] = 1
                u[(2 * i + 1) * db + b, (2 * i) * db + b] = 1
    return u


@dataclass(frozen=True, eq=False)
class PairSwapFamilyReport:
    flags: np.ndarray
    unitary: np.ndarray
    offdiagonal: np.ndarray
    sch_u: int
    sch_od: int
    ppr_upper: int
    rank_t: int
    xor_t: RankReport
    binary_t: RankReport

    def table(self) -> str:
        rows = [
            ("Sch(U)", self.sch_u),
            ("Sch(U_od)", self.sch_od),
            ("rank(T)", self.rank_t),
            ("xor rank(T)", self.xor_t.lower),
            ("binary rank(T)", f"{self.binary_t.lower}..{self.binary_t.upper}"
             if not self.binary_t.exact else self.binary_t.lower),
            ("ppr upper(U_od)", self.ppr_upper),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def analyze_pair_swap_family(flags) -> PairSwapFamilyReport:
    """Build the flagged pair-swap family and check its rank relations.

    Asserts rank(T) >= Sch(U_od), |Sch(U_od) - Sch(U)| <= 1, and that the
    binary rank of the flag matrix matches the distinct-block expansion bound
    of the off-diagonal part (interval membership when binary rank is not
    computed exactly).
    """
    f = BinaryMatrix.from_array(flags).array()
    m, db = f.shape
    da = 2 * m
    u = pair_swap_family_unitary(f)
    u_od = pair_swap_family_offdiagonal(f)
    sch_u = operator_schmidt(u.astype(complex), da, db).rank
    if u_od.any():
        sch_od = operator_schmidt(u_od.astype(complex), da, db).rank
        ppr_upper = pp_expansion(u_od, da, db).q
    else:
        sch_od = 0
        ppr_upper = 0
    rank_t = _numerical_rank(f.astype(float))
    xor_t = rank_toolkit(f, "xor")
    binary_t = rank_toolkit(f, "binary")
    if rank_t < sch_od:
        raise AssertionError("rank(T) >= Sch(U_od) violated")
    if abs(sch_od - sch_u) > 1:
        raise AssertionError("|Sch(U_od) - Sch(U)| <= 1 violated")
    if binary_t.exact:
        if binary_t.value != ppr_upper:
            raise AssertionError(
                f"binary rank {binary_t.value} != expansion bound {ppr_upper}"
            )
    elif not (binary_t.lower <= ppr_upper <= binary_t.upper):
        raise AssertionError("expansion bound outside the binary-rank interval")
    return PairSwapFamilyReport(
        f, u, u_od, sch_u, sch_od, ppr_upper, rank_t, xor_t, binary_t
    )


# ---------------------------------------------------------------------------
# XOR-factored protocol for the pair-swap family


@dataclass(frozen=True, eq=False)
class XorProtocolResult:
    """One controlled gate per GF(2) factor of the flag matrix.

    ``base`` has xor_rank two-term controlled-permutation gates on (A, B);
    ``expanded`` realizes each with 2 bipartite CNOTs (2 * xor_rank total).
    """

    base: Circuit
    expanded: Circuit
    xor_rank: int
    cnot_count: int
    terms: tuple


def emit_xor_protocol(flags) -> XorProtocolResult:
    """Implement the pair-swap family unitary from a GF(2) factorization.

    Each factor u (x) v of the flag matrix becomes one controlled gate: the
    B side selects the columns flagged by v, the A side applies the product
    of pair swaps flagged by u.  Overlapping supports cancel mod 2, which is
    exactly how the family unitary composes.
    """
    f = BinaryMatrix.from_array(flags).array()
    m, db = f.shape
    da = 2 * m
    terms = _xor_factor(f)

    def pair_swaps(u_vec) -> np.ndarray:
        out = np.zeros((da, da), dtype=complex)
        for i in range(m):
            blk = np.array([[0, 1], [1, 0]]) if u_vec[i] else np.eye(2)
            out[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = blk
        return out

    eye_a = np.eye(da, dtype=complex)
    base_gates = []
    for u_vec, v_vec in terms:
        s = pair_swaps(u_vec)
        base_gates.append(
            controlled((1,), (0,), {(b,): (s if v_vec[b] else eye_a) for b in range(db)})
        )
    space = PartySpace(parties=(("A", da), ("B", db)))
    base = Circuit(space, tuple(base_gates))

    # expand with one flag qubit per side: b marks the selected columns
    xspace = PartySpace(
        parties=(("A", da), ("B", db)),
        ancillas=(Ancilla("a", "A", 2, 0), Ancilla("b", "B", 2, 0)),
    )
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    eye2 = np.eye(2, dtype=complex)
    xgates = []
    for u_vec, v_vec in terms:
        s = pair_swaps(u_vec)
        flag = controlled((1,), (3,), {(b,): (x if v_vec[b] else eye2) for b in range(db)})
        copy = cnot(3, (0, 1), 2, (0, 1))
        apply_gate = controlled((2,), (0,), {(0,): eye_a, (1,): s})
        xgates.extend([flag, copy, apply_gate, copy, flag])
    expanded = Circuit(xspace, tuple(xgates)).with_ebit_estimate(float(len(terms)))
    return XorProtocolResult(base, expanded, len(terms), 2 * len(terms), tuple(terms))
