"""Bipartite controlled-gate decompositions.

Provides the 3-gate forms for 2 x dB unitaries (alternating and one-sided),
the Schmidt-rank-2 to controlled-form conversion, the recursive sandwich form
for arbitrary dA with gate count bounded by

    g(dA) = 2 ** (ceil(log2 dA) + 1) - 1  <=  4*dA - 5,

and the factorization of any bipartite unitary into three block-controlled
factors.

A *sandwich form* is a product of computational-basis controlled gates whose
controlling party alternates A, B, A, ...; results carry each surviving
gate's position in that alternating product so the pattern stays checkable
after identity gates are stripped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .gateir import (
    Circuit,
    ControlledGate,
    bipartite_space,
    controlled,
    generic,
    local,
)
from .matcore import (
    RECON_TOL,
    InfeasibleError,
    PreconditionError,
    complete_isometry,
    compress_rows,
    is_unitary,
    max_abs,
    require_square,
)

IDENTITY_TOL = 1e-12


class DegenerateRankTwoError(ValueError):
    """The rank-2 root equation has a double root; no controlled form is derived."""


def sandwich_bound(da: int) -> int:
    """Gate-count bound g(da) for the sandwich form."""
    if da <= 1:
        return 1
    return 2 ** ((da - 1).bit_length() + 1) - 1


# ---------------------------------------------------------------------------
# internal alternating-gate representation
#
# _AGate.branches[j] is the dB x dB unitary applied when the A side is |j>;
# _BGate.branches[b] is the dA x dA unitary applied when the B side is |b>.
# Lists produced by _sandwich_gates always have exactly g(da) entries with
# A gates at even list positions (position 1, 3, ... in 1-based product order).


@dataclass
class _AGate:
    branches: list[np.ndarray]


@dataclass
class _BGate:
    branches: list[np.ndarray]


def _identity_a(da: int, db: int) -> _AGate:
    return _AGate([np.eye(db, dtype=complex) for _ in range(da)])


def _identity_b(da: int, db: int) -> _BGate:
    return _BGate([np.eye(da, dtype=complex) for _ in range(db)])


def _gate_is_identity(g, tol: float = IDENTITY_TOL) -> bool:
    return all(max_abs(b - np.eye(b.shape[0])) <= tol for b in g.branches)


def _to_record(g) -> ControlledGate:
    if isinstance(g, _AGate):
        return controlled((0,), (1,), {(j,): b for j, b in enumerate(g.branches)})
    return controlled((1,), (0,), {(b,): m for b, m in enumerate(g.branches)})


def _gates_matrix(gates, da: int, db: int) -> np.ndarray:
    out = np.eye(da * db, dtype=complex)
    for g in gates:
        out = out @ _gate_matrix(g, da, db)
    return out


def _gate_matrix(g, da: int, db: int) -> np.ndarray:
    out = np.zeros((da * db, da * db), dtype=complex)
    if isinstance(g, _AGate):
        for j, b in enumerate(g.branches):
            out[j * db : (j + 1) * db, j * db : (j + 1) * db] = b
    else:
        for b, m in enumerate(g.branches):
            out[b::db, b::db] = m
    return out


# ---------------------------------------------------------------------------
# 2 x dB core


def _two_by_d_core(u: np.ndarray, db: int) -> list:
    """Alternating [A, B, A] gates for a 2 x db unitary.

    The block form [[U00, U01], [U10, U11]] with U00 diagonalized and the
    off-diagonal blocks rotated to nonnegative diagonals is exactly the
    cosine-sine decomposition u = (E0 + E1) CS (F0 + F1); the CS factor is
    controlled from B in the computational basis with 2x2 rotation branches.
    LAPACK's CSD is used because the textbook per-column normalization is
    unstable when a principal angle degenerates.
    """
    u01 = u[:db, db:]
    u10 = u[db:, :db]

    if max_abs(u01) <= IDENTITY_TOL and max_abs(u10) <= IDENTITY_TOL:
        # already controlled from A in the computational basis
        return [_AGate([u[:db, :db], u[db:, db:]]), _identity_b(2, db), _identity_a(2, db)]

    left, cs, right = scipy.linalg.cossin(u, p=db, q=db)
    branches = []
    for j in range(db):
        branches.append(
            np.array(
                [[cs[j, j], cs[j, db + j]], [cs[db + j, j], cs[db + j, db + j]]],
                dtype=complex,
            )
        )
    g1 = _AGate([left[:db, :db], left[db:, db:]])
    g2 = _BGate(branches)
    g3 = _AGate([right[:db, :db], right[db:, db:]])
    return [g1, g2, g3]


# ---------------------------------------------------------------------------
# general recursion


def _pad_to(gates: list, length: int, da: int, db: int) -> list:
    out = list(gates)
    while len(out) < length:
        out.append(_identity_a(da, db) if len(out) % 2 == 0 else _identity_b(da, db))
    return out


def _merge(l1: list, l2: list, d1: int, d2: int, db: int) -> list:
    """Position-wise direct sum of two alternating lists on A-dims d1 and d2."""
    n = max(len(l1), len(l2))
    l1 = _pad_to(l1, n, d1, db)
    l2 = _pad_to(l2, n, d2, db)
    out = []
    for i, (a, b) in enumerate(zip(l1, l2)):
        if i % 2 == 0:
            out.append(_AGate(list(a.branches) + list(b.branches)))
        else:
            merged = []
            for x, y in zip(a.branches, b.branches):
                m = np.zeros((d1 + d2, d1 + d2), dtype=complex)
                m[:d1, :d1] = x
                m[d1:, d1:] = y
                merged.append(m)
            out.append(_BGate(merged))
    return out


def _sandwich_gates(u: np.ndarray, da: int, db: int) -> list:
    """Full alternating gate list of length exactly g(da) with product u."""
    if da == 1:
        return [_AGate([u.copy()])]
    if db == 1:
        gates = [_identity_a(da, 1), _BGate([u.copy()]), _identity_a(da, 1)]
        return _pad_to(gates, sandwich_bound(da), da, 1)
    if da == 2:
        return _two_by_d_core(u, db)

    y = da // 2
    rest = da - 2 * y  # 0 or 1
    yd = y * db

    b_right = u[:yd, yd:]
    vp = compress_rows(b_right, yd)
    v = np.eye(da * db, dtype=complex)
    v[yd:, yd:] = vp
    uv = u @ v

    biso = uv[:yd, : 2 * yd]
    w0 = complete_isometry(biso)
    w = np.eye(da * db, dtype=complex)
    w[: 2 * yd, : 2 * yd] = w0
    x = uv @ w

    # (W')^dagger viewed as a 2 x (y*db) unitary: 3-gate core
    c_g, t_g, d_g = _two_by_d_core(w0.conj().T, yd)
    c_mat = _gate_matrix(c_g, 2, yd)
    d_mat = _gate_matrix(d_g, 2, yd)

    c_til = np.eye(da * db, dtype=complex)
    c_til[: 2 * yd, : 2 * yd] = c_mat
    d_til = np.eye(da * db, dtype=complex)
    d_til[: 2 * yd, : 2 * yd] = d_mat

    xc = x @ c_til
    x1 = xc[:yd, :yd]
    x2 = xc[yd:, yd:]

    dv = d_til @ v.conj().T
    y1 = dv[:yd, :yd]
    y2 = dv[yd:, yd:]

    left = _merge(_sandwich_gates(x1, y, db), _sandwich_gates(x2, da - y, db), y, da - y, db)
    right = _merge(_sandwich_gates(y1, y, db), _sandwich_gates(y2, da - y, db), y, da - y, db)

    # middle gate: branches per B index, pairing |r> with |y + r> inside the A2 block
    mid_branches = []
    for b in range(db):
        m = np.eye(da, dtype=complex)
        for r in range(y):
            w2 = t_g.branches[r * db + b]
            m[r, r] = w2[0, 0]
            m[r, y + r] = w2[0, 1]
            m[y + r, r] = w2[1, 0]
            m[y + r, y + r] = w2[1, 1]
        mid_branches.append(m)
    mid = _BGate(mid_branches)

    return left + [mid] + right


@dataclass(frozen=True, eq=False)
class SandwichResult:
    """Alternating controlled-gate factorization with its count bound.

    ``positions`` gives each kept gate's 1-based slot in the full alternating
    product (odd = controlled from A, even = from B); identity slots were
    stripped.  ``length`` is the full alternating length before stripping.
    """

    circuit: Circuit
    bound: int
    positions: tuple[int, ...]
    length: int


def _strip(gates: list, da: int, db: int):
    kept, positions = [], []
    for i, g in enumerate(gates):
        if not _gate_is_identity(g):
            kept.append(_to_record(g))
            positions.append(i + 1)
    if not kept:
        kept = [_to_record(_identity_a(da, db))]
        positions = [1]
    return kept, positions


def decompose_sandwich(u, da: int, db: int) -> SandwichResult:
    """Sandwich form of a bipartite unitary with at most g(da) gates."""
    u = require_square(u)
    if u.shape[0] != da * db:
        raise ValueError(f"matrix is {u.shape}, expected {(da * db, da * db)}")
    if not is_unitary(u, 1e-8):
        raise PreconditionError("input is not unitary")
    gates = _sandwich_gates(u, da, db)
    kept, positions = _strip(gates, da, db)
    circuit = Circuit(bipartite_space(da, db), tuple(kept))
    return SandwichResult(circuit, sandwich_bound(da), tuple(positions), len(gates))


def decompose_2xd_sandwich(u, db: int | None = None) -> SandwichResult:
    """3-gate alternating (A, B, A) form of a 2 x dB unitary."""
    u = require_square(u)
    if db is None:
        if u.shape[0] % 2:
            raise ValueError("matrix dimension is not 2 * dB")
        db = u.shape[0] // 2
    if u.shape[0] != 2 * db:
        raise ValueError(f"matrix is {u.shape}, expected {(2 * db, 2 * db)}")
    if not is_unitary(u, 1e-8):
        raise PreconditionError("input is not unitary")
    gates = _two_by_d_core(u, db)
    kept, positions = _strip(gates, 2, db)
    return SandwichResult(Circuit(bipartite_space(2, db), tuple(kept)), 3, tuple(positions), 3)


# ---------------------------------------------------------------------------
# Schmidt-rank-2 --> controlled form


def _quadratic_roots(a: complex, b: complex, c: complex):
    """Roots (alpha, beta) of a*alpha^2 + b*alpha*beta + c*beta^2 = 0 in P^1."""
    scale = max(abs(a), abs(b), abs(c))
    if scale < 1e-13:
        raise DegenerateRankTwoError("root equation vanishes identically")
    a, b, c = a / scale, b / scale, c / scale
    tiny = 1e-12
    if abs(a) < tiny and abs(c) < tiny:
        return (1.0, 0.0), (0.0, 1.0)
    if abs(a) < tiny:
        # c beta^2 + b alpha beta = 0: beta = 0 or beta = -b/c
        return (1.0, 0.0), (1.0, -b / c)
    if abs(c) < tiny:
        # a alpha^2 + b alpha beta = 0: alpha = 0 or alpha = -b/a
        return (0.0, 1.0), (-b / a, 1.0)
    disc = b * b - 4.0 * a * c
    if abs(disc) < 1e-18:
        raise DegenerateRankTwoError("double root in the rank-2 root equation")
    sq = np.sqrt(disc)
    if abs(a) >= abs(c):
        r1 = ((-b + sq) / (2 * a), 1.0)
        r2 = ((-b - sq) / (2 * a), 1.0)
    else:
        r1 = (1.0, (-b + sq) / (2 * c))
        r2 = (1.0, (-b - sq) / (2 * c))
    return r1, r2


def _rank1_factors(r: np.ndarray):
    w, s, vh = np.linalg.svd(r)
    if s.size > 1 and s[1] > 1e-7 * s[0]:
        raise DegenerateRankTwoError("root operator is not rank one")
    return w[:, 0], vh[0].conj()


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    ph = v[i] / abs(v[i])
    return v / ph


def rank2_to_controlled(u, da: int, db: int, svtol: float = 1e-9):
    """Convert a Schmidt-rank-2 unitary with 2-dimensional A side to controlled form.

    Writes U = A1 (x) B1 + A2 (x) B2, solves det(alpha*A1 + beta*A2) = 0 for
    the two rank-one root operators |x_j><y_j|, and rotates the (orthonormal,
    by unitarity) bases {x_j}, {y_j} to the computational basis.

    Returns:
        (loc_l, gate, loc_r): 2x2 locals and a ControlledGate record with
        U = (loc_l (x) I) @ gate @ (loc_r (x) I).
    """
    from .schmidt import operator_schmidt

    u = require_square(u)
    if da != 2:
        raise PreconditionError("controlling side must have dimension 2")
    dec = operator_schmidt(u, da, db, svtol)
    if dec.rank != 2:
        raise PreconditionError(f"Schmidt rank is {dec.rank}, expected 2")
    a1 = dec.terms[0][0]
    a2 = dec.terms[1][0]
    det_a1 = np.linalg.det(a1)
    det_a2 = np.linalg.det(a2)
    mixed = np.linalg.det(a1 + a2) - det_a1 - det_a2
    (al1, be1), (al2, be2) = _quadratic_roots(det_a1, mixed, det_a2)

    xs, ys = [], []
    for al, be in ((al1, be1), (al2, be2)):
        r = al * a1 + be * a2
        x, yv = _rank1_factors(r)
        xs.append(x)
        ys.append(yv)

    # unitarity makes the pairs orthogonal; polish tiny numerical overlap
    if abs(np.vdot(xs[0], xs[1])) > 1e-6 or abs(np.vdot(ys[0], ys[1])) > 1e-6:
        raise DegenerateRankTwoError("root vectors are not orthogonal")
    xs[1] = xs[1] - xs[0] * np.vdot(xs[0], xs[1])
    xs[1] /= np.linalg.norm(xs[1])
    ys[1] = ys[1] - ys[0] * np.vdot(ys[0], ys[1])
    ys[1] /= np.linalg.norm(ys[1])
    xs = [_canonical_phase(x) for x in xs]
    ys = [_canonical_phase(y) for y in ys]
    key = [(int(np.argmax(np.abs(x))), int(np.argmax(np.abs(y)))) for x, y in zip(xs, ys)]
    if key[1] < key[0]:
        xs, ys = xs[::-1], ys[::-1]

    l_rows = np.vstack([x.conj() for x in xs])
    r_cols = np.column_stack(ys)
    c = np.kron(l_rows, np.eye(db)) @ u @ np.kron(r_cols, np.eye(db))
    if max(max_abs(c[:db, db:]), max_abs(c[db:, :db])) > 1e-8:
        raise DegenerateRankTwoError("rotated form is not block diagonal")
    gate = controlled((0,), (1,), {(0,): c[:db, :db], (1,): c[db:, db:]})
    return l_rows.conj().T, gate, r_cols.conj().T


# ---------------------------------------------------------------------------
# 3-A form


def _diag_phase_factors(u2: np.ndarray):
    """Phases (l0, l1, r0, r1) making diag-multiplied u2 have the sign pattern
    [[+, +], [+, -]] with entries real."""
    a, b = u2[0, 0], u2[0, 1]
    cc, d = u2[1, 0], u2[1, 1]

    def ang(z):
        return np.angle(z) if abs(z) > 1e-13 else 0.0

    l0 = 1.0
    r0 = np.exp(-1j * ang(a))
    r1 = np.exp(-1j * ang(b))
    if abs(b) > 1e-13 or abs(cc) > 1e-13:
        l1 = np.exp(-1j * ang(cc)) / r0
    else:
        # diagonal branch: free choice; force d nonpositive real
        l1 = -np.exp(-1j * ang(d)) / r1
    return l0, l1, r0, r1


def decompose_2xd_aform(u, db: int | None = None):
    """Three A-controlled gates (with recorded A-locals) for a 2 x dB unitary.

    Returns an AFormResult whose circuit interleaves the three controlled
    gates with the two recorded local unitaries:
    [CC, Local, CC, Local, CC].
    """
    u = require_square(u)
    if db is None:
        db = u.shape[0] // 2
    if u.shape[0] != 2 * db:
        raise ValueError(f"matrix is {u.shape}, expected {(2 * db, 2 * db)}")
    if not is_unitary(u, 1e-8):
        raise PreconditionError("input is not unitary")

    g1, g2, g3 = _two_by_d_core(u, db)

    # reduce the middle factor by diagonal controlled multipliers absorbed
    # into the outer gates: V2' = L V2 R with L, R bipartite diagonal
    ldiag = np.ones(2 * db, dtype=complex)
    rdiag = np.ones(2 * db, dtype=complex)
    for k in range(db):
        l0, l1, r0, r1 = _diag_phase_factors(g2.branches[k])
        ldiag[k] = l0
        ldiag[db + k] = l1
        rdiag[k] = r0
        rdiag[db + k] = r1
    v2 = _gate_matrix(g2, 2, db)
    v2p = ldiag[:, None] * v2 * rdiag[None, :]

    from .schmidt import operator_schmidt

    dec = operator_schmidt(v2p, 2, db)
    if dec.rank == 1:
        a_part = dec.terms[0][0] * np.sqrt(2.0)
        b_part = (np.kron(a_part.conj().T, np.eye(db)) @ v2p)[:db, :db]
        loc_l = a_part
        mid = controlled((0,), (1,), {(0,): b_part, (1,): b_part})
        loc_r = np.eye(2, dtype=complex)
    elif dec.rank == 2:
        loc_l, mid, loc_r = rank2_to_controlled(v2p, 2, db)
    else:
        raise InfeasibleError(f"reduced middle factor has Schmidt rank {dec.rank}")

    # fold the diagonal multipliers into the neighbouring A-controlled gates
    lc = np.conj(ldiag)
    rc = np.conj(rdiag)
    left = controlled(
        (0,),
        (1,),
        {
            (0,): g1.branches[0] @ np.diag(lc[:db]),
            (1,): g1.branches[1] @ np.diag(lc[db:]),
        },
    )
    right = controlled(
        (0,),
        (1,),
        {
            (0,): np.diag(rc[:db]) @ g3.branches[0],
            (1,): np.diag(rc[db:]) @ g3.branches[1],
        },
    )
    gates = (left, local(0, loc_l), mid, local(0, loc_r), right)
    return Circuit(bipartite_space(2, db), gates)


# ---------------------------------------------------------------------------
# three block-controlled factors


@dataclass(frozen=True, eq=False)
class BcuFactorization:
    """U = X @ W† @ V† with machine-checked block patterns.

    X and V† are block diagonal with respect to the first y*dB coordinates
    with identity upper-left block (A-side block structure); W† is supported
    on the first 2*y*dB coordinates plus identity (B-side structure under the
    2 x (y*dB) regrouping of that subspace).
    """

    circuit: Circuit
    x: np.ndarray
    w_dagger: np.ndarray
    v_dagger: np.ndarray
    y: int
    block_errors: tuple[float, float, float]


def decompose_bcu3(u, da: int, db: int, tol: float = RECON_TOL) -> BcuFactorization:
    """Factor a bipartite unitary into three block-controlled gates (A, B, A)."""
    u = require_square(u)
    if da < 2:
        raise PreconditionError("A side must have dimension >= 2")
    if u.shape[0] != da * db:
        raise ValueError(f"matrix is {u.shape}, expected {(da * db, da * db)}")
    if not is_unitary(u, 1e-8):
        raise PreconditionError("input is not unitary")
    y = da // 2
    yd = y * db
    b_right = u[:yd, yd:]
    vp = compress_rows(b_right, yd)
    v = np.eye(da * db, dtype=complex)
    v[yd:, yd:] = vp
    uv = u @ v
    w0 = complete_isometry(uv[:yd, : 2 * yd])
    w = np.eye(da * db, dtype=complex)
    w[: 2 * yd, : 2 * yd] = w0
    x = uv @ w
    wd = w.conj().T
    vd = v.conj().T

    def _a_block_err(m):
        e = max(max_abs(m[:yd, yd:]), max_abs(m[yd:, :yd]))
        return max(e, max_abs(m[:yd, :yd] - np.eye(yd)))

    def _b_block_err(m):
        k = 2 * yd
        e = max(max_abs(m[k:, :k]), max_abs(m[:k, k:]))
        return max(e, max_abs(m[k:, k:] - np.eye(da * db - k)))

    errs = (_a_block_err(x), _b_block_err(wd), _a_block_err(vd))
    if max(errs) > tol:
        raise InfeasibleError(f"block-controlled structure check failed: {errs}")
    space = bipartite_space(da, db)
    gates = (
        generic((0, 1), x, cut=1),
        generic((0, 1), wd, cut=1),
        generic((0, 1), vd, cut=1),
    )
    return BcuFactorization(Circuit(space, gates), x, wd, vd, y, errs)
