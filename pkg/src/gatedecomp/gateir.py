"""Circuit intermediate representation, dense simulator, verifier, and classifier.

A circuit lives on a :class:`PartySpace`: an ordered list of parties followed
by an ordered list of ancillas.  Axis indices count parties first, then
ancillas, and the full Hilbert space is the row-major tensor product of the
axis dimensions.

Gate lists are stored in *product order*: ``gates[0]`` is the leftmost matrix
factor, so it is applied **last**.  ``apply_circuit`` returns
``M(gates[0]) @ M(gates[1]) @ ... @ M(gates[-1])``.  This matches the usual
product notation U = U_1 U_2 ... U_k and is the classic place for reversal
bugs; the JSON format documents it as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .matcore import DEFAULT_EPS, RECON_TOL, as_matrix, is_unitary, max_abs


class CircuitError(ValueError):
    """A gate payload is inconsistent with the circuit's space."""


# ---------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class Ancilla:
    name: str
    host: str
    dim: int = 2
    init: int = 0


@dataclass(frozen=True)
class PartySpace:
    """Ordered parties plus ancillas, each ancilla hosted at a party."""

    parties: tuple[tuple[str, int], ...]
    ancillas: tuple[Ancilla, ...] = ()

    def __post_init__(self):
        names = [n for n, _ in self.parties] + [a.name for a in self.ancillas]
        if len(set(names)) != len(names):
            raise ValueError("party/ancilla names must be unique")
        party_names = {n for n, _ in self.parties}
        for _, d in self.parties:
            if d < 1:
                raise ValueError("party dimensions must be >= 1")
        for a in self.ancillas:
            if a.host not in party_names:
                raise ValueError(f"ancilla {a.name!r} hosted at unknown party {a.host!r}")
            if not 0 <= a.init < a.dim:
                raise ValueError(f"ancilla {a.name!r} initial index out of range")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.parties) + tuple(a.dim for a in self.ancillas)

    @property
    def party_dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.parties)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def axis_host(self, axis: int) -> str:
        n = len(self.parties)
        if axis < n:
            return self.parties[axis][0]
        return self.ancillas[axis - n].host

    def axis(self, name: str) -> int:
        for i, (n, _) in enumerate(self.parties):
            if n == name:
                return i
        for i, a in enumerate(self.ancillas):
            if a.name == name:
                return len(self.parties) + i
        raise KeyError(name)


def bipartite_space(da: int, db: int) -> PartySpace:
    return PartySpace(parties=(("A", da), ("B", db)))


def multiparty_space(dims) -> PartySpace:
    return PartySpace(parties=tuple((f"P{i}", int(d)) for i, d in enumerate(dims)))


# ---------------------------------------------------------------------------
# gate records


@dataclass(frozen=True, eq=False)
class ControlledGate:
    """Computational-basis controlled gate.

    ``branches`` maps every tuple of control-axis basis indices to the unitary
    applied on the target axes (identity on all remaining axes).  Control and
    target axes are strictly increasing; branch matrices are indexed row-major
    over the target axes in that order.
    """

    controls: tuple[int, ...]
    targets: tuple[int, ...]
    branches: tuple[tuple[tuple[int, ...], np.ndarray], ...]

    kind = "ControlledComputational"

    def branch(self, ctrl: tuple[int, ...]) -> np.ndarray:
        for key, mat in self.branches:
            if key == ctrl:
                return mat
        raise KeyError(ctrl)


def controlled(controls, targets, branches: dict) -> ControlledGate:
    """Build a ControlledGate from a {control-tuple: matrix} mapping."""
    controls = tuple(controls)
    targets = tuple(targets)
    if list(controls) != sorted(controls) or list(targets) != sorted(targets):
        raise CircuitError("control/target axes must be strictly increasing")
    if set(controls) & set(targets):
        raise CircuitError("control and target axes overlap")
    items = tuple(sorted((tuple(k), as_matrix(v)) for k, v in branches.items()))
    return ControlledGate(controls, targets, items)


@dataclass(frozen=True, eq=False)
class LocalGate:
    """Unitary on one or more axes that share a single host party."""

    axes: tuple[int, ...]
    matrix: np.ndarray

    kind = "Local"


def local(axes, matrix) -> LocalGate:
    axes = (axes,) if isinstance(axes, int) else tuple(axes)
    if list(axes) != sorted(axes):
        raise CircuitError("local gate axes must be strictly increasing")
    return LocalGate(axes, as_matrix(matrix))


@dataclass(frozen=True, eq=False)
class TwoLevelGate:
    """Standard gate: identity outside one 2x2 subspace of a bipartite cut.

    The nontrivial 4x4 part acts on span{pair_a} x span{pair_b}, ordered
    (a1 b1), (a1 b2), (a2 b1), (a2 b2), and must have Schmidt rank <= 2.
    """

    axis_a: int
    pair_a: tuple[int, int]
    axis_b: int
    pair_b: tuple[int, int]
    matrix: np.ndarray

    kind = "TwoLevelStandard"


def two_level(axis_a, pair_a, axis_b, pair_b, matrix) -> TwoLevelGate:
    m = as_matrix(matrix)
    if m.shape != (4, 4):
        raise CircuitError("two-level gate payload must be 4x4")
    return TwoLevelGate(axis_a, tuple(pair_a), axis_b, tuple(pair_b), m)


@dataclass(frozen=True, eq=False)
class CnotGate:
    """CNOT on two qubit subspaces: fires on control_pair[1], swaps target_pair."""

    control_axis: int
    control_pair: tuple[int, int]
    target_axis: int
    target_pair: tuple[int, int]

    kind = "CNOT"


def cnot(control_axis, control_pair, target_axis, target_pair) -> CnotGate:
    if control_axis == target_axis:
        raise CircuitError("CNOT control and target must be distinct axes")
    return CnotGate(control_axis, tuple(control_pair), target_axis, tuple(target_pair))


@dataclass(frozen=True, eq=False)
class GenericGate:
    """Explicit unitary on a set of axes with a declared bipartition tag.

    ``cut`` is the number of leading axes (in ``axes`` order) belonging to the
    left block of the declared bipartition; used for block-structure checks.
    """

    axes: tuple[int, ...]
    matrix: np.ndarray
    cut: int = 1

    kind = "GenericBipartite"


def generic(axes, matrix, cut: int = 1) -> GenericGate:
    axes = (axes,) if isinstance(axes, int) else tuple(axes)
    if list(axes) != sorted(axes):
        raise CircuitError("generic gate axes must be strictly increasing")
    return GenericGate(axes, as_matrix(matrix), cut)


Gate = ControlledGate | LocalGate | TwoLevelGate | CnotGate | GenericGate

GATE_KINDS = ("ControlledComputational", "Local", "TwoLevelStandard", "CNOT", "GenericBipartite")


def gate_axes(g: Gate) -> tuple[int, ...]:
    if isinstance(g, ControlledGate):
        return tuple(sorted(g.controls + g.targets))
    if isinstance(g, (LocalGate, GenericGate)):
        return g.axes
    if isinstance(g, TwoLevelGate):
        return tuple(sorted((g.axis_a, g.axis_b)))
    return tuple(sorted((g.control_axis, g.target_axis)))


# ---------------------------------------------------------------------------
# circuits and metrics


@dataclass(frozen=True)
class Metrics:
    gate_counts: tuple[tuple[str, int], ...]
    nonlocal_cnot: int
    ebit_estimate: float | None = None

    def counts(self) -> dict[str, int]:
        return dict(self.gate_counts)


@dataclass(frozen=True, eq=False)
class Circuit:
    """Gate list over a party space, in product order (gates[0] applied last)."""

    space: PartySpace
    gates: tuple[Gate, ...]
    metrics: Metrics = None  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.metrics is None:
            object.__setattr__(self, "metrics", compute_metrics(self.space, self.gates))

    def with_ebit_estimate(self, ebits: float) -> "Circuit":
        return Circuit(self.space, self.gates, replace(self.metrics, ebit_estimate=ebits))


def compute_metrics(space: PartySpace, gates, ebit_estimate: float | None = None) -> Metrics:
    counts = {k: 0 for k in GATE_KINDS}
    nonlocal_cnot = 0
    for g in gates:
        counts[g.kind] += 1
        if isinstance(g, CnotGate):
            if space.axis_host(g.control_axis) != space.axis_host(g.target_axis):
                nonlocal_cnot += 1
    items = tuple((k, v) for k, v in counts.items() if v)
    return Metrics(items, nonlocal_cnot, ebit_estimate)


def recompute_metrics(c: Circuit) -> Metrics:
    """Recompute the derivable metric fields, preserving the declared ebit estimate."""
    return compute_metrics(c.space, c.gates, c.metrics.ebit_estimate)


# ---------------------------------------------------------------------------
# dense simulation


def _controlled_matrix(dims, controls, targets, branch_items) -> np.ndarray:
    n_axes = len(dims)
    total = math.prod(dims)
    idx = np.arange(total).reshape(dims)
    out = np.zeros((total, total), dtype=complex)
    remaining = [ax for ax in range(n_axes) if ax not in controls]
    tpos = [remaining.index(ax) for ax in targets]
    dt = math.prod(dims[ax] for ax in targets) if targets else 1
    for ctrl, branch in branch_items:
        if branch.shape != (dt, dt):
            raise CircuitError(
                f"branch for control {ctrl} has shape {branch.shape}, expected {(dt, dt)}"
            )
        sl: list = [slice(None)] * n_axes
        for ax, v in zip(controls, ctrl):
            if not 0 <= v < dims[ax]:
                raise CircuitError(f"control index {v} out of range on axis {ax}")
            sl[ax] = v
        sub = idx[tuple(sl)]
        if targets:
            sub = np.moveaxis(
                sub, tpos, range(len(remaining) - len(targets), len(remaining))
            )
        sub = sub.reshape(-1, dt)
        for row in sub:
            out[np.ix_(row, row)] = branch
    return out


def gate_matrix(space: PartySpace, g: Gate) -> np.ndarray:
    """Embed a gate record into the full space as a dense matrix."""
    dims = space.dims
    total = math.prod(dims)
    for ax in gate_axes(g):
        if not 0 <= ax < len(dims):
            raise CircuitError(f"gate references axis {ax} outside the space")
    if isinstance(g, ControlledGate):
        expected = math.prod(dims[ax] for ax in g.controls) if g.controls else 1
        if len(g.branches) != expected:
            raise CircuitError("controlled gate does not cover every control tuple once")
        seen = {k for k, _ in g.branches}
        if len(seen) != len(g.branches):
            raise CircuitError("duplicate control tuple in controlled gate")
        return _controlled_matrix(dims, g.controls, g.targets, g.branches)
    if isinstance(g, (LocalGate, GenericGate)):
        return _controlled_matrix(dims, (), g.axes, (((), g.matrix),))
    if isinstance(g, TwoLevelGate):
        out = np.eye(total, dtype=complex)
        idx = np.arange(total).reshape(dims)
        (a1, a2), (b1, b2) = g.pair_a, g.pair_b
        quads = []
        for a, b in ((a1, b1), (a1, b2), (a2, b1), (a2, b2)):
            sl: list = [slice(None)] * len(dims)
            sl[g.axis_a] = a
            sl[g.axis_b] = b
            quads.append(idx[tuple(sl)].reshape(-1))
        for r in range(quads[0].size):
            four = [q[r] for q in quads]
            out[np.ix_(four, four)] = g.matrix
        return out
    if isinstance(g, CnotGate):
        coords = list(np.unravel_index(np.arange(total), dims))
        c = coords[g.control_axis]
        t = coords[g.target_axis]
        k0, k1 = g.target_pair
        fire = c == g.control_pair[1]
        coords[g.target_axis] = np.where(
            fire & (t == k0), k1, np.where(fire & (t == k1), k0, t)
        )
        dest = np.ravel_multi_index(coords, dims)
        out = np.zeros((total, total), dtype=complex)
        out[dest, np.arange(total)] = 1.0
        return out
    raise CircuitError(f"unknown gate record {type(g).__name__}")


def apply_circuit(c: Circuit) -> np.ndarray:
    """Ordered matrix product of all gates embedded into the full space."""
    total = c.space.total_dim
    out = np.eye(total, dtype=complex)
    for i, g in enumerate(c.gates):
        try:
            out = out @ gate_matrix(c.space, g)
        except CircuitError as exc:
            raise CircuitError(f"gate {i}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# exact permutation simulation (integer tables)


def _matrix_to_perm(m: np.ndarray):
    """Decode a complex-permutation matrix into (targets, phases); None if not one."""
    n = m.shape[0]
    targets = np.full(n, -1, dtype=np.int64)
    phases = np.zeros(n, dtype=complex)
    rows_used = np.zeros(n, dtype=bool)
    for col in range(n):
        nz = np.flatnonzero(m[:, col])
        if nz.size != 1:
            return None
        r = int(nz[0])
        v = m[r, col]
        if abs(abs(v) - 1.0) > 1e-12 or rows_used[r]:
            return None
        targets[col] = r
        phases[col] = v
        rows_used[r] = True
    return targets, phases


def circuit_permutation(c: Circuit):
    """Exact (targets, phases) action of a circuit of complex-permutation gates.

    ``targets[i]`` is the image basis index of |i> and ``phases[i]`` the
    accumulated phase, computed with integer arithmetic and exact phase
    products.  Raises CircuitError if some gate is not a complex permutation.
    """
    total = c.space.total_dim
    targets = np.arange(total, dtype=np.int64)
    phases = np.ones(total, dtype=complex)
    for i, g in enumerate(c.gates):
        dec = _gate_permutation(c.space, g)
        if dec is None:
            raise CircuitError(f"gate {i} is not a complex permutation")
        gt, gp = dec
        # product order: current result is applied after g
        targets = targets[gt]
        phases = phases[gt] * gp
    return targets, phases


def _controlled_permutation(dims, controls, targets, branch_items):
    """Table form of a controlled gate whose branches are complex permutations."""
    n_axes = len(dims)
    total = math.prod(dims)
    idx = np.arange(total).reshape(dims)
    out_t = np.arange(total, dtype=np.int64)
    out_p = np.ones(total, dtype=complex)
    remaining = [ax for ax in range(n_axes) if ax not in controls]
    tpos = [remaining.index(ax) for ax in targets]
    dt = math.prod(dims[ax] for ax in targets) if targets else 1
    for ctrl, branch in branch_items:
        dec = _matrix_to_perm(branch)
        if dec is None:
            return None
        bt, bp = dec
        sl: list = [slice(None)] * n_axes
        for ax, v in zip(controls, ctrl):
            sl[ax] = v
        sub = idx[tuple(sl)]
        if targets:
            sub = np.moveaxis(
                sub, tpos, range(len(remaining) - len(targets), len(remaining))
            )
        sub = sub.reshape(-1, dt)
        for row in sub:
            out_t[row] = row[bt]
            out_p[row] = bp
    return out_t, out_p


def _gate_permutation(space: PartySpace, g: Gate):
    dims = space.dims
    total = math.prod(dims)
    if isinstance(g, CnotGate):
        coords = list(np.unravel_index(np.arange(total), dims))
        c = coords[g.control_axis]
        t = coords[g.target_axis]
        k0, k1 = g.target_pair
        fire = c == g.control_pair[1]
        coords[g.target_axis] = np.where(
            fire & (t == k0), k1, np.where(fire & (t == k1), k0, t)
        )
        dest = np.ravel_multi_index(coords, dims)
        return dest.astype(np.int64), np.ones(total, dtype=complex)
    if isinstance(g, ControlledGate):
        return _controlled_permutation(dims, g.controls, g.targets, g.branches)
    if isinstance(g, (LocalGate, GenericGate)):
        return _controlled_permutation(dims, (), g.axes, (((), g.matrix),))
    mat = gate_matrix(space, g)
    return _matrix_to_perm(mat)


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class GateClassification:
    kind: str
    controlled_from_a: bool
    controlled_from_b: bool
    schmidt_rank: int


@dataclass(frozen=True)
class VerificationReport:
    max_error: float
    leakage: float
    ancilla_restored: bool
    gate_counts: tuple[tuple[str, int], ...]
    nonlocal_cnot: int
    classifications: tuple[GateClassification, ...] | None
    passed: bool

    def counts(self) -> dict[str, int]:
        return dict(self.gate_counts)


def _ancilla_initial_indices(space: PartySpace) -> np.ndarray:
    dims = space.dims
    idx = np.arange(math.prod(dims)).reshape(dims)
    sl: list = [slice(None)] * len(dims)
    for i, a in enumerate(space.ancillas):
        sl[len(space.parties) + i] = a.init
    return idx[tuple(sl)].reshape(-1)


def verify_decomposition(u, c: Circuit, tol: float = RECON_TOL, classify: bool = True) -> VerificationReport:
    """Compare a circuit against a target unitary on the declared party space.

    With ancillas present, the comparison is restricted to columns where every
    ancilla starts in its initial basis state; ``leakage`` measures amplitude
    escaping that subspace and ``ancilla_restored`` asserts it stays within
    ``tol``.  Failures are reported, never raised.
    """
    u = as_matrix(u)
    party_total = math.prod(c.space.party_dims)
    if u.shape != (party_total, party_total):
        raise CircuitError(
            f"target is {u.shape}, expected {(party_total, party_total)} for this space"
        )
    m = apply_circuit(c)
    if not c.space.ancillas:
        err = max_abs(m - u)
        leak = 0.0
        restored = True
    else:
        cols = _ancilla_initial_indices(c.space)
        sub = m[:, cols]
        block = sub[cols, :]
        err_block = max_abs(block - u)
        mask = np.ones(m.shape[0], dtype=bool)
        mask[cols] = False
        leak = max_abs(sub[mask, :]) if mask.any() else 0.0
        restored = leak <= tol
        err = max(err_block, leak)
    classifications = None
    if classify:
        classifications = tuple(classify_gate(c.space, g) for g in c.gates)
    met = recompute_metrics(c)
    return VerificationReport(
        max_error=err,
        leakage=leak,
        ancilla_restored=restored,
        gate_counts=met.gate_counts,
        nonlocal_cnot=met.nonlocal_cnot,
        classifications=classifications,
        passed=(err <= tol) and restored,
    )


def classify_matrix(m, da: int, db: int, eps: float = DEFAULT_EPS):
    """Computational-basis controlledness and Schmidt rank across a (da, db) cut."""
    from .schmidt import operator_schmidt

    m = as_matrix(m)
    r = m.reshape(da, db, da, db)
    t = r.copy()
    for j in range(da):
        t[j, :, j, :] = 0.0
    off_a = max_abs(t)
    t = r.copy()
    for b in range(db):
        t[:, b, :, b] = 0.0
    off_b = max_abs(t)
    rank = operator_schmidt(m, da, db).rank
    return off_a <= eps, off_b <= eps, rank


def classify_gate(space: PartySpace, g: Gate, cut: int = 1, eps: float = DEFAULT_EPS) -> GateClassification:
    """Classify one gate across the party bipartition (first ``cut`` parties vs rest).

    The gate is materialized on its own axes only, reordered so the A-side
    (host in the first ``cut`` parties) comes first.
    """
    a_names = {n for n, _ in space.parties[:cut]}
    axes = gate_axes(g)
    a_axes = [ax for ax in axes if space.axis_host(ax) in a_names]
    b_axes = [ax for ax in axes if space.axis_host(ax) not in a_names]
    sub_dims = tuple(space.dims[ax] for ax in axes)
    sub_space = PartySpace(parties=tuple((f"x{ax}", space.dims[ax]) for ax in axes))
    remap = {ax: i for i, ax in enumerate(axes)}
    mat = gate_matrix(sub_space, _remap_gate(g, remap))
    order = [remap[ax] for ax in a_axes + b_axes]
    if order != list(range(len(axes))):
        k = len(axes)
        total = math.prod(sub_dims)
        mat = (
            mat.reshape(sub_dims + sub_dims)
            .transpose(order + [o + k for o in order])
            .reshape(total, total)
        )
    da = math.prod(space.dims[ax] for ax in a_axes) if a_axes else 1
    db = math.prod(space.dims[ax] for ax in b_axes) if b_axes else 1
    from_a, from_b, rank = classify_matrix(mat, da, db, eps)
    return GateClassification(g.kind, from_a, from_b, rank)


def _remap_gate(g: Gate, remap: dict[int, int]) -> Gate:
    if isinstance(g, ControlledGate):
        return ControlledGate(
            tuple(remap[a] for a in g.controls),
            tuple(remap[a] for a in g.targets),
            g.branches,
        )
    if isinstance(g, LocalGate):
        return LocalGate(tuple(remap[a] for a in g.axes), g.matrix)
    if isinstance(g, GenericGate):
        return GenericGate(tuple(remap[a] for a in g.axes), g.matrix, g.cut)
    if isinstance(g, TwoLevelGate):
        return TwoLevelGate(remap[g.axis_a], g.pair_a, remap[g.axis_b], g.pair_b, g.matrix)
    return CnotGate(remap[g.control_axis], g.control_pair, remap[g.target_axis], g.target_pair)


# ---------------------------------------------------------------------------
# structural validation


def validate_circuit(c: Circuit, eps: float = DEFAULT_EPS) -> None:
    """Check the IR invariants: unitary payloads, branch coverage, two-level rank."""
    from .schmidt import operator_schmidt

    for i, g in enumerate(c.gates):
        mats = []
        if isinstance(g, ControlledGate):
            expected = math.prod(c.space.dims[ax] for ax in g.controls) if g.controls else 1
            if len(g.branches) != expected:
                raise CircuitError(f"gate {i}: branches do not cover every control tuple")
            mats = [m for _, m in g.branches]
        elif isinstance(g, (LocalGate, GenericGate)):
            mats = [g.matrix]
        elif isinstance(g, TwoLevelGate):
            mats = [g.matrix]
            if operator_schmidt(g.matrix, 2, 2).rank > 2:
                raise CircuitError(f"gate {i}: two-level part has Schmidt rank > 2")
        for m in mats:
            if not is_unitary(m, eps):
                raise CircuitError(f"gate {i}: embedded matrix is not unitary at {eps}")
        if isinstance(g, LocalGate):
            hosts = {c.space.axis_host(ax) for ax in g.axes}
            if len(hosts) != 1:
                raise CircuitError(f"gate {i}: local gate spans multiple hosts {hosts}")
