"""Dense complex linear-algebra primitives shared by the decomposition passes.

All matrices are plain ``numpy`` arrays of ``complex128``.  Three tolerance
tiers are used throughout the package:

* ``DEFAULT_EPS`` (1e-9)  -- entrywise tolerance for unitarity/structure checks,
* ``RANK_TOL``    (1e-10) -- numerical-zero threshold for rank/nullity decisions,
* ``RECON_TOL``   (1e-8)  -- max-entry tolerance for factorization round-trips.

Keeping the rank threshold one decade below the verification tolerance avoids
misclassifying accumulated round-off as structure.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

DEFAULT_EPS = 1e-9
RANK_TOL = 1e-10
RECON_TOL = 1e-8


class PreconditionError(ValueError):
    """An operation's input violates its documented precondition."""


class InfeasibleError(ValueError):
    """A factorization target is numerically unattainable for this input."""


def as_matrix(m) -> np.ndarray:
    """Coerce to a 2-D complex array and reject non-finite entries."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {a.shape}")
    if a.size and not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def require_square(m) -> np.ndarray:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def max_abs(m) -> float:
    a = np.asarray(m)
    return 0.0 if a.size == 0 else float(np.abs(a).max())


def is_unitary(m, eps: float = DEFAULT_EPS) -> bool:
    """True iff both M M† - I and M† M - I have max-entry norm <= eps."""
    a = require_square(m)
    eye = np.eye(a.shape[0])
    return (
        max_abs(a @ a.conj().T - eye) <= eps
        and max_abs(a.conj().T @ a - eye) <= eps
    )


def svd_diagonalize(m):
    """Factor a square matrix as M = E @ D @ F.

    E, F are unitary and D is diagonal with real nonnegative entries sorted
    nonincreasing (the LAPACK singular-value order).

    Returns:
        (E, D, F) with D returned as a full diagonal matrix.
    """
    a = require_square(m)
    e, s, f = np.linalg.svd(a)
    return e, np.diag(s).astype(complex), f


def _orthonormal_completion(vectors: list[np.ndarray], dim: int) -> list[np.ndarray]:
    """Extend an orthonormal family to a basis of C^dim.

    Candidates are the standard basis vectors in increasing index order;
    candidates whose residual norm falls below RANK_TOL are skipped.  The
    projection is applied twice for numerical orthogonality.
    """
    out = list(vectors)
    added: list[np.ndarray] = []
    for i in range(dim):
        if len(out) == dim:
            break
        v = np.zeros(dim, dtype=complex)
        v[i] = 1.0
        for _ in range(2):
            for b in out:
                v = v - b * (np.conj(b) @ v)
        nrm = np.linalg.norm(v)
        if nrm < RANK_TOL:
            continue
        v = v / nrm
        out.append(v)
        added.append(v)
    if len(out) != dim:
        raise InfeasibleError("could not complete an orthonormal basis")
    return added


def orthogonal_columns_to_diagonal(m, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Return unitary V such that V @ M is diagonal with nonnegative entries.

    Requires the columns of M to be pairwise orthogonal (the Gram matrix
    M† M must be diagonal to within ``eps``).  Rows of V corresponding to
    numerically zero columns are completed deterministically from standard
    basis vectors in increasing index order.
    """
    a = require_square(m)
    n = a.shape[0]
    gram = a.conj().T @ a
    if max_abs(gram - np.diag(np.diag(gram))) > eps:
        raise PreconditionError("columns are not pairwise orthogonal")
    norms = np.sqrt(np.clip(np.real(np.diag(gram)), 0.0, None))
    rows: dict[int, np.ndarray] = {}
    for j in range(n):
        if norms[j] >= RANK_TOL:
            rows[j] = np.conj(a[:, j]) / norms[j]
    missing = [j for j in range(n) if j not in rows]
    if missing:
        completion = _orthonormal_completion([rows[j] for j in sorted(rows)], n)
        for j, vec in zip(missing, completion):
            rows[j] = vec
    return np.vstack([rows[j] for j in range(n)]) if n else np.zeros((0, 0), complex)


def compress_rows(b, t: int) -> np.ndarray:
    """Return unitary V (m x m) such that B @ V is supported on its first t columns.

    Requires the numerical rank of the k x m matrix B to be at most t.  The
    leading columns of V are the right singular vectors of B; the rest is the
    deterministic standard-basis completion of their span.
    """
    a = as_matrix(b)
    _, m = a.shape
    if not 0 <= t <= m:
        raise ValueError(f"target column count {t} out of range for {m} columns")
    if a.size == 0 or max_abs(a) == 0.0:
        return np.eye(m, dtype=complex)
    _, s, vh = np.linalg.svd(a)
    rank = int(np.sum(s > RANK_TOL))
    if rank > t:
        raise InfeasibleError(f"row space has rank {rank} > {t}")
    lead = [vh[i].conj() for i in range(rank)]
    completion = _orthonormal_completion(lead, m)
    return np.column_stack(lead + completion)


def complete_isometry(b, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Return unitary W (m x m) with B @ W = [I_k | 0] for a k x m isometry B.

    The first k columns of W are B†; the remaining columns are the
    deterministic standard-basis completion of the null space.
    """
    a = as_matrix(b)
    k, m = a.shape
    if k > m:
        raise PreconditionError("more rows than columns; not an isometry")
    if max_abs(a @ a.conj().T - np.eye(k)) > eps:
        raise PreconditionError("rows are not orthonormal")
    lead = [a[i].conj() for i in range(k)]
    completion = _orthonormal_completion(lead, m)
    return np.column_stack(lead + completion)


def unitary_eig(m, sort: bool = True):
    """Eigendecomposition M = Q diag(w) Q† of a (near-)unitary matrix.

    Uses the complex Schur form, so Q is unitary to machine precision even
    for clustered eigenvalues.  With ``sort`` the eigenvalues are ordered by
    phase angle in [0, 2*pi) for reproducibility.

    Returns:
        (Q, w) with Q unitary and w the eigenvalue vector.
    """
    a = require_square(m)
    if a.shape[0] == 0:
        return a.copy(), np.zeros(0, complex)
    t, q = scipy.linalg.schur(a, output="complex")
    w = np.diag(t).copy()
    if sort:
        order = np.argsort(np.mod(np.angle(w), 2.0 * np.pi), kind="stable")
        q = q[:, order]
        w = w[order]
    return q, w
