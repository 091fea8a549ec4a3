import numpy as np
import pytest

from gatedecomp import (
    apply_circuit,
    circuit_permutation,
    emit_backup_protocol,
    emit_transfer_protocol,
    emit_two_term_cnot,
    emit_xor_protocol,
    pair_swap_family_offdiagonal,
    pair_swap_family_unitary,
    analyze_pair_swap_family,
    pp_expansion,
    verify_decomposition,
)
from gatedecomp.matcore import PreconditionError, max_abs
from gatedecomp.generators import (
    example2_flags,
    haar_unitary,
    random_permutation,
    random_two_term,
    swap_unitary,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)


def perm_circuit_table(circuit, n_parties_dim, anc_stride):
    """Party-space action of a permutation circuit with ancillas at init 0."""
    t, p = circuit_permutation(circuit)
    tpart, ppart = [], []
    for i in range(n_parties_dim):
        full_out = t[i * anc_stride]
        assert full_out % anc_stride == 0, "ancillas not restored"
        tpart.append(full_out // anc_stride)
        ppart.append(p[i * anc_stride])
    return tpart, ppart


class TestPpExpansion:
    def test_product_permutation_single_term(self):
        pa = np.eye(3)[:, [1, 2, 0]]
        pb = np.eye(2)[:, [1, 0]]
        u = np.kron(pa, pb).astype(np.int64)
        exp = pp_expansion(u, 3, 2)
        assert exp.q == 1
        assert max_abs(exp.reconstruct() - u) == 0

    def test_swap2_four_terms(self):
        u = np.round(np.real(swap_unitary(2))).astype(np.int64)
        exp = pp_expansion(u, 2, 2)
        assert exp.q == 4
        assert exp.bound_components == (4, 4, 8, 8, 16)
        assert min(exp.bound_components) == 4

    def test_offdiagonal_part_rank_three(self):
        u_od = pair_swap_family_offdiagonal(example2_flags())
        exp = pp_expansion(u_od, 6, 3)
        assert exp.q == 3
        assert max_abs(exp.reconstruct() - u_od) == 0

    @pytest.mark.parametrize("seed", range(10))
    def test_bound_components_hold(self, seed):
        rng = np.random.default_rng(seed)
        da = int(rng.integers(2, 9))
        db = int(rng.integers(2, 9))
        cp = random_permutation((da, db), 100 + seed)
        u = np.round(np.real(cp.matrix())).astype(np.int64)
        exp = pp_expansion(u, da, db)
        assert exp.q <= min(exp.bound_components)
        assert max_abs(exp.reconstruct() - u) == 0
        for a, b in exp.terms:
            assert (a.sum(axis=0) <= 1).all() and (a.sum(axis=1) <= 1).all()
            assert (b.sum(axis=0) <= 1).all() and (b.sum(axis=1) <= 1).all()

    def test_rejects_non_permutation(self):
        with pytest.raises(PreconditionError):
            pp_expansion(np.ones((4, 4)), 2, 2)


class TestTwoTermCnot:
    def test_cnot_instance_exact(self):
        p0 = np.diag([1.0, 0.0]).astype(complex)
        p1 = np.diag([0.0, 1.0]).astype(complex)
        target = np.kron(p0, np.eye(2)) + np.kron(p1, X)
        c = emit_two_term_cnot(p0, np.eye(2), p1, X)
        rep = verify_decomposition(target, c, tol=1e-12)
        assert rep.passed and rep.max_error == 0.0
        assert rep.counts()["CNOT"] == 2
        assert rep.nonlocal_cnot == 2

    @pytest.mark.parametrize("da,db,seed", [(2, 2, 0), (3, 3, 1), (4, 3, 2), (4, 4, 3)])
    def test_seeded_two_term(self, da, db, seed):
        p1, v1, p2, v2, gate = random_two_term(da, db, seed)
        c = emit_two_term_cnot(p1, v1, p2, v2)
        rep = verify_decomposition(gate, c, tol=1e-10)
        assert rep.passed
        assert rep.ancilla_restored
        assert rep.counts()["CNOT"] == 2

    def test_rank1_projector_with_3x3_branch(self):
        p1, v1, p2, v2, gate = random_two_term(3, 3, 9, rank1=2)
        c = emit_two_term_cnot(p1, v1, p2, v2)
        rep = verify_decomposition(gate, c, tol=1e-10)
        assert rep.passed

    def test_zero_projector_rejected(self):
        with pytest.raises(PreconditionError):
            emit_two_term_cnot(np.eye(2), np.eye(2), np.zeros((2, 2)), X)

    def test_equal_branches_still_verify(self):
        p0 = np.diag([1.0, 0.0]).astype(complex)
        p1 = np.diag([0.0, 1.0]).astype(complex)
        v = haar_unitary(2, 5)
        target = np.kron(p0 + p1, v)
        c = emit_two_term_cnot(p0, v, p1, v)
        assert verify_decomposition(target, c, tol=1e-10).passed

    def test_non_projector_rejected(self):
        with pytest.raises(PreconditionError):
            emit_two_term_cnot(0.5 * np.eye(2), np.eye(2), 0.5 * np.eye(2), X)


class TestBackupProtocol:
    @pytest.mark.parametrize("da,db,seed", [(4, 4, 0), (3, 5, 1), (6, 3, 2), (8, 8, 3)])
    def test_exact_and_within_bounds(self, da, db, seed):
        cp = random_permutation((da, db), seed)
        u = np.round(np.real(cp.matrix())).astype(np.int64)
        exp = pp_expansion(u, da, db)
        res = emit_backup_protocol(u, exp, da, db)
        assert res.two_term_count <= 3 * exp.q
        assert res.cnot_count <= 6 * exp.q
        # base circuit exact on the flag-initialized subspace
        t, p = perm_circuit_table(res.base, da * db, 2)
        assert t == list(cp.targets)
        assert all(x == 1.0 for x in p)
        # expanded circuit exact with all three ancillas restored
        t, p = perm_circuit_table(res.expanded, da * db, 8)
        assert t == list(cp.targets)
        assert res.expanded.metrics.nonlocal_cnot == res.cnot_count
        assert res.base.metrics.ebit_estimate == res.two_term_count

    def test_product_permutation_few_gates(self):
        pa = np.eye(3)[:, [2, 0, 1]]
        pb = np.eye(3)[:, [1, 2, 0]]
        u = np.kron(pa, pb).astype(np.int64)
        exp = pp_expansion(u, 3, 3)
        assert exp.q == 1
        res = emit_backup_protocol(u, exp, 3, 3)
        assert res.two_term_count <= 3
        t, p = perm_circuit_table(res.base, 9, 2)
        assert max_abs(np.array(t) - np.argmax(u, axis=0)) == 0

    def test_in_place_instance_reduced_count(self):
        # all rectangles in place: one two-term gate per nontrivial flag term
        u = pair_swap_family_unitary(example2_flags())
        exp = pp_expansion(u, 6, 3)
        res = emit_backup_protocol(u, exp, 6, 3)
        assert res.two_term_count == 3
        assert res.cnot_count == 6
        t, p = perm_circuit_table(res.base, 18, 2)
        assert t == [int(np.argmax(u[:, i])) for i in range(18)]

    def test_identity_input(self):
        u = np.eye(6, dtype=np.int64)
        exp = pp_expansion(u, 2, 3)
        res = emit_backup_protocol(u, exp, 2, 3)
        t, p = perm_circuit_table(res.base, 6, 2)
        assert t == list(range(6))

    def test_mismatched_expansion_rejected(self):
        u = np.round(np.real(swap_unitary(2))).astype(np.int64)
        other = pp_expansion(np.eye(4, dtype=np.int64), 2, 2)
        with pytest.raises(PreconditionError):
            emit_backup_protocol(u, other, 2, 2)


class TestTransferProtocol:
    @pytest.mark.parametrize(
        "da,db,m", [(2, 2, 1), (4, 4, 2), (3, 5, 2), (5, 3, 2), (8, 2, 1)]
    )
    def test_cnot_count_and_subspace(self, da, db, m):
        u = haar_unitary(da * db, da * 13 + db)
        res = emit_transfer_protocol(u, da, db)
        assert res.qubits == m
        rep = verify_decomposition(res.embedded, res.circuit)
        assert rep.passed and rep.ancilla_restored
        assert rep.counts()["CNOT"] == 4 * m
        assert rep.nonlocal_cnot == 4 * m
        assert rep.counts().get("GenericBipartite", 0) + rep.counts().get("Local", 0) == 1

    def test_embedding_contains_original(self):
        u = haar_unitary(15, 4)
        res = emit_transfer_protocol(u, 3, 5)
        # embedded unitary acts as u on the original subspace
        rows = np.arange(15)
        assert max_abs(res.embedded[np.ix_(rows, rows)] - u) == 0


class TestXorProtocol:
    def test_fixed_instance_emits_the_explicit_factors(self):
        # the two emitted gates are exactly the known factor matrices
        from gatedecomp import Circuit, apply_circuit

        res = emit_xor_protocol(example2_flags())
        eye2 = np.eye(2)
        v_expected = np.kron(
            np.block(
                [
                    [X, np.zeros((2, 4))],
                    [np.zeros((2, 2)), X, np.zeros((2, 2))],
                    [np.zeros((2, 4)), eye2],
                ]
            ),
            np.diag([1.0, 1.0, 0.0]),
        ) + np.kron(np.eye(6), np.diag([0.0, 0.0, 1.0]))
        w_expected = np.kron(
            np.block(
                [
                    [eye2, np.zeros((2, 4))],
                    [np.zeros((2, 2)), X, np.zeros((2, 2))],
                    [np.zeros((2, 4)), X],
                ]
            ),
            np.diag([0.0, 1.0, 1.0]),
        ) + np.kron(np.eye(6), np.diag([1.0, 0.0, 0.0]))
        got_v = apply_circuit(Circuit(res.base.space, (res.base.gates[0],)))
        got_w = apply_circuit(Circuit(res.base.space, (res.base.gates[1],)))
        assert np.array_equal(got_v, v_expected.astype(complex))
        assert np.array_equal(got_w, w_expected.astype(complex))

    def test_fixed_instance_two_gates_four_cnots(self):
        res = emit_xor_protocol(example2_flags())
        assert res.xor_rank == 2
        assert res.cnot_count == 4
        u = pair_swap_family_unitary(example2_flags())
        t, p = circuit_permutation(res.base)
        assert [int(x) for x in t] == [int(np.argmax(u[:, i])) for i in range(18)]
        texp, _ = circuit_permutation(res.expanded)
        assert [int(texp[4 * i]) // 4 for i in range(18)] == [
            int(np.argmax(u[:, i])) for i in range(18)
        ]

    def test_single_rectangle(self):
        flags = np.array([[1, 1], [0, 0]])
        res = emit_xor_protocol(flags)
        assert res.xor_rank == 1
        assert res.cnot_count == 2

    @pytest.mark.parametrize("seed", range(5))
    def test_seeded_4x4_exact(self, seed):
        rng = np.random.default_rng(seed)
        flags = rng.integers(0, 2, size=(4, 4))
        if not flags.any():
            flags[0, 0] = 1
        res = emit_xor_protocol(flags)
        u = pair_swap_family_unitary(flags)
        t, p = circuit_permutation(res.base)
        assert [int(x) for x in t] == [int(np.argmax(u[:, i])) for i in range(32)]
        texp, pexp = circuit_permutation(res.expanded)
        for i in range(32):
            assert texp[4 * i] == 4 * int(np.argmax(u[:, i]))
            assert pexp[4 * i] == 1.0
        assert res.cnot_count == 2 * res.xor_rank
        assert res.expanded.metrics.nonlocal_cnot == res.cnot_count


class TestPairSwapFamily:
    def test_fixed_instance_report(self):
        rep = analyze_pair_swap_family(example2_flags())
        assert rep.sch_od == 3
        assert rep.ppr_upper == 3
        assert rep.rank_t == 3
        assert rep.xor_t.value == 2
        assert rep.binary_t.value == 3
        assert "Sch(U)" in rep.table()

    def test_all_zero_flags(self):
        rep = analyze_pair_swap_family(np.zeros((2, 3), dtype=int))
        assert rep.sch_od == 0
        assert rep.ppr_upper == 0
        assert max_abs(rep.unitary - np.eye(12)) == 0

    def test_single_row_all_ones(self):
        rep = analyze_pair_swap_family(np.ones((1, 3), dtype=int))
        assert rep.sch_u == 1
        assert rep.sch_od == 1
        assert rep.ppr_upper == 1
        assert rep.rank_t == 1

    @pytest.mark.parametrize("seed", range(6))
    def test_seeded_relations(self, seed):
        rng = np.random.default_rng(seed)
        flags = rng.integers(0, 2, size=(3, 4))
        rep = analyze_pair_swap_family(flags)
        assert rep.rank_t >= rep.sch_od
        assert abs(rep.sch_od - rep.sch_u) <= 1

    def test_unitary_is_permutation(self):
        u = pair_swap_family_unitary(example2_flags())
        assert (u.sum(axis=0) == 1).all() and (u.sum(axis=1) == 1).all()
