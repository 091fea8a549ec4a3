"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 verification failure,
3 infeasible input or precondition error.

The gate list in circuit files is in product order (first gate applied last);
``decompose`` verifies its own output before writing unless --no-verify is
given.  The default seed comes from the SANDWICH_SEED environment variable.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import codecs, generators
from .codecs import CodecError
from .gateir import CircuitError, verify_decomposition
from .matcore import InfeasibleError, PreconditionError
from .multiparty import decompose_4party, decompose_multiparty
from .permdecomp import ComplexPermutation, decompose_multiparty_perm, decompose_perm3
from .protocols import (
    emit_backup_protocol,
    emit_transfer_protocol,
    emit_xor_protocol,
    pair_swap_family_unitary,
    pp_expansion,
    rank_toolkit,
)
from .sandwich import (
    DegenerateRankTwoError,
    decompose_2xd_aform,
    decompose_bcu3,
    decompose_sandwich,
)
from .schmidt import operator_schmidt
from .stdgates import compile_perm_to_cnot_type, compile_to_standard

GEN_KINDS = ("haar", "perm", "swap", "example1", "example2", "sec6-swap-sandwich")
METHODS = (
    "sandwich",
    "aform",
    "bcu3",
    "perm3",
    "multi",
    "party4",
    "std",
    "std-cnot",
    "lemma7",
    "xor-protocol",
    "transfer",
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2
EXIT_INFEASIBLE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _default_seed() -> int:
    return int(os.environ.get("SANDWICH_SEED", "0"))


def build_parser() -> _Parser:
    p = _Parser(prog="gatedecomp")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance matrix file")
    g.add_argument("--kind", choices=GEN_KINDS, required=True)
    g.add_argument("--dims", type=int, nargs="*", default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--blocks", type=str, default=None,
                   help="comma-separated diagonal 0/1 specs (example1)")
    g.add_argument("-o", "--output", required=True)

    d = sub.add_parser("decompose", help="decompose a matrix file into a circuit")
    d.add_argument("--method", choices=METHODS, required=True)
    d.add_argument("-i", "--input", required=True)
    d.add_argument("-o", "--output", required=True)
    d.add_argument("--tol", type=float, default=1e-8)
    d.add_argument("--no-verify", action="store_true")

    v = sub.add_parser("verify", help="verify a circuit against a matrix file")
    v.add_argument("-u", "--unitary", required=True)
    v.add_argument("-c", "--circuit", required=True)
    v.add_argument("--tol", type=float, default=1e-8)

    s = sub.add_parser("schmidt", help="operator-Schmidt rank across a cut")
    s.add_argument("-i", "--input", required=True)
    s.add_argument("--cut", type=int, default=1,
                   help="number of leading parties on the A side")

    r = sub.add_parser("rank", help="rank analysis of a binary matrix file")
    r.add_argument("-i", "--input", required=True)
    r.add_argument("--kind", choices=("rank", "xor", "binary", "nonneg"), required=True)
    r.add_argument("-o", "--output", default=None,
                   help="write the report with its certificate as JSON")
    return p


def _parse_blocks(spec: str) -> np.ndarray:
    rows = []
    for part in spec.split(","):
        part = part.strip()
        if not part or any(ch not in "01" for ch in part):
            raise PreconditionError(f"bad block spec {part!r}; expected 0/1 strings")
        rows.append([int(ch) for ch in part])
    if len({len(r) for r in rows}) != 1:
        raise PreconditionError("all blocks must have the same length")
    return np.array(rows, dtype=np.int64)


def _cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    kind = args.kind
    if kind == "haar":
        dims = tuple(args.dims or (2, 2))
        u = generators.haar_unitary(math.prod(dims), seed)
        codecs.save_matrix_file(args.output, u, dims, "unitary")
    elif kind == "perm":
        dims = tuple(args.dims or (2, 2))
        cp = generators.random_permutation(dims, seed)
        codecs.save_matrix_file(args.output, cp.matrix(), dims, "permutation")
    elif kind == "swap":
        dims = tuple(args.dims or (2, 2))
        if len(dims) != 2 or dims[0] != dims[1]:
            raise PreconditionError("swap needs --dims d d")
        codecs.save_matrix_file(
            args.output, generators.swap_unitary(dims[0]), dims, "permutation"
        )
    elif kind == "example1":
        if not args.blocks:
            raise PreconditionError("example1 needs --blocks")
        flags = _parse_blocks(args.blocks)
        u = pair_swap_family_unitary(flags)
        codecs.save_matrix_file(
            args.output, u.astype(complex), (2 * flags.shape[0], flags.shape[1]),
            "permutation",
        )
    elif kind == "example2":
        flags = generators.example2_flags()
        u = pair_swap_family_unitary(flags)
        codecs.save_matrix_file(args.output, u.astype(complex), (6, 3), "permutation")
    elif kind == "sec6-swap-sandwich":
        d = (args.dims or [3])[0]
        u, circuit, dims = generators.swap_conjugated_unitary(d, seed)
        codecs.save_matrix_file(args.output, u, dims, "unitary")
        codecs.save_circuit_file(args.output + ".circuit.json", circuit)
        print(f"companion circuit written to {args.output}.circuit.json")
    print(f"wrote {args.output}")
    return EXIT_OK


def _as_perm(mf: codecs.MatrixFile) -> ComplexPermutation:
    if mf.kind not in ("permutation", "complexPermutation"):
        raise PreconditionError(f"method requires a permutation input, got {mf.kind!r}")
    return ComplexPermutation.from_matrix(mf.matrix, mf.dims)


def _flags_from_family(mf: codecs.MatrixFile) -> np.ndarray:
    """Recover the flag matrix from a pair-swap-family permutation file."""
    dims = mf.dims
    if len(dims) != 2 or dims[0] % 2:
        raise PreconditionError("family input must be bipartite with even dA")
    m, db = dims[0] // 2, dims[1]
    u = np.round(np.real(mf.matrix)).astype(np.int64)
    flags = np.zeros((m, db), dtype=np.int64)
    for i in range(m):
        for b in range(db):
            flags[i, b] = u[(2 * i) * db + b, (2 * i + 1) * db + b]
    if not np.array_equal(pair_swap_family_unitary(flags), u):
        raise PreconditionError("input is not of the flagged pair-swap family form")
    return flags


def _cmd_decompose(args) -> int:
    mf = codecs.load_matrix_file(args.input)
    dims = mf.dims
    u = mf.matrix
    method = args.method
    target = u
    target_dims = dims

    if method in ("sandwich", "aform", "bcu3", "std"):
        if len(dims) != 2:
            raise PreconditionError(f"{method} expects a bipartite dims list")
        da, db = dims
        if method == "sandwich":
            circuit = decompose_sandwich(u, da, db).circuit
        elif method == "aform":
            if da != 2:
                raise PreconditionError("aform requires dA = 2")
            circuit = decompose_2xd_aform(u, db)
        elif method == "bcu3":
            circuit = decompose_bcu3(u, da, db).circuit
        else:
            mode = "complexPerm" if mf.kind in ("permutation", "complexPermutation") else "general"
            circuit = compile_to_standard(u, da, db, mode).circuit
    elif method == "perm3":
        circuit = decompose_perm3(_as_perm(mf)).circuit
    elif method == "multi":
        if len(dims) == 2 and mf.kind in ("permutation", "complexPermutation"):
            circuit = decompose_perm3(_as_perm(mf)).circuit
        elif mf.kind in ("permutation", "complexPermutation"):
            circuit = decompose_multiparty_perm(_as_perm(mf))
        else:
            circuit = decompose_multiparty(u, dims).circuit
    elif method == "party4":
        circuit = decompose_4party(u, dims).circuit
    elif method == "std-cnot":
        if mf.kind != "permutation":
            raise PreconditionError("std-cnot requires a plain permutation input")
        circuit = compile_perm_to_cnot_type(_as_perm(mf)).circuit
    elif method == "lemma7":
        if mf.kind != "permutation":
            raise PreconditionError("lemma7 requires a plain permutation input")
        da, db = dims
        perm = np.round(np.real(u)).astype(np.int64)
        res = emit_backup_protocol(perm, pp_expansion(perm, da, db), da, db)
        circuit = res.expanded
    elif method == "xor-protocol":
        flags = _flags_from_family(mf)
        circuit = emit_xor_protocol(flags).expanded
    elif method == "transfer":
        da, db = dims
        res = emit_transfer_protocol(u, da, db)
        circuit = res.circuit
        target = res.embedded
        target_dims = res.embedded_dims
        codecs.save_matrix_file(
            args.output + ".target.json", res.embedded, res.embedded_dims, "unitary"
        )
        print(f"embedded target written to {args.output}.target.json")
    else:  # pragma: no cover
        raise PreconditionError(f"unhandled method {method!r}")

    if not args.no_verify:
        report = verify_decomposition(target, circuit, tol=args.tol, classify=False)
        if not report.passed:
            print(
                f"verification FAILED: max_error={report.max_error:.3e} "
                f"ancilla_restored={report.ancilla_restored}",
                file=sys.stderr,
            )
            return EXIT_VERIFY
        print(f"verified: max_error={report.max_error:.3e}")
    codecs.save_circuit_file(args.output, circuit)
    print(f"wrote {args.output}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .gateir import recompute_metrics

    mf = codecs.load_matrix_file(args.unitary)
    circuit = codecs.load_circuit_file(args.circuit)
    small = circuit.space.total_dim <= 64
    report = verify_decomposition(mf.matrix, circuit, tol=args.tol, classify=small)
    stored = circuit.metrics
    consistent = recompute_metrics(circuit) == stored
    counts = ", ".join(f"{k}={v}" for k, v in report.gate_counts)
    print(f"metrics_ok     {consistent}")
    print(f"max_error      {report.max_error:.3e}")
    print(f"leakage        {report.leakage:.3e}")
    print(f"ancillas_ok    {report.ancilla_restored}")
    print(f"gate_counts    {counts}")
    print(f"nonlocal_cnot  {report.nonlocal_cnot}")
    if report.classifications:
        for i, cl in enumerate(report.classifications):
            print(
                f"  gate {i}: {cl.kind} ctrlA={cl.controlled_from_a} "
                f"ctrlB={cl.controlled_from_b} schmidt={cl.schmidt_rank}"
            )
    if not report.passed:
        print("verification FAILED", file=sys.stderr)
        return EXIT_VERIFY
    print("verification OK")
    return EXIT_OK


def _cmd_schmidt(args) -> int:
    mf = codecs.load_matrix_file(args.input)
    dims = mf.dims
    if not 1 <= args.cut < len(dims):
        raise PreconditionError(f"--cut must be in [1, {len(dims) - 1}]")
    da = math.prod(dims[: args.cut])
    db = math.prod(dims[args.cut :])
    dec = operator_schmidt(mf.matrix, da, db)
    print(f"schmidt_rank {dec.rank}")
    print("coefficients " + " ".join(f"{c:.12g}" for c in dec.coefficients))
    return EXIT_OK


def _certificate_obj(report):
    terms = []
    for item in report.certificate:
        u, v = item
        terms.append(
            {
                "left": [float(x) for x in np.asarray(u, dtype=float)],
                "right": [float(x) for x in np.asarray(v, dtype=float)],
            }
            if not isinstance(u, tuple)
            else {"rows": list(u), "cols": list(v)}
        )
    return terms


def _cmd_rank(args) -> int:
    b = codecs.load_binary_file(args.input)
    report = rank_toolkit(b, args.kind)
    if report.exact:
        print(f"{args.kind} {report.lower}")
    else:
        print(f"{args.kind} interval [{report.lower}, {report.upper}]")
    print(f"certificate_terms {len(report.certificate)}")
    if args.output:
        obj = {
            "kind": report.kind,
            "lower": report.lower,
            "upper": report.upper,
            "exact": report.exact,
            "certificate": _certificate_obj(report),
        }
        codecs.atomic_write(args.output, codecs.dumps_canonical(obj))
        print(f"wrote {args.output}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "decompose":
            return _cmd_decompose(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "schmidt":
            return _cmd_schmidt(args)
        if args.command == "rank":
            return _cmd_rank(args)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (PreconditionError, InfeasibleError, DegenerateRankTwoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (CodecError, CircuitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
