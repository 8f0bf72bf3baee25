"""Translation synthesis against the brute-force translation unitary."""

import math
from itertools import permutations

import numpy as np
import pytest

from qbc.ast_nodes import (
    ClassicalFn, CBin, CIndex, CLit, CReduce, CVar, DimLit, ParamNode, TypeNode,
)
from qbc.bases import Basis, BasisLiteral, BasisVector, BuiltinBasis, Prim, basis, lit
from qbc.qcirc import GateKind
from qbc.simulator import translation_unitary, unitary_of
from qbc.synth import (
    AlignedPair, align, collect_vector_phases, emit_standardization,
    factor_ordered, iqft_gates, lower_translation, pair_permutation,
    plan_standardization, qft_gates, synth_classical, synth_permutation,
    StdEntry,
)

STD, PM, IJ, FOURIER = Prim.STD, Prim.PM, Prim.IJ, Prim.FOURIER


def u_of(gates, n):
    return unitary_of(gates, n)


def dft(n):
    size = 1 << n
    w = np.exp(2j * np.pi / size)
    return np.array([[w ** (j * k) for k in range(size)] for j in range(size)]) / math.sqrt(size)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_qft_matches_dft(n):
    assert np.allclose(u_of(qft_gates(list(range(n))), n), dft(n), atol=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_iqft_is_adjoint(n):
    assert np.allclose(
        u_of(iqft_gates(list(range(n))), n), dft(n).conj().T, atol=1e-9
    )


def test_plan_conditional_and_unconditional():
    # {'p','m'} + ij >> {'p','m'} + pm
    b_in = basis(lit("p", "m"), BuiltinBasis(IJ, 1))
    b_out = basis(lit("p", "m"), BuiltinBasis(PM, 1))
    lstd, rstd = plan_standardization(b_in, b_out)
    assert [(e.prim, e.dim, e.conditional) for e in lstd.entries] == [
        (PM, 1, False), (IJ, 1, True)
    ]
    assert [(e.prim, e.dim, e.conditional) for e in rstd.entries] == [
        (PM, 1, False), (PM, 1, True)
    ]


def test_plan_inseparable_fourier():
    # std + fourier[3] >> fourier[3] + std
    b_in = basis(BuiltinBasis(STD, 1), BuiltinBasis(FOURIER, 3))
    b_out = basis(BuiltinBasis(FOURIER, 3), BuiltinBasis(STD, 1))
    lstd, rstd = plan_standardization(b_in, b_out)
    assert [(e.prim, e.dim, e.conditional) for e in lstd.entries] == [
        (STD, 1, True), (FOURIER, 3, True)
    ]
    assert [(e.prim, e.dim, e.conditional) for e in rstd.entries] == [
        (FOURIER, 3, True), (STD, 1, True)
    ]
    assert [e.offset for e in lstd.entries] == [0, 1]
    assert [e.offset for e in rstd.entries] == [0, 3]


def test_plan_trivial_std():
    b = basis(BuiltinBasis(STD, 2))
    lstd, rstd = plan_standardization(b, b)
    assert [(e.prim, e.dim, e.conditional) for e in lstd.entries] == [(STD, 2, False)]
    assert lstd == rstd


def test_plan_symmetry_of_unconditional_entries():
    b_in = basis(lit("p", "m"), BuiltinBasis(IJ, 2), lit("0"))
    b_out = basis(lit("m", "p"), BuiltinBasis(PM, 2), lit("0"))
    lstd, rstd = plan_standardization(b_in, b_out)
    lu = [(e.prim, e.dim) for e in lstd.entries if not e.conditional]
    ru = [(e.prim, e.dim) for e in rstd.entries if not e.conditional]
    assert lu == ru


def test_align_paper_case():
    # {'1'} + std >> {'11','10'}
    b_in = basis(lit("1"), BuiltinBasis(STD, 1))
    b_out = basis(lit("11", "10"))
    pairs = align(b_in, b_out)
    assert len(pairs) == 2
    assert pairs[0].b_in == lit("1") and pairs[0].b_out == lit("1")
    assert pairs[1].b_in == lit("0", "1") and pairs[1].b_out == lit("1", "0")
    assert pairs[0].is_predicate and not pairs[1].is_predicate


def test_align_merges_when_unfactorable():
    # {'0','1'} + {'0','1'} >> {'00','10','01','11'}
    b_in = basis(lit("0", "1"), lit("0", "1"))
    b_out = basis(lit("00", "10", "01", "11"))
    pairs = align(b_in, b_out)
    assert len(pairs) == 1
    assert pairs[0].dim == 2
    assert pairs[0].b_in == lit("00", "01", "10", "11")
    assert pairs[0].b_out == lit("00", "10", "01", "11")


def test_align_identity_builtin():
    b = basis(BuiltinBasis(STD, 2))
    pairs = align(b, b)
    assert len(pairs) == 1
    assert pair_permutation(pairs[0]) is None


def test_factor_ordered_respects_order():
    ok = factor_ordered(lit("00", "01", "10", "11"), 1)
    assert ok is not None and ok[0] == lit("0", "1") and ok[1] == lit("0", "1")
    assert factor_ordered(lit("00", "11", "01", "10"), 1) is None


def test_synth_permutation_identity():
    assert synth_permutation([0, 1, 2, 3]) == []


def test_synth_permutation_not():
    gates = synth_permutation([1, 0])
    assert len(gates) == 1 and gates[0].kind is GateKind.X


def test_synth_permutation_swap_states():
    gates = synth_permutation([0, 2, 1, 3])
    want = np.eye(4)[[0, 2, 1, 3]]
    assert np.allclose(u_of(gates, 2), want)


@pytest.mark.parametrize("size", [2, 4, 8])
def test_synth_permutation_exhaustive_small(size):
    n = size.bit_length() - 1
    import itertools

    pool = permutations(range(size))
    if size == 8:
        pool = list(itertools.islice(pool, 0, None, 127))  # sampled subset
    for perm in pool:
        gates = synth_permutation(list(perm))
        u = u_of(gates, n)
        want = np.zeros((size, size))
        for x, y in enumerate(perm):
            want[y, x] = 1
        assert np.allclose(u, want, atol=1e-9), perm


def test_synth_permutation_basis_states_exact():
    rng = np.random.default_rng(11)
    for n in range(1, 7):
        perm = list(rng.permutation(1 << n))
        gates = synth_permutation(perm)
        if n <= 6:
            u = u_of(gates, n) if n <= 10 else None
            for x in range(1 << n):
                col = u[:, x]
                assert abs(col[perm[x]] - 1.0) < 1e-9


def _check_translation(b_in: Basis, b_out: Basis):
    got = u_of(lower_translation(b_in, b_out), b_in.dim)
    want = translation_unitary(b_in, b_out)
    assert np.allclose(got, want, atol=1e-9), f"{b_in} >> {b_out}"


def test_translation_swap():
    _check_translation(basis(lit("01", "10")), basis(lit("10", "01")))
    got = u_of(lower_translation(basis(lit("01", "10")), basis(lit("10", "01"))), 2)
    assert np.allclose(got, np.eye(4)[[0, 2, 1, 3]], atol=1e-9)


def test_translation_conditional_standardization():
    # Fully-spanning first element: unconditional everywhere.
    _check_translation(
        basis(lit("p", "m"), BuiltinBasis(IJ, 1)),
        basis(lit("p", "m"), BuiltinBasis(PM, 1)),
    )
    # Predicated variant: conditional entries become controlled gates.
    _check_translation(
        basis(lit("m"), BuiltinBasis(IJ, 1)),
        basis(lit("m"), BuiltinBasis(PM, 1)),
    )


def test_translation_fourier_appendix_case():
    _check_translation(
        basis(BuiltinBasis(STD, 1), BuiltinBasis(FOURIER, 3)),
        basis(BuiltinBasis(FOURIER, 3), BuiltinBasis(STD, 1)),
    )


def test_translation_alignment_case():
    _check_translation(basis(lit("1"), BuiltinBasis(STD, 1)), basis(lit("11", "10")))


def test_translation_phase_z():
    _check_translation(basis(lit(("1", math.pi))), basis(lit("1")))
    got = u_of(lower_translation(basis(lit(("1", math.pi))), basis(lit("1"))), 1)
    assert np.allclose(got, np.diag([1, -1]), atol=1e-9)


def test_translation_diffuser():
    b_in = basis(lit(("mmm", math.pi)))
    b_out = basis(lit("mmm"))
    got = u_of(lower_translation(b_in, b_out), 3)
    minus = np.array([1, -1]) / math.sqrt(2)
    mmm = np.kron(np.kron(minus, minus), minus)
    want = np.eye(8) - 2 * np.outer(mmm, mmm)
    assert np.allclose(got, want, atol=1e-9)
    _check_translation(b_in, b_out)


def test_translation_identity_is_empty_or_identity():
    for b in [basis(BuiltinBasis(STD, 2)), basis(BuiltinBasis(PM, 1)),
              basis(BuiltinBasis(FOURIER, 2))]:
        got = u_of(lower_translation(b, b), b.dim)
        assert np.allclose(got, np.eye(1 << b.dim), atol=1e-9)


def test_translation_predicated_phase():
    # {'1'} + {'0'@pi,'1'} >> {'1'} + {'0','1'}: phase only inside the
    # predicate subspace.
    b_in = basis(lit("1"), lit(("0", math.pi), "1"))
    b_out = basis(lit("1"), lit("0", "1"))
    _check_translation(b_in, b_out)
    got = u_of(lower_translation(b_in, b_out), 2)
    assert np.allclose(got, np.diag([1, 1, -1, 1]), atol=1e-9)


def test_translation_pm_predicate():
    # Predicate written in the pm basis standardizes unconditionally.
    _check_translation(
        basis(lit("m"), BuiltinBasis(STD, 1)),
        basis(lit("m"), lit("1", "0")),
    )


def test_translation_partial_order_swap_with_predicate():
    # Non-fully-spanning pair whose sides differ in order acts as its own
    # permutation restricted to the span.
    _check_translation(
        basis(lit("1"), lit("01", "10")),
        basis(lit("1"), lit("10", "01")),
    )


def test_translation_multi_vector_predicate():
    _check_translation(
        basis(lit("01", "10"), lit("0", "1")),
        basis(lit("01", "10"), lit("1", "0")),
    )


def test_translation_fourier_roundtrip():
    _check_translation(
        basis(BuiltinBasis(FOURIER, 2)), basis(BuiltinBasis(STD, 2))
    )
    _check_translation(
        basis(BuiltinBasis(STD, 2)), basis(BuiltinBasis(FOURIER, 2))
    )


def test_translation_ij_cases():
    _check_translation(basis(BuiltinBasis(IJ, 1)), basis(BuiltinBasis(STD, 1)))
    _check_translation(basis(BuiltinBasis(IJ, 2)), basis(BuiltinBasis(PM, 2)))
    _check_translation(basis(lit("ij", "ji")), basis(lit("ji", "ij")))


# -- randomized corpus -------------------------------------------------------


def _random_welltyped_pair(rng) -> tuple[Basis, Basis]:
    """A random well-typed translation of dim <= 5 over all four prims."""
    dim = int(rng.integers(1, 6))
    phases = [0.0, math.pi, math.pi / 2, -math.pi / 2, math.pi / 4, -math.pi / 4]

    def random_side(structure):
        elements = []
        for kind, d, payload in structure:
            if kind == "builtin":
                prim = rng.choice([STD, PM, IJ, FOURIER])
                elements.append(BuiltinBasis(Prim(prim), d))
            elif kind == "full":
                prim = Prim(rng.choice([STD, PM, IJ]))
                bits = [format(k, f"0{d}b") for k in range(1 << d)]
                rng.shuffle(bits)
                vecs = []
                for bstr in bits:
                    phase = float(rng.choice(phases)) or None
                    vecs.append(BasisVector(prim, bstr, phase))
                elements.append(BasisLiteral(tuple(vecs)))
            else:  # partial literal; the vector *set* is shared via payload
                prim, bits = payload
                order = list(bits)
                rng.shuffle(order)
                vecs = []
                for bstr in order:
                    phase = float(rng.choice(phases)) or None
                    vecs.append(BasisVector(prim, bstr, phase))
                elements.append(BasisLiteral(tuple(vecs)))
        return Basis(tuple(elements))

    structure = []
    left = dim
    while left > 0:
        d = int(rng.integers(1, min(left, 3) + 1))
        kind = rng.choice(["builtin", "full", "partial"], p=[0.3, 0.4, 0.3])
        payload = None
        if kind == "partial":
            if d > 2:
                d = 2
            prim = Prim(rng.choice([STD, PM, IJ]))
            bits = [format(k, f"0{d}b") for k in range(1 << d)]
            count = int(rng.integers(1, (1 << d)))
            chosen = list(rng.choice(bits, size=count, replace=False))
            payload = (prim, chosen)
        structure.append((kind, d, payload))
        left -= d
    return random_side(structure), random_side(structure)


def test_translation_randomized_corpus():
    rng = np.random.default_rng(2024)
    from qbc.bases import check_span_equivalence

    checked = 0
    while checked < 120:
        b_in, b_out = _random_welltyped_pair(rng)
        if check_span_equivalence(b_in, b_out) is not None:
            continue
        _check_translation(b_in, b_out)
        checked += 1


# -- classical synthesis ------------------------------------------------------


def _cfn(name, widths, ret, body):
    params = tuple(
        ParamNode(f"x{i}", TypeNode("bit", DimLit(w))) for i, w in enumerate(widths)
    )
    return ClassicalFn(name, (), (), params, TypeNode("bit", DimLit(ret)), body)


def _truth_check(cfn, fn_py, n, k):
    gates, got_n, got_k, anc = synth_classical(cfn, "xor")
    assert (got_n, got_k) == (n, k)
    total = n + k + anc
    u = u_of(gates, total)
    for x in range(1 << n):
        for y0 in range(1 << k):
            col = (x << (k + anc)) | (y0 << anc)
            vec = u[:, col]
            want = (x << (k + anc)) | ((y0 ^ fn_py(x)) << anc)
            assert abs(vec[want] - 1.0) < 1e-9, (x, y0)


def test_classical_identity():
    body = CVar("x0")
    cfn = _cfn("ident", [3], 3, body)
    _truth_check(cfn, lambda x: x, 3, 3)
    gates, *_ = synth_classical(cfn, "xor")
    assert all(gt.kind is GateKind.X and len(gt.controls) == 1 for gt in gates)


def test_classical_parity():
    cfn = _cfn("par", [4], 1, CReduce("xor", CVar("x0")))
    _truth_check(cfn, lambda x: bin(x).count("1") & 1, 4, 1)


def test_classical_and_tree():
    cfn = _cfn("conj", [3], 1, CReduce("and", CVar("x0")))
    _truth_check(cfn, lambda x: int(x == 7), 3, 1)


def test_classical_bv_inner_product_structure():
    # dot(s, x) with s = 101 folds to CNOTs from bits 0 and 2; no ancillas.
    body = CReduce("xor", CBin("&", CLit("101"), CVar("x0")))
    cfn = _cfn("dot", [3], 1, body)
    gates, n, k, anc = synth_classical(cfn, "xor")
    assert anc == 0
    assert [gt.controls[0] for gt in gates] == [0, 2]
    assert all(gt.targets == (3,) for gt in gates)
    _truth_check(cfn, lambda x: (bin(x & 0b101).count("1")) & 1, 3, 1)


def test_classical_sign_mode_cz():
    # f(x) = x0 & x1 in sign mode acts as CZ.
    body = CBin("&", CIndex(CVar("x0"), DimLit(0)), CIndex(CVar("x0"), DimLit(1)))
    cfn = _cfn("andf", [2], 1, body)
    gates, n, k, anc = synth_classical(cfn, "sign")
    u = u_of(gates, 2 + anc)
    want_small = np.diag([1, 1, 1, -1])
    got = u[:: 1 << anc, :: 1 << anc] if anc else u
    # Ancillas start and end in |0>, so the top-left block is the action.
    cols = np.arange(4) << anc
    got = u[np.ix_(cols, cols)]
    assert np.allclose(got, want_small, atol=1e-9)


def test_classical_or_demorgan():
    body = CBin("|", CIndex(CVar("x0"), DimLit(0)), CIndex(CVar("x0"), DimLit(1)))
    cfn = _cfn("orf", [2], 1, body)
    _truth_check(cfn, lambda x: int(x != 0), 2, 1)


def test_classical_slices_and_repeat():
    from qbc.ast_nodes import CSlice, CRepeat, CIndex

    body = CBin("^", CSlice(CVar("x0"), DimLit(0), DimLit(2)),
                CRepeat(CIndex(CVar("x0"), DimLit(2)), DimLit(2)))
    cfn = _cfn("mix", [3], 2, body)

    def fpy(x):
        bits = format(x, "03b")
        lo = bits[:2]
        rep = bits[2] * 2
        return int(lo, 2) ^ int(rep, 2)

    _truth_check(cfn, fpy, 3, 2)
