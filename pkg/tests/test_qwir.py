"""Basis-level IR: verifier, adjoint/predication rewrites, lambda lifting,
canonicalization, inlining, and the specialization closure."""

import math

import numpy as np
import pytest

from qbc.bases import Basis, BasisLiteral, BasisVector, BuiltinBasis, Prim, basis, lit
from qbc.qwir import (
    ANGLE, FnBuilder, QwBlock, QwFunc, QwModule, QwOp, VerifyError, bit,
    func, print_module, qubit, verify,
)
from qbc.qwir_passes import (
    SpecKey, adjoint_block, canonicalize_ir, count_calls,
    generate_specializations, inline, lift_lambdas, predicate_block,
    qubit_index_analysis, specialization_analysis,
)
from qbc.simulator import apply_unitary_at, span_projector, translation_unitary

STD, PM, IJ = Prim.STD, Prim.PM, Prim.IJ


# -- block unitary oracle -----------------------------------------------------


def block_unitary(fn: QwFunc, block: QwBlock) -> np.ndarray:
    """Brute-force unitary of a reversible block via translation matrices."""
    pos: dict[int, list[int]] = {}
    counter = 0
    for a in block.args:
        if fn.types[a].kind == "qubit":
            d = fn.types[a].dim
            pos[a] = list(range(counter, counter + d))
            counter += d
    n = counter
    u = np.eye(1 << n, dtype=complex)
    angles: dict[int, float] = {}
    for op in block.ops[:-1]:
        if op.kind == "fconst":
            angles[op.results[0]] = op.attrs["value"]
        elif op.kind == "qbtrans":
            from qbc.lower_gates import _resolve_basis

            b_in = _resolve_basis(op.attrs["b_in"], angles, op.operands)
            b_out = _resolve_basis(op.attrs["b_out"], angles, op.operands)
            mat = translation_unitary(b_in, b_out)
            u = apply_unitary_at(u, mat, pos[op.operands[0]], n)
            pos[op.results[0]] = pos[op.operands[0]]
        elif op.kind == "qbpack":
            combined = []
            for v in op.operands:
                combined.extend(pos[v])
            pos[op.results[0]] = combined
        elif op.kind == "qbunpack":
            src = pos[op.operands[0]]
            at = 0
            for r, s in zip(op.results, op.attrs["sizes"]):
                pos[r] = src[at : at + s]
                at += s
        else:
            raise AssertionError(f"oracle cannot handle {op.kind}")
    term = block.ops[-1]
    out_positions = []
    for v in term.operands:
        out_positions.extend(pos[v])
    # Renaming moves the qubit at input position out_positions[j] to output
    # slot j; realize it as a permutation matrix.
    if out_positions != list(range(n)):
        perm = np.zeros((1 << n, 1 << n))
        for x in range(1 << n):
            y = 0
            for j, p in enumerate(out_positions):
                if (x >> (n - 1 - p)) & 1:
                    y |= 1 << (n - 1 - j)
            perm[y, x] = 1
        u = perm @ u
    return u


def simple_fn(name="f", n=2, reversible=True) -> FnBuilder:
    b = FnBuilder(name, reversible)
    b.param(qubit(n))
    return b


def trans_op(b: FnBuilder, v: int, b_in: Basis, b_out: Basis) -> int:
    (r,) = b.emit("qbtrans", [v], [qubit(b_in.dim)],
                  {"b_in": b_in, "b_out": b_out})
    return r


def test_verify_ok_simple():
    b = simple_fn()
    v = trans_op(b, b.fn.params[0], basis(BuiltinBasis(STD, 2)),
                 basis(BuiltinBasis(PM, 2)))
    b.emit("ret", [v])
    fn = b.finish([qubit(2)])
    m = QwModule({"f": fn}, entry="f")
    verify(m)


def test_verify_rejects_double_use():
    b = simple_fn()
    v1 = trans_op(b, b.fn.params[0], basis(BuiltinBasis(STD, 2)),
                  basis(BuiltinBasis(PM, 2)))
    trans_op(b, b.fn.params[0], basis(BuiltinBasis(STD, 2)),
             basis(BuiltinBasis(STD, 2)))
    b.emit("ret", [v1])
    m = QwModule({"f": b.finish([qubit(2)])}, entry="f")
    with pytest.raises(VerifyError):
        verify(m)


def test_verify_rejects_span_mismatch():
    b = simple_fn(n=1)
    with pytest.raises(VerifyError):
        v = trans_op(b, b.fn.params[0], basis(lit("0")), basis(lit("1")))
        b.emit("ret", [v])
        verify(QwModule({"f": b.finish([qubit(1)])}, entry="f"))


# -- adjoint -------------------------------------------------------------------


def make_block(ops_spec, n) -> tuple[QwFunc, QwBlock]:
    """ops_spec: list of (positions, b_in, b_out) | ('perm', order)."""
    b = FnBuilder("blk", True)
    arg = b.param(qubit(n))
    singles = b.emit("qbunpack", [arg], [qubit(1)] * n, {"sizes": (1,) * n})
    wires = list(singles)
    for spec in ops_spec:
        if spec[0] == "perm":
            order = spec[1]
            wires = [wires[i] for i in order]
            continue
        positions, b_in, b_out = spec
        (packed,) = b.emit("qbpack", [wires[p] for p in positions],
                           [qubit(len(positions))])
        moved = trans_op(b, packed, b_in, b_out)
        outs = b.emit("qbunpack", [moved], [qubit(1)] * len(positions),
                      {"sizes": (1,) * len(positions)})
        for p, nv in zip(positions, outs):
            wires[p] = nv
    (repacked,) = b.emit("qbpack", wires, [qubit(n)])
    b.emit("ret", [repacked])
    fn = b.finish([qubit(2)])
    return fn, fn.block


def random_reversible_block(rng, n, with_renaming):
    specs = []
    for _ in range(int(rng.integers(1, 4))):
        k = int(rng.integers(1, min(n, 2) + 1))
        positions = list(rng.choice(n, size=k, replace=False))
        prim_in = Prim(rng.choice([STD, PM, IJ]))
        prim_out = Prim(rng.choice([STD, PM, IJ]))
        bits = [format(x, f"0{k}b") for x in range(1 << k)]
        order = list(bits)
        rng.shuffle(order)
        phase = float(rng.choice([0.0, math.pi / 2, -math.pi / 4]))
        vecs_in = tuple(
            BasisVector(prim_in, x, phase if i == 0 and phase else None)
            for i, x in enumerate(bits)
        )
        vecs_out = tuple(BasisVector(prim_out, x) for x in order)
        specs.append((positions, basis(BasisLiteral(vecs_in)),
                      basis(BasisLiteral(vecs_out))))
    if with_renaming:
        order = list(rng.permutation(n))
        specs.append(("perm", order))
    return make_block(specs, n)


def test_adjoint_simple_translation():
    fn, block = make_block(
        [([0, 1], basis(lit("00", "01", "10", "11")),
          basis(lit("01", "00", "11", "10")))], 2
    )
    adj = adjoint_block(fn, block)
    assert adj.ops[-1].kind == "ret"
    u = block_unitary(fn, block)
    ua = block_unitary(fn, adj)
    assert np.allclose(ua, u.conj().T, atol=1e-9)


def test_adjoint_swaps_bases():
    b = FnBuilder("f", True)
    arg = b.param(qubit(1))
    v = trans_op(b, arg, basis(BuiltinBasis(STD, 1)), basis(BuiltinBasis(PM, 1)))
    b.emit("ret", [v])
    fn = b.finish([qubit(1)])
    adj = adjoint_block(fn, fn.block)
    tr = [op for op in adj.ops if op.kind == "qbtrans"][0]
    assert tr.attrs["b_in"] == basis(BuiltinBasis(PM, 1))
    assert tr.attrs["b_out"] == basis(BuiltinBasis(STD, 1))


def test_adjoint_stationary_angle_stays_phase_negated():
    from qbc.bases import PhaseParam

    b = FnBuilder("f", True)
    arg = b.param(qubit(1))
    (theta,) = b.emit("fconst", [], [ANGLE], {"value": math.pi / 2})
    phased = basis(BasisLiteral((BasisVector(STD, "1", PhaseParam(0)),)))
    plain = basis(lit("1"))
    (r,) = b.emit("qbtrans", [arg, theta], [qubit(1)],
                  {"b_in": phased, "b_out": plain})
    b.emit("ret", [r])
    fn = b.finish([qubit(1)])
    adj = adjoint_block(fn, fn.block)
    kinds = [op.kind for op in adj.ops]
    assert "fconst" in kinds  # the constant survives in place
    u = block_unitary(fn, fn.block)
    ua = block_unitary(fn, adj)
    assert np.allclose(ua, u.conj().T, atol=1e-9)
    assert np.allclose(ua, np.diag([1, 1j]), atol=1e-9)


def test_adjoint_involution_and_inverse_random():
    rng = np.random.default_rng(7)
    for trial in range(40):
        n = int(rng.integers(1, 5))
        fn, block = random_reversible_block(rng, n, with_renaming=bool(trial % 2))
        u = block_unitary(fn, block)
        adj = adjoint_block(fn, block)
        ua = block_unitary(fn, adj)
        assert np.allclose(ua @ u, np.eye(1 << n), atol=1e-9)
        back = adjoint_block(fn, adj)
        assert np.allclose(block_unitary(fn, back), u, atol=1e-9)


def test_adjoint_rejects_measurement():
    b = FnBuilder("f", False)
    arg = b.param(qubit(1))
    (r,) = b.emit("qbmeas", [arg], [bit(1)], {"basis": basis(BuiltinBasis(STD, 1))})
    b.emit("ret", [r])
    fn = b.finish([bit(1)])
    from qbc.qwir_passes import PassError

    with pytest.raises(PassError):
        adjoint_block(fn, fn.block)


# -- qubit index analysis and predication --------------------------------------


def test_index_analysis_identity():
    fn, block = make_block([], 3)
    idx = qubit_index_analysis(fn, block)
    term = block.ops[-1]
    out = []
    for v in term.operands:
        out.extend(idx[v])
    assert out == [0, 1, 2]


def test_index_analysis_swap_last_two():
    fn, block = make_block([("perm", [0, 2, 1])], 3)
    idx = qubit_index_analysis(fn, block)
    out = []
    for v in block.ops[-1].operands:
        out.extend(idx[v])
    assert out == [0, 2, 1]


def test_index_analysis_through_pack_unpack():
    b = FnBuilder("f", True)
    arg = b.param(qubit(2))
    parts = b.emit("qbunpack", [arg], [qubit(1), qubit(1)], {"sizes": (1, 1)})
    (packed,) = b.emit("qbpack", parts, [qubit(2)])
    b.emit("ret", [packed])
    fn = b.finish([qubit(2)])
    idx = qubit_index_analysis(fn, fn.block)
    assert idx[packed] == (0, 1)


def pred_expected(pred_basis: Basis, u: np.ndarray) -> np.ndarray:
    p = span_projector(pred_basis)
    n = u.shape[0]
    return np.kron(p, u) + np.kron(np.eye(p.shape[0]) - p, np.eye(n))


@pytest.mark.parametrize("pred", [
    basis(lit("1")),
    basis(lit("11")),
    basis(lit("m")),
    basis(lit("01", "10")),
])
def test_predicate_block_formula(pred):
    fn, block = make_block(
        [([0, 1], basis(lit("00", "01", "10", "11")),
          basis(lit("10", "11", "01", "00")))], 2
    )
    u = block_unitary(fn, block)
    pb = predicate_block(fn, block, pred)
    upb = block_unitary(fn, pb)
    assert np.allclose(upb, pred_expected(pred, u), atol=1e-9)


def test_predicate_block_renaming_swap_unswap():
    # A four-qubit block whose last two qubits swap by renaming, predicated
    # on |111>: the compensation is one plain SWAP and one triply-controlled
    # SWAP.
    fn, block = make_block([("perm", [0, 1, 3, 2])], 4)
    pred = basis(lit("111"))
    pb = predicate_block(fn, block, pred)
    swap_ops = [op for op in pb.ops if op.kind == "qbtrans"]
    dims = sorted(op.attrs["b_in"].dim for op in swap_ops)
    assert dims == [2, 5]  # SWAP and pred+SWAP
    u = block_unitary(fn, block)
    upb = block_unitary(fn, pb)
    assert np.allclose(upb, pred_expected(pred, u), atol=1e-9)


def test_predicate_block_no_renaming_adds_no_swaps():
    fn, block = make_block(
        [([0], basis(lit("0", "1")), basis(lit("1", "0")))], 2
    )
    pb = predicate_block(fn, block, basis(lit("1")))
    # Only the predicated translation itself; no extra 2-qubit swap pairs.
    swaps = [op for op in pb.ops if op.kind == "qbtrans"
             and op.attrs["b_in"].dim == 2
             and op.attrs["b_in"].elements[-1] == lit("01", "10")]
    assert not swaps


def test_predicate_random_blocks():
    rng = np.random.default_rng(13)
    for trial in range(30):
        n = int(rng.integers(1, 4))
        fn, block = random_reversible_block(rng, n, with_renaming=bool(trial % 2))
        u = block_unitary(fn, block)
        pred_dim = int(rng.integers(1, 3))
        bits = [format(x, f"0{pred_dim}b") for x in range(1 << pred_dim)]
        count = int(rng.integers(1, 1 << pred_dim)) if pred_dim > 1 else 1
        chosen = sorted(rng.choice(bits, size=count, replace=False))
        pred = basis(BasisLiteral(tuple(BasisVector(STD, x) for x in chosen)))
        pb = predicate_block(fn, block, pred)
        upb = block_unitary(fn, pb)
        assert np.allclose(upb, pred_expected(pred, u), atol=1e-9)


# -- lifting, canonicalization, inlining ----------------------------------------


def _module_with_lambda() -> QwModule:
    b = FnBuilder("main", False)
    (q,) = b.emit("qbprep", [], [qubit(1)], {"prim": STD, "eigenbits": "0"})
    region = b.push_block([qubit(1)])
    inner = trans_op(b, region.args[0], basis(BuiltinBasis(STD, 1)),
                     basis(BuiltinBasis(PM, 1)))
    b.emit("yield", [inner])
    b.pop_block()
    (fv,) = b.emit("lambda", [], [func(1, "qubit", 1, True)], {}, [region])
    (out,) = b.emit("call_indirect", [fv, q], [qubit(1)])
    (bits,) = b.emit("qbmeas", [out], [bit(1)], {"basis": basis(BuiltinBasis(STD, 1))})
    b.emit("ret", [bits])
    return QwModule({"main": b.finish([bit(1)])}, entry="main")


def test_lift_and_canonicalize_to_direct_call():
    m = _module_with_lambda()
    verify(m)
    lift_lambdas(m)
    assert any(name.startswith("main__lambda") for name in m.functions)
    canonicalize_ir(m)
    kinds = [op.kind for op in m.functions["main"].block.ops]
    assert "call" in kinds and "call_indirect" not in kinds


def test_inline_leaves_no_calls():
    m = _module_with_lambda()
    lift_lambdas(m)
    canonicalize_ir(m)
    inline(m)
    verify(m)
    assert count_calls(m) == (0, 0)


def test_canonicalize_folds_adj_pred_chain():
    b = FnBuilder("main", False)
    (q,) = b.emit("qbprep", [], [qubit(3)], {"prim": STD, "eigenbits": "000"})
    (fv,) = b.emit("func_const", [], [func(1, "qubit", 1, True)], {"sym": "g"})
    (fadj,) = b.emit("func_adj", [fv], [func(1, "qubit", 1, True)])
    pred = basis(lit("10"))
    (fpred,) = b.emit("func_pred", [fadj], [func(3, "qubit", 3, True)],
                      {"basis": pred})
    (out,) = b.emit("call_indirect", [fpred, q], [qubit(3)])
    b.emit("qbdiscardz", [out], [])
    b.emit("ret", [])
    main = b.finish([])

    g_b = FnBuilder("g", True)
    arg = g_b.param(qubit(1))
    v = trans_op(g_b, arg, basis(BuiltinBasis(STD, 1)), basis(BuiltinBasis(PM, 1)))
    g_b.emit("ret", [v])
    m = QwModule({"main": main, "g": g_b.finish([qubit(1)])}, entry="main")
    canonicalize_ir(m)
    calls = [op for op in m.functions["main"].block.ops if op.kind == "call"]
    assert len(calls) == 1
    assert calls[0].attrs["sym"] == "g"
    assert calls[0].attrs["adj"] is True
    assert calls[0].attrs["pred"] == pred


def test_double_adjoint_cancels():
    b = FnBuilder("main", False)
    (q,) = b.emit("qbprep", [], [qubit(1)], {"prim": STD, "eigenbits": "0"})
    (fv,) = b.emit("func_const", [], [func(1, "qubit", 1, True)], {"sym": "g"})
    (f1,) = b.emit("func_adj", [fv], [func(1, "qubit", 1, True)])
    (f2,) = b.emit("func_adj", [f1], [func(1, "qubit", 1, True)])
    (out,) = b.emit("call_indirect", [f2, q], [qubit(1)])
    b.emit("qbdiscardz", [out], [])
    b.emit("ret", [])
    g_b = FnBuilder("g", True)
    arg = g_b.param(qubit(1))
    v = trans_op(g_b, arg, basis(BuiltinBasis(STD, 1)), basis(BuiltinBasis(STD, 1)))
    g_b.emit("ret", [v])
    m = QwModule({"main": b.finish([]), "g": g_b.finish([qubit(1)])}, entry="main")
    canonicalize_ir(m)
    calls = [op for op in m.functions["main"].block.ops if op.kind == "call"]
    assert calls and calls[0].attrs["adj"] is False


# -- specialization analysis -----------------------------------------------------


def _chain_module() -> QwModule:
    """f calls adj g; g calls h."""
    def leaf(name):
        b = FnBuilder(name, True)
        arg = b.param(qubit(1))
        v = trans_op(b, arg, basis(BuiltinBasis(STD, 1)), basis(BuiltinBasis(PM, 1)))
        b.emit("ret", [v])
        return b.finish([qubit(1)])

    h = leaf("h")
    g_b = FnBuilder("g", True)
    arg = g_b.param(qubit(1))
    (v,) = g_b.emit("call", [arg], [qubit(1)], {"sym": "h", "adj": False, "pred": None})
    g_b.emit("ret", [v])
    g = g_b.finish([qubit(1)])

    f_b = FnBuilder("f", True)
    arg = f_b.param(qubit(1))
    (v,) = f_b.emit("call", [arg], [qubit(1)], {"sym": "g", "adj": True, "pred": None})
    f_b.emit("ret", [v])
    f = f_b.finish([qubit(1)])

    main_b = FnBuilder("main", False)
    (q,) = main_b.emit("qbprep", [], [qubit(1)], {"prim": STD, "eigenbits": "0"})
    (out,) = main_b.emit("call", [q], [qubit(1)], {"sym": "f", "adj": False, "pred": None})
    (bits,) = main_b.emit("qbmeas", [out], [bit(1)],
                          {"basis": basis(BuiltinBasis(STD, 1))})
    main_b.emit("ret", [bits])
    main = main_b.finish([bit(1)])
    return QwModule({"main": main, "f": f, "g": g, "h": h}, entry="main")


def test_specialization_transitive_adjoint():
    m = _chain_module()
    keys = specialization_analysis(m)
    assert SpecKey("h", True, 0) in keys
    assert SpecKey("g", True, 0) in keys
    assert SpecKey("f", False, 0) in keys
    # Fixpoint: rerunning adds nothing.
    assert specialization_analysis(m) == keys


def test_specialization_entry_only():
    b = FnBuilder("main", False)
    (q,) = b.emit("qbprep", [], [qubit(1)], {"prim": STD, "eigenbits": "0"})
    (bits,) = b.emit("qbmeas", [q], [bit(1)], {"basis": basis(BuiltinBasis(STD, 1))})
    b.emit("ret", [bits])
    m = QwModule({"main": b.finish([bit(1)])}, entry="main")
    assert specialization_analysis(m) == {SpecKey("main", False, 0)}


def test_specialization_pred_of_adj_accumulates():
    m = _chain_module()
    # Predicate the call to f with a 2-qubit basis.
    main = m.functions["main"]
    b = FnBuilder("main2", False)
    (q,) = b.emit("qbprep", [], [qubit(3)], {"prim": STD, "eigenbits": "000"})
    (out,) = b.emit("call", [q], [qubit(3)],
                    {"sym": "f", "adj": False, "pred": basis(lit("00", "11"))})
    (bits,) = b.emit("qbmeas", [out], [bit(3)], {"basis": basis(BuiltinBasis(STD, 3))})
    b.emit("ret", [bits])
    m.functions["main"] = b.finish([bit(3)])
    m.functions["main"].name = "main"
    keys = specialization_analysis(m)
    assert SpecKey("f", False, 2) in keys
    assert SpecKey("g", True, 2) in keys
    assert SpecKey("h", True, 2) in keys


def test_generate_specializations_materializes_and_retargets():
    m = _chain_module()
    generated = generate_specializations(m)
    assert SpecKey("g", True, 0) in generated
    # All calls are now forward.
    for fn in m.functions.values():
        for op in fn.block.ops:
            if op.kind == "call":
                assert not op.attrs.get("adj") and op.attrs.get("pred") is None
    verify(m)
    # The adjoint specialization of h exists because g__adj calls it.
    assert any(name.startswith("h__adj") for name in m.functions)


def test_inline_preserves_distribution():
    from qbc.lower_gates import lower_module
    from qbc.run import distribution

    m1 = _module_with_lambda()
    lift_lambdas(m1)
    canonicalize_ir(m1)
    inline(m1)
    d1 = distribution(lower_module(m1))
    # Compare against interpreting the uninlined module through generate +
    # inline-free lowering only after manual inline here; the inlined path
    # is the reference.
    assert abs(sum(d1.values()) - 1.0) < 1e-12
    assert d1 == {"0": pytest.approx(0.5), "1": pytest.approx(0.5)}
