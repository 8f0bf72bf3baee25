"""Gate-level IR verifier, peephole rules, and multi-control decomposition."""

import math

import numpy as np
import pytest

from qbc.qcirc import (
    Gate, GateKind, QCircFn, QCircModule, QOp, g, parse_qcirc, print_qcirc,
    verify_circuit, CircuitError,
)
from qbc.peephole import (
    ccix_gates, ccx_gates, decompose_multicontrol, peephole,
)
from qbc.run import gates_to_fn, module_unitary
from qbc.simulator import unitary_of

H, X, Z, S, SDG, T, TDG, P, SWAP = (
    GateKind.H, GateKind.X, GateKind.Z, GateKind.S, GateKind.SDG,
    GateKind.T, GateKind.TDG, GateKind.P, GateKind.SWAP,
)


def fn_module(gates, n) -> QCircModule:
    fn = gates_to_fn("main", n, gates)
    return QCircModule({"main": fn}, "main")


def gate_count(m) -> int:
    return m.entry_fn.count_gates()


def unitary_of_module(m, n):
    return module_unitary(m.entry_fn)


def test_verify_rejects_double_use():
    fn = QCircFn("f", qubit_params=(0,))
    fn.next_id = 1
    fn.ops = [
        QOp("gate", (0,), (1,), gate=H),
        QOp("gate", (0,), (2,), gate=H),
        QOp("qfree", (1,)), QOp("qfree", (2,)),
    ]
    with pytest.raises(CircuitError):
        verify_circuit(QCircModule({"f": fn}, "f"))


def test_verify_rejects_dangling_qubit():
    fn = QCircFn("f")
    fn.ops = [QOp("qalloc", results=(0,)), QOp("ret", ())]
    fn.next_id = 1
    with pytest.raises(CircuitError):
        verify_circuit(QCircModule({"f": fn}, "f"))


def test_verify_rejects_control_equals_target():
    with pytest.raises(AssertionError):
        g(X, 0, controls=(0,))


def test_peephole_hh_cancels():
    m = fn_module([g(H, 0), g(H, 0)], 1)
    peephole(m)
    assert gate_count(m) == 0


def test_peephole_hxh_to_z():
    m = fn_module([g(H, 0), g(X, 0), g(H, 0)], 1)
    peephole(m)
    fn = m.entry_fn
    kinds = [op.gate for op in fn.ops if op.kind == "gate"]
    assert kinds == [Z]


def test_peephole_hzh_to_x():
    m = fn_module([g(H, 0), g(Z, 0), g(H, 0)], 1)
    peephole(m)
    kinds = [op.gate for op in m.entry_fn.ops if op.kind == "gate"]
    assert kinds == [X]


def test_peephole_h_cx_h_to_cz():
    m = fn_module([g(H, 1), g(X, 1, controls=(0,)), g(H, 1)], 2)
    before = unitary_of_module(m, 2)
    peephole(m)
    kinds = [(op.gate, op.num_controls) for op in m.entry_fn.ops if op.kind == "gate"]
    assert kinds == [(Z, 1)]
    assert np.allclose(before, unitary_of_module(m, 2), atol=1e-9)


def test_peephole_s_sdg_cancels():
    m = fn_module([g(S, 0), g(SDG, 0)], 1)
    peephole(m)
    assert gate_count(m) == 0


def test_peephole_phase_merge():
    m = fn_module([g(P, 0, param=0.3), g(P, 0, param=0.5)], 1)
    peephole(m)
    ops = [op for op in m.entry_fn.ops if op.kind == "gate"]
    assert len(ops) == 1 and abs(ops[0].param - 0.8) < 1e-12


def test_peephole_phase_cancel():
    m = fn_module([g(P, 0, param=0.4), g(P, 0, param=-0.4)], 1)
    peephole(m)
    assert gate_count(m) == 0


def test_peephole_keeps_distinct_controls():
    m = fn_module([g(X, 1, controls=(0,)), g(X, 1, controls=(2,))], 3)
    peephole(m)
    assert gate_count(m) == 2


def test_relaxed_minus_target_rule():
    # qalloc -> X -> H -> CCX target -> H -> X -> qfreez  becomes a CZ.
    fn = QCircFn("main")
    a = fn.new_id()
    q0, q1 = fn.new_id(), fn.new_id()
    fn.qubit_params = (q0, q1)
    ids = [fn.new_id() for _ in range(8)]
    fn.ops = [
        QOp("qalloc", results=(a,)),
        QOp("gate", (a,), (ids[0],), gate=X),
        QOp("gate", (ids[0],), (ids[1],), gate=H),
        QOp("gate", (q0, q1, ids[1]), (ids[2], ids[3], ids[4]), gate=X,
            num_controls=2),
        QOp("gate", (ids[4],), (ids[5],), gate=H),
        QOp("gate", (ids[5],), (ids[6],), gate=X),
        QOp("qfreez", (ids[6],)),
    ]
    m = QCircModule({"main": fn}, "main")
    before = module_unitary(fn)
    peephole(m)
    kinds = [(op.gate, op.num_controls) for op in fn.ops if op.kind == "gate"]
    assert kinds == [(Z, 1)]
    assert not any(op.kind == "qalloc" for op in fn.ops)
    after = module_unitary(fn)
    assert np.allclose(before, after, atol=1e-9)


def test_ccx_gates_match_toffoli():
    u = unitary_of(ccx_gates(0, 1, 2), 3)
    want = np.eye(8)
    want[[6, 7]] = want[[7, 6]]
    assert np.allclose(u, want, atol=1e-9)


def test_ccix_gates_match_controlled_ix():
    u = unitary_of(ccix_gates(0, 1, 2), 3)
    want = np.eye(8, dtype=complex)
    want[6:8, 6:8] = 1j * np.array([[0, 1], [1, 0]])
    assert np.allclose(u, want, atol=1e-9)


def _phase_normalized(u, want):
    idx = np.unravel_index(np.argmax(np.abs(want)), want.shape)
    if abs(u[idx]) < 1e-12:
        return u
    return u * (want[idx] / u[idx])


@pytest.mark.parametrize("k", [2, 3, 4])
def test_decompose_mcx(k):
    m = fn_module([Gate(X, (k,), tuple(range(k)))], k + 1)
    want = unitary_of_module(m, k + 1)
    decompose_multicontrol(m)
    verify_circuit(m)
    assert all(op.num_controls <= 1 for op in m.entry_fn.ops if op.kind == "gate")
    got = module_unitary(m.entry_fn)
    got = _phase_normalized(got, want)
    assert np.allclose(got, want, atol=1e-9)


def test_decompose_mcz_and_mcp():
    for kind, param in [(Z, 0.0), (P, 0.7), (H, 0.0), (S, 0.0)]:
        m = fn_module([Gate(kind, (2,), (0, 1), param)], 3)
        want = unitary_of_module(m, 3)
        decompose_multicontrol(m)
        verify_circuit(m)
        assert all(op.num_controls <= 1 for op in m.entry_fn.ops if op.kind == "gate")
        got = _phase_normalized(module_unitary(m.entry_fn), want)
        assert np.allclose(got, want, atol=1e-9), kind


def test_decompose_leaves_single_controls():
    m = fn_module([g(X, 1, controls=(0,))], 2)
    decompose_multicontrol(m)
    assert gate_count(m) == 1


def test_peephole_never_increases_gate_count_random():
    rng = np.random.default_rng(5)
    kinds = [X, Z, H, S, SDG, T, TDG, P, SWAP]
    for trial in range(60):
        n = int(rng.integers(2, 7))
        gates = []
        for _ in range(int(rng.integers(1, 61))):
            kind = kinds[int(rng.integers(0, len(kinds)))]
            qs = list(rng.choice(n, size=2 if kind is SWAP else 1, replace=False))
            free = [q for q in range(n) if q not in qs]
            nc = int(rng.integers(0, min(2, len(free)) + 1))
            ctrl = tuple(free[:nc])
            param = float(rng.uniform(-math.pi, math.pi)) if kind is P else 0.0
            gates.append(Gate(kind, tuple(qs), ctrl, param))
        m = fn_module(gates, n)
        before_u = unitary_of_module(m, n)
        before_count = gate_count(m)
        peephole(m)
        verify_circuit(m)
        assert gate_count(m) <= before_count
        after_u = unitary_of_module(m, n)
        assert np.allclose(before_u, after_u, atol=1e-9)


def test_decompose_preserves_unitary_random():
    rng = np.random.default_rng(6)
    kinds = [X, Z, H, P]
    for trial in range(30):
        n = int(rng.integers(3, 6))
        gates = []
        for _ in range(int(rng.integers(1, 12))):
            kind = kinds[int(rng.integers(0, len(kinds)))]
            qs = [int(rng.integers(0, n))]
            free = [q for q in range(n) if q not in qs]
            nc = int(rng.integers(0, min(3, len(free)) + 1))
            ctrl = tuple(free[:nc])
            param = float(rng.uniform(-math.pi, math.pi)) if kind is P else 0.0
            gates.append(Gate(kind, tuple(qs), ctrl, param))
        m = fn_module(gates, n)
        want = unitary_of_module(m, n)
        decompose_multicontrol(m)
        verify_circuit(m)
        from qbc.run import module_unitary_dynamic

        got = _phase_normalized(module_unitary_dynamic(m.entry_fn), want)
        assert np.allclose(got, want, atol=1e-9)


def test_qcirc_print_parse_roundtrip():
    gates = [g(H, 0), Gate(P, (1,), (0,), 0.25), g(SWAP, 0, 1)]
    fn = gates_to_fn("main", 2, gates)
    fn.ops.append(QOp("qfree", (fn.ops[-1].results[0],)))
    m = QCircModule({"main": fn}, "main")
    text = print_qcirc(m)
    m2 = parse_qcirc(text)
    assert print_qcirc(m2) == text
