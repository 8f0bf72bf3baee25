"""Statevector simulation, gate application, and the translation oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbc.bases import Basis, BuiltinBasis, Prim, basis, lit
from qbc.qcirc import Gate, GateKind, g
from qbc.run import simulate, distribution, module_unitary, gates_to_fn
from qbc.qcirc import QCircFn, QCircModule, QOp
from qbc.simulator import (
    StateVector,
    fourier_column,
    span_projector,
    translation_unitary,
    unitary_of,
)

H = GateKind.H
X = GateKind.X


def test_unitary_of_empty_is_identity():
    assert np.allclose(unitary_of([], 2), np.eye(4))


def test_unitary_of_x():
    u = unitary_of([g(X, 0)], 1)
    assert np.allclose(u, [[0, 1], [1, 0]])


def test_unitary_of_hh_is_identity():
    u = unitary_of([g(H, 0), g(H, 0)], 1)
    assert np.allclose(u, np.eye(2), atol=1e-12)


def test_qubit_zero_is_most_significant():
    # X on qubit 0 of two flips the high bit: |00> -> |10>.
    u = unitary_of([g(X, 0)], 2)
    v = u @ np.array([1, 0, 0, 0], dtype=complex)
    assert np.allclose(v, [0, 0, 1, 0])


def test_controlled_gate():
    u = unitary_of([g(X, 1, controls=(0,))], 2)
    cx = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    assert np.allclose(u, cx)


def test_swap_gate():
    u = unitary_of([g(GateKind.SWAP, 0, 1)], 2)
    want = np.eye(4)[[0, 2, 1, 3]]
    assert np.allclose(u, want)


def test_phase_gate():
    u = unitary_of([g(GateKind.P, 0, param=math.pi / 2)], 1)
    assert np.allclose(u, [[1, 0], [0, 1j]])


def test_translation_unitary_swap():
    u = translation_unitary(basis(lit("01", "10")), basis(lit("10", "01")))
    want = np.eye(4)[[0, 2, 1, 3]]
    assert np.allclose(u, want)


def test_translation_unitary_identity():
    for b in [basis(lit("0")), basis(BuiltinBasis(Prim.PM, 2)), basis(lit("ij"))]:
        u = translation_unitary(b, b)
        assert np.allclose(u, np.eye(u.shape[0]), atol=1e-12)


def test_translation_unitary_phase():
    u = translation_unitary(basis(lit(("1", math.pi))), basis(lit("1")))
    assert np.allclose(u, np.diag([1, -1]))


def test_translation_unitary_adjoint_symmetry():
    b1 = basis(lit("0", "1"), BuiltinBasis(Prim.PM, 1))
    b2 = basis(BuiltinBasis(Prim.IJ, 1), lit("1", "0"))
    u12 = translation_unitary(b1, b2)
    u21 = translation_unitary(b2, b1)
    assert np.allclose(u12, u21.conj().T, atol=1e-12)


def test_fourier_column_is_dft():
    n = 3
    f = np.column_stack([fourier_column(n, k) for k in range(8)])
    w = np.exp(2j * np.pi / 8)
    want = np.array([[w ** (j * k) for k in range(8)] for j in range(8)]) / math.sqrt(8)
    assert np.allclose(f, want)


def _bell_module():
    fn = QCircFn("main")
    a, b = 0, 1
    fn.next_id = 2
    fn.ops = [
        QOp("qalloc", results=(a,)),
        QOp("qalloc", results=(b,)),
        QOp("gate", (a,), (2,), gate=H),
        QOp("gate", (2, b), (3, 4), gate=X, num_controls=1),
        QOp("measure", (3,), (5,)),
        QOp("measure", (4,), (6,)),
        QOp("ret", (5, 6)),
    ]
    fn.next_id = 7
    return QCircModule({"main": fn}, "main")


def test_bell_pair_histogram():
    hist = simulate(_bell_module(), shots=1000, seed=7)
    assert set(hist) <= {"00", "11"}
    assert sum(hist.values()) == 1000
    assert hist["00"] > 300 and hist["11"] > 300


def test_simulate_deterministic_given_seed():
    h1 = simulate(_bell_module(), shots=200, seed=42)
    h2 = simulate(_bell_module(), shots=200, seed=42)
    assert h1 == h2


def test_distribution_bell():
    dist = distribution(_bell_module())
    assert set(dist) == {"00", "11"}
    assert dist["00"] == pytest.approx(0.5, abs=1e-12)


def test_qfreez_on_one_raises():
    fn = QCircFn("main")
    fn.ops = [
        QOp("qalloc", results=(0,)),
        QOp("gate", (0,), (1,), gate=X),
        QOp("qfreez", (1,)),
        QOp("ret", ()),
    ]
    fn.next_id = 2
    m = QCircModule({"main": fn}, "main")
    from qbc.run import SimulationError

    with pytest.raises(SimulationError):
        simulate(m, shots=1, seed=0)


def test_module_unitary_with_clean_ancilla():
    # CX into an ancilla and back: identity on the data qubits.
    fn = QCircFn("f", qubit_params=(0, 1))
    fn.next_id = 2
    fn.ops = [
        QOp("qalloc", results=(2,)),
        QOp("gate", (0, 2), (3, 4), gate=X, num_controls=1),
        QOp("gate", (3, 4), (5, 6), gate=X, num_controls=1),
        QOp("qfreez", (6,)),
    ]
    fn.next_id = 7
    u = module_unitary(fn)
    assert np.allclose(u, np.eye(4), atol=1e-12)


def test_norm_preserved_random_circuit():
    rng = np.random.default_rng(3)
    sv = StateVector(rng)
    for k in range(4):
        sv.alloc(k)
    for _ in range(50):
        kind = rng.choice(["H", "X", "T", "S"])
        q = int(rng.integers(0, 4))
        sv.gate(kind, [q])
    assert abs(np.linalg.norm(sv.state) - 1.0) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3))
def test_gate_unitarity(a, b):
    gates = [g(H, a), g(GateKind.T, b), g(X, (a + 1) % 4, controls=(a,))]
    u = unitary_of(gates, 4)
    assert np.allclose(u @ u.conj().T, np.eye(16), atol=1e-9)
