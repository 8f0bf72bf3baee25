"""
Execution of gate-level modules: shot sampling, exact output distributions,
and unitary extraction for verification.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .qcirc import GateKind, QCircFn, QCircModule, QOp
from .simulator import AncillaNotClean, StateVector, apply_gate


class SimulationError(Exception):
    pass


def _exec_op(sv: StateVector, op: QOp, qmap: dict[int, int],
             bits: dict[int, int]) -> Optional[int]:
    """Run one non-measure op against the state; returns nothing."""
    if op.kind == "qalloc":
        sv.alloc(op.results[0])
        qmap[op.results[0]] = op.results[0]
    elif op.kind == "gate":
        keys = [qmap[v] for v in op.operands]
        for v, r in zip(op.operands, op.results):
            qmap[r] = qmap[v]
        if op.condition is not None:
            bit, want = op.condition
            if bits[bit] != int(want):
                return None
        sv.gate(
            op.gate.name,
            keys[op.num_controls:],
            keys[: op.num_controls],
            op.param,
        )
    elif op.kind == "qfree":
        sv.free(qmap[op.operands[0]])
    elif op.kind == "qfreez":
        try:
            sv.freez(qmap[op.operands[0]])
        except AncillaNotClean as e:
            raise SimulationError(f"qfreez %{op.operands[0]}: {e}") from e
    else:
        raise SimulationError(f"cannot execute op kind {op.kind}")
    return None


def simulate(m: QCircModule, shots: int, seed: int) -> dict[str, int]:
    """Sampled histogram of the entry function's returned bits."""
    rng = np.random.default_rng(seed)
    fn = m.entry_fn
    if fn.qubit_params:
        raise SimulationError("entry function takes qubits")
    hist: dict[str, int] = {}
    for _ in range(shots):
        sv = StateVector(rng)
        qmap: dict[int, int] = {}
        bits: dict[int, int] = {}
        key = ""
        for op in fn.ops:
            if op.kind == "measure":
                bits[op.results[0]] = sv.measure(qmap[op.operands[0]])
            elif op.kind == "ret":
                key = "".join(str(bits[v]) for v in op.operands)
            else:
                _exec_op(sv, op, qmap, bits)
        hist[key] = hist.get(key, 0) + 1
    return hist


def distribution(m: QCircModule, all_bits: bool = False) -> dict[str, float]:
    """Exact probability of each return bitstring (branches on measurement).

    With ``all_bits`` the keys cover every measured bit in measurement order
    rather than the returned bits, which is the view a classical register
    file exposes.
    """
    fn = m.entry_fn
    if fn.qubit_params:
        raise SimulationError("entry function takes qubits")
    out: dict[str, float] = {}
    measure_order = [op.results[0] for op in fn.ops if op.kind == "measure"]

    def walk(i: int, sv: StateVector, qmap: dict, bits: dict, prob: float):
        for j in range(i, len(fn.ops)):
            op = fn.ops[j]
            if op.kind == "measure":
                for outcome, p, sub in sv.branch(qmap[op.operands[0]]):
                    nbits = dict(bits)
                    nbits[op.results[0]] = outcome
                    walk(j + 1, sub, dict(qmap), nbits, prob * p)
                return
            if op.kind == "qfree":
                for _outcome, p, sub in sv.branch(qmap[op.operands[0]]):
                    walk(j + 1, sub, dict(qmap), dict(bits), prob * p)
                return
            if op.kind == "ret":
                order = measure_order if all_bits else op.operands
                key = "".join(str(bits[v]) for v in order)
                out[key] = out.get(key, 0.0) + prob
                return
            _exec_op(sv, op, qmap, bits)
        out[""] = out.get("", 0.0) + prob

    walk(0, StateVector(), {}, {}, 1.0)
    return out


def module_unitary(fn: QCircFn) -> np.ndarray:
    """Unitary over ``fn.qubit_params``, requiring clean ancilla round trips.

    Allocated qubits are appended after the parameters; the extracted block
    is valid only if every column with ancillas at |0> returns them to |0>,
    which is asserted.
    """
    n_params = len(fn.qubit_params)
    alloc_ids = [op.results[0] for op in fn.ops if op.kind == "qalloc"]
    n = n_params + len(alloc_ids)
    if n > 12:
        raise SimulationError("module unitary limited to 12 qubits")
    pos = {v: i for i, v in enumerate(fn.qubit_params)}
    for a in alloc_ids:
        pos[a] = len(pos)
    u = np.eye(1 << n, dtype=complex)
    qmap = dict(pos)
    for op in fn.ops:
        if op.kind in ("qalloc", "qfreez", "qfree"):
            continue
        if op.kind == "ret" and not op.operands:
            continue
        if op.kind != "gate":
            raise SimulationError(f"op kind {op.kind} has no unitary")
        if op.condition is not None:
            raise SimulationError("classically conditioned gate has no unitary")
        keys = [qmap[v] for v in op.operands]
        for v, r in zip(op.operands, op.results):
            qmap[r] = qmap[v]
        apply_gate(
            u,
            n,
            op.gate.name,
            keys[op.num_controls:],
            keys[: op.num_controls],
            op.param,
        )
    if not alloc_ids:
        return u
    # Extract the block where all ancillas are |0> on input and output.
    a = len(alloc_ids)
    cols = np.arange(1 << n_params) << a
    sub = u[:, cols]
    block = sub[cols, :]
    offblock = np.delete(sub, cols, axis=0)
    if not np.allclose(offblock, 0.0, atol=1e-9):
        raise SimulationError("ancillas not returned to |0>")
    return block


def module_unitary_dynamic(fn: QCircFn) -> np.ndarray:
    """Unitary over ``fn.qubit_params`` by columnwise simulation.

    Unlike ``module_unitary`` this allocates and frees ancillas as the op
    stream does, so only live qubits cost memory; qfreez enforces ancilla
    cleanliness per column.
    """
    n = len(fn.qubit_params)
    size = 1 << n
    u = np.zeros((size, size), dtype=complex)
    for col in range(size):
        sv = StateVector()
        qmap: dict[int, int] = {}
        for i, p in enumerate(fn.qubit_params):
            sv.alloc(p)
            qmap[p] = p
            if (col >> (n - 1 - i)) & 1:
                sv.gate("X", [p])
        for op in fn.ops:
            if op.kind == "ret":
                continue
            if op.kind == "measure":
                raise SimulationError("measure has no unitary")
            _exec_op(sv, op, qmap, {})
        if sv.n != n:
            raise SimulationError("ancillas still live at end")
        # Undo any positional drift from interleaved alloc/free.
        perm = [sv.pos(p) for p in fn.qubit_params]
        state = sv.state.reshape([2] * n).transpose(perm).reshape(-1) \
            if perm != list(range(n)) else sv.state
        u[:, col] = state
    return u


def gates_to_fn(name: str, n: int, gates) -> QCircFn:
    """Wrap a position-based gate list as a function over n qubit params."""
    from .qcirc import append_gates

    fn = QCircFn(name)
    fn.qubit_params = tuple(range(n))
    fn.next_id = n
    wires = list(range(n))
    append_gates(fn, wires, list(gates))
    return fn
