"""
Gate-level optimization: cancellation of adjacent inverse pairs, the HXH/HZH
conjugation rules, phase merging, the relaxed multi-controlled-X-on-|->
rewrite, and Selinger-style decomposition of multi-controlled gates.
"""

from __future__ import annotations

import math
from typing import Optional

from .qcirc import (
    Gate, GateKind, HERMITIAN, QCircFn, QCircModule, QOp, append_gates, g,
)

H, X, Z, S, SDG, T, TDG, P, SWAP = (
    GateKind.H, GateKind.X, GateKind.Z, GateKind.S, GateKind.SDG,
    GateKind.T, GateKind.TDG, GateKind.P, GateKind.SWAP,
)

_INVERSE_PAIRS = {(S, SDG), (SDG, S), (T, TDG), (TDG, T)}


def _producers(fn: QCircFn) -> dict[int, tuple[int, int]]:
    out = {}
    for i, op in enumerate(fn.ops):
        for k, r in enumerate(op.results):
            out[r] = (i, k)
    return out


def _consumers(fn: QCircFn) -> dict[int, tuple[int, int]]:
    out = {}
    for i, op in enumerate(fn.ops):
        for k, v in enumerate(op.operands):
            out[v] = (i, k)
    return out


def _delete_gates(fn: QCircFn, indices: set[int]) -> None:
    """Remove gate ops, forwarding each operand to its matching result."""
    forward: dict[int, int] = {}
    for i in indices:
        op = fn.ops[i]
        for v, r in zip(op.operands, op.results):
            forward[r] = v

    def resolve(v: int) -> int:
        while v in forward:
            v = forward[v]
        return v

    kept = []
    for i, op in enumerate(fn.ops):
        if i in indices:
            continue
        op.operands = tuple(resolve(v) for v in op.operands)
        if op.condition is not None:
            op.condition = (resolve(op.condition[0]), op.condition[1])
        kept.append(op)
    fn.ops = kept


def _wiring_match(fn: QCircFn, i: int, j: int) -> bool:
    """g_j consumes exactly g_i's results, controls->controls, targets aligned."""
    a, b = fn.ops[i], fn.ops[j]
    if set(b.operands) != set(a.results):
        return False
    amap = dict(zip(a.results, a.operands))  # result -> the wire's pre-g_i value
    actrl = set(a.operands[: a.num_controls])
    atgt = list(a.operands[a.num_controls:])
    bctrl = {amap[v] for v in b.operands[: b.num_controls]}
    btgt = [amap[v] for v in b.operands[b.num_controls:]]
    if actrl != bctrl:
        return False
    if a.gate is SWAP:
        return set(atgt) == set(btgt)
    return atgt == btgt


def _try_pair_rules(fn: QCircFn, i: int) -> bool:
    op = fn.ops[i]
    if op.kind != "gate" or op.condition is not None:
        return False
    consumers = _consumers(fn)
    nexts = {consumers.get(r) for r in op.results}
    if None in nexts or len({ix for ix, _ in nexts}) != 1:
        return False
    j = next(iter(nexts))[0]
    nxt = fn.ops[j]
    if nxt.kind != "gate" or nxt.condition is not None:
        return False
    if not _wiring_match(fn, i, j):
        return False
    a, b = op.gate, nxt.gate
    if a == b and a in HERMITIAN:
        _delete_gates(fn, {i, j})
        return True
    if (a, b) in _INVERSE_PAIRS:
        _delete_gates(fn, {i, j})
        return True
    if a is P and b is P:
        theta = op.param + nxt.param
        theta = math.remainder(theta, 2 * math.pi)
        if abs(theta) <= 1e-12:
            _delete_gates(fn, {i, j})
        else:
            op.param = theta
            _delete_gates(fn, {j})
        return True
    return False


def _try_hxh(fn: QCircFn, i: int) -> bool:
    """H (uncontrolled) conjugating the target of an X or Z gate."""
    first = fn.ops[i]
    if first.kind != "gate" or first.gate is not H or first.num_controls \
            or first.condition is not None:
        return False
    consumers = _consumers(fn)
    mid_loc = consumers.get(first.results[0])
    if mid_loc is None:
        return False
    j, pos = mid_loc
    mid = fn.ops[j]
    if mid.kind != "gate" or mid.gate not in (X, Z) or mid.condition is not None:
        return False
    if pos < mid.num_controls:
        return False
    mid_result = mid.results[pos]
    last_loc = consumers.get(mid_result)
    if last_loc is None:
        return False
    k, _ = last_loc
    last = fn.ops[k]
    if last.kind != "gate" or last.gate is not H or last.num_controls \
            or last.condition is not None:
        return False
    mid.gate = Z if mid.gate is X else X
    _delete_gates(fn, {i, k})
    return True


def _try_relaxed_minus_target(fn: QCircFn) -> bool:
    """qalloc -> X -> H -> (MCX targets)* -> H -> X -> qfree(z): MCX => MCZ."""
    producers = _producers(fn)
    consumers = _consumers(fn)

    def only_consumer(v):
        loc = consumers.get(v)
        return None if loc is None else loc[0]

    for i, op in enumerate(fn.ops):
        if op.kind != "qalloc":
            continue
        chain = [i]
        v = op.results[0]

        def next_gate(v, kind, plain):
            j = only_consumer(v)
            if j is None:
                return None, None
            o = fn.ops[j]
            if o.kind != "gate" or o.gate is not kind or o.condition is not None:
                return None, None
            if plain and (o.num_controls or len(o.operands) != 1):
                return None, None
            return j, o.results[0]

        jx, v = next_gate(v, X, True)
        if jx is None:
            continue
        jh, v = next_gate(v, H, True)
        if jh is None:
            continue
        chain += [jx, jh]
        mcx_indices = []
        ok = True
        while True:
            j = only_consumer(v)
            if j is None:
                ok = False
                break
            o = fn.ops[j]
            if o.kind == "gate" and o.gate is X and o.num_controls >= 1 \
                    and o.condition is None and o.operands[-1] == v:
                mcx_indices.append(j)
                v = o.results[-1]
                continue
            if o.kind == "gate" and o.gate is H and not o.num_controls \
                    and len(o.operands) == 1 and o.condition is None:
                jh2 = j
                v = o.results[0]
                break
            ok = False
            break
        if not ok or not mcx_indices:
            continue
        jx2 = only_consumer(v)
        if jx2 is None:
            continue
        o2 = fn.ops[jx2]
        if o2.kind != "gate" or o2.gate is not X or o2.num_controls \
                or o2.condition is not None:
            continue
        v2 = o2.results[0]
        jf = only_consumer(v2)
        if jf is None or fn.ops[jf].kind not in ("qfree", "qfreez"):
            continue
        # Rewrite each MCX into an MCZ on its controls, dropping the ancilla.
        for j in mcx_indices:
            o = fn.ops[j]
            ctrls = list(o.operands[: o.num_controls])
            ctrl_res = list(o.results[: o.num_controls])
            o.operands = tuple(ctrls)
            o.results = tuple(ctrl_res)
            o.gate = Z
            o.num_controls = len(ctrls) - 1
        # Thread the ancilla value straight through the rewritten gates.
        forward = {}
        anc_v = fn.ops[i].results[0]
        for j in (jx, jh):
            forward[fn.ops[j].results[0]] = None
        kept = []
        for idx, o in enumerate(fn.ops):
            if idx in (i, jx, jh, jh2, jx2, jf):
                continue
            kept.append(o)
        fn.ops = kept
        return True
    return False


def peephole(m: QCircModule) -> QCircModule:
    """Apply the cancellation rule set to a fixpoint on every function."""
    for fn in m.functions.values():
        budget = (fn.count_gates() + 1) ** 2
        changed = True
        while changed and budget > 0:
            budget -= 1
            changed = False
            if _try_relaxed_minus_target(fn):
                changed = True
                continue
            for i in range(len(fn.ops)):
                if _try_pair_rules(fn, i) or _try_hxh(fn, i):
                    changed = True
                    break
    return m


# ---------------------------------------------------------------------------
# Multi-controlled gate decomposition


def ccx_gates(a: int, b: int, t: int) -> list[Gate]:
    return [
        g(H, t),
        g(X, t, controls=(b,)), g(TDG, t),
        g(X, t, controls=(a,)), g(T, t),
        g(X, t, controls=(b,)), g(TDG, t),
        g(X, t, controls=(a,)), g(T, t),
        g(T, b), g(H, t),
        g(X, b, controls=(a,)), g(T, a), g(TDG, b),
        g(X, b, controls=(a,)),
    ]


def ccix_gates(a: int, b: int, t: int) -> list[Gate]:
    """Doubly-controlled iX with four T gates (phase cancels when paired)."""
    return [
        g(H, t),
        g(T, t),
        g(X, t, controls=(a,)), g(TDG, t),
        g(X, t, controls=(b,)), g(T, t),
        g(X, t, controls=(a,)), g(TDG, t),
        g(X, t, controls=(b,)),
        g(H, t),
        g(S, a), g(S, b),
        g(X, b, controls=(a,)), g(SDG, b), g(X, b, controls=(a,)),
    ]


def _mcx_gates(controls: list[int], target: int, alloc) -> list[Gate]:
    k = len(controls)
    if k == 0:
        return [g(X, target)]
    if k == 1:
        return [g(X, target, controls=(controls[0],))]
    if k == 2:
        return ccx_gates(controls[0], controls[1], target)
    anc = alloc()
    front = ccix_gates(controls[0], controls[1], anc)
    middle = _mcx_gates([anc] + controls[2:], target, alloc)
    from .qcirc import adjoint_gates

    return front + middle + adjoint_gates(front)


def _controlled_core(kind: GateKind, param: float, anc: int,
                     targets: tuple[int, ...]) -> list[Gate]:
    return [Gate(kind, targets, (anc,), param)]


def decompose_multicontrol(m: QCircModule) -> QCircModule:
    """Rewrite every gate with two or more controls into <=1-control gates."""
    from .qcirc import adjoint_gates

    for fn in m.functions.values():
        new_ops: list[QOp] = []
        rename: dict[int, int] = {}

        def resolve(v: int) -> int:
            while v in rename:
                v = rename[v]
            return v

        for op in fn.ops:
            op.operands = tuple(resolve(v) for v in op.operands)
            if op.condition is not None:
                op.condition = (resolve(op.condition[0]), op.condition[1])
            if op.kind != "gate" or op.num_controls < 2:
                new_ops.append(op)
                continue
            k = op.num_controls
            n_vals = len(op.operands)
            anc_positions: list[int] = []

            def alloc() -> int:
                p = n_vals + len(anc_positions)
                anc_positions.append(p)
                return p

            ctrl_pos = list(range(k))
            tgt_pos = tuple(range(k, n_vals))
            if op.gate is GateKind.X:
                gates = _mcx_gates(ctrl_pos, tgt_pos[0], alloc)
            elif op.gate is GateKind.Z:
                gates = [g(H, tgt_pos[0])] \
                    + _mcx_gates(ctrl_pos, tgt_pos[0], alloc) + [g(H, tgt_pos[0])]
            elif op.gate is GateKind.Y:
                gates = [g(SDG, tgt_pos[0])] \
                    + _mcx_gates(ctrl_pos, tgt_pos[0], alloc) + [g(S, tgt_pos[0])]
            else:
                anc = alloc()
                and_in = _mcx_gates(ctrl_pos, anc, alloc)
                core = _controlled_core(op.gate, op.param, anc, tgt_pos)
                gates = and_in + core + adjoint_gates(and_in)
            wires = list(op.operands)
            for _ in anc_positions:
                a = fn.new_id()
                new_ops.append(QOp("qalloc", results=(a,)))
                wires.append(a)
            _append(fn, new_ops, wires, gates, op.condition)
            for pos in range(n_vals, len(wires)):
                new_ops.append(QOp("qfreez", (wires[pos],)))
            for old, new in zip(op.results, wires[:n_vals]):
                rename[old] = new
        fn.ops = new_ops
    return m


def _append(fn: QCircFn, ops: list[QOp], wires: list[int], gates: list[Gate],
            condition) -> None:
    for gt in gates:
        positions = list(gt.controls) + list(gt.targets)
        operands = tuple(wires[p] for p in positions)
        results = tuple(fn.new_id() for _ in positions)
        ops.append(QOp("gate", operands, results, gate=gt.kind, param=gt.param,
                       num_controls=len(gt.controls), condition=condition))
        for p, r in zip(positions, results):
            wires[p] = r
