"""
Lowering the basis-level IR to the gate-level dataflow IR: preps become
allocations plus fixed rotations, translations become synthesized circuits,
embeds become compute-copy-uncompute networks with clean ancillas, and
measurement destandardizes into the computational basis.

Requires an inlined module: any surviving call or indirect call is a
diagnostic, since the gate level has no call ops.

Qubits are tracked as physical wire slots; IR values map to slot lists and
each slot remembers its current dataflow value id. Conditional regions then
chain naturally: both branches' gates thread the same slots.
"""

from __future__ import annotations

from typing import Optional

from .bases import Basis, BasisLiteral, BasisVector, PhaseParam, Prim
from .diagnostics import err
from .qcirc import Gate, GateKind, QCircFn, QCircModule, QOp, g
from .qwir import QwBlock, QwFunc, QwModule, QwOp
from .synth import embed_gates, lower_translation, measurement_rotation


class LowerError(Exception):
    pass


def _resolve_basis(b: Basis, angles: dict[int, float], operands: list[int]) -> Basis:
    """Substitute symbolic phase operands with their constant values."""
    def fix(v: BasisVector) -> BasisVector:
        if isinstance(v.phase, PhaseParam):
            ref = operands[1 + v.phase.index]
            if ref not in angles:
                raise LowerError("phase operand is not a known constant")
            return BasisVector(v.prim, v.eigenbits, angles[ref])
        return v

    elements = []
    for e in b.elements:
        if isinstance(e, BasisLiteral):
            elements.append(BasisLiteral(tuple(fix(v) for v in e.vectors)))
        else:
            elements.append(e)
    return Basis(tuple(elements))


_PREP_DESTD = {
    Prim.STD: [],
    Prim.PM: [GateKind.H],
    Prim.IJ: [GateKind.H, GateKind.S],
}


class _GateLowerer:
    def __init__(self, m: QwModule, src: QwFunc):
        self.m = m
        self.src = src
        self.fn = QCircFn(src.name)
        self.qmap: dict[int, list[int]] = {}  # IR value -> wire slots
        self.bmap: dict[int, list[int]] = {}  # IR value -> bit value ids
        self.angles: dict[int, float] = {}
        self.slot_val: list[int] = []  # slot -> current dataflow id

    def alloc_slot(self) -> int:
        q = self.fn.new_id()
        self.fn.ops.append(QOp("qalloc", results=(q,)))
        self.slot_val.append(q)
        return len(self.slot_val) - 1

    def emit_gates(self, slots: list[int], gates: list[Gate], condition) -> None:
        for gt in gates:
            positions = list(gt.controls) + list(gt.targets)
            operands = tuple(self.slot_val[slots[p]] for p in positions)
            results = tuple(self.fn.new_id() for _ in positions)
            self.fn.ops.append(QOp(
                "gate", operands, results, gate=gt.kind, param=gt.param,
                num_controls=len(gt.controls), condition=condition,
            ))
            for p, r in zip(positions, results):
                self.slot_val[slots[p]] = r

    def consume(self, slot: int) -> int:
        return self.slot_val[slot]

    def run(self) -> QCircFn:
        if any(self.src.types[p].kind == "qubit" for p in self.src.params):
            raise LowerError("entry takes qubits")
        for op in self.src.block.ops:
            self.lower_op(op, None)
        return self.fn

    def lower_op(self, op: QwOp, condition) -> None:
        k = op.kind
        if k == "qbprep":
            eigenbits = op.attrs["eigenbits"]
            prim = op.attrs["prim"]
            slots = [self.alloc_slot() for _ in eigenbits]
            gates = []
            for i, bitc in enumerate(eigenbits):
                if bitc == "1":
                    gates.append(g(GateKind.X, i))
                for kind in _PREP_DESTD[prim]:
                    gates.append(g(kind, i))
            self.emit_gates(slots, gates, condition)
            self.qmap[op.results[0]] = slots
        elif k == "qbtrans":
            slots = list(self.qmap[op.operands[0]])
            b_in = _resolve_basis(op.attrs["b_in"], self.angles, op.operands)
            b_out = _resolve_basis(op.attrs["b_out"], self.angles, op.operands)
            self.emit_gates(slots, lower_translation(b_in, b_out), condition)
            self.qmap[op.results[0]] = slots
        elif k == "qbmeas":
            if condition is not None:
                raise LowerError("measurement inside a conditional")
            slots = list(self.qmap[op.operands[0]])
            self.emit_gates(slots, measurement_rotation(op.attrs["basis"]), None)
            bits = []
            for s in slots:
                b = self.fn.new_id()
                self.fn.ops.append(QOp("measure", (self.consume(s),), (b,)))
                bits.append(b)
            self.bmap[op.results[0]] = bits
        elif k == "qbdiscard":
            if condition is not None:
                raise LowerError("discard inside a conditional")
            for s in self.qmap[op.operands[0]]:
                self.fn.ops.append(QOp("qfree", (self.consume(s),)))
        elif k == "qbdiscardz":
            for s in self.qmap[op.operands[0]]:
                self.fn.ops.append(QOp("qfreez", (self.consume(s),)))
        elif k == "qbpack":
            ids = []
            for v in op.operands:
                ids.extend(self.qmap[v])
            self.qmap[op.results[0]] = ids
        elif k == "qbunpack":
            ids = self.qmap[op.operands[0]]
            at = 0
            for r, s in zip(op.results, op.attrs["sizes"]):
                self.qmap[r] = ids[at : at + s]
                at += s
        elif k == "bitpack":
            ids = []
            for v in op.operands:
                ids.extend(self.bmap[v])
            self.bmap[op.results[0]] = ids
        elif k == "bitunpack":
            ids = self.bmap[op.operands[0]]
            at = 0
            for r, s in zip(op.results, op.attrs["sizes"]):
                self.bmap[r] = ids[at : at + s]
                at += s
        elif k == "embed":
            cfn = self.m.classicals[op.attrs["fn"]]
            gates, width, anc = embed_gates(cfn, op.attrs["mode"], op.attrs.get("pred"))
            slots = list(self.qmap[op.operands[0]])
            if width != len(slots):
                raise LowerError("embed width mismatch")
            anc_slots = [self.alloc_slot() for _ in range(anc)]
            self.emit_gates(slots + anc_slots, gates, condition)
            for s in anc_slots:
                self.fn.ops.append(QOp("qfreez", (self.consume(s),)))
            self.qmap[op.results[0]] = slots
        elif k == "fconst":
            self.angles[op.results[0]] = op.attrs["value"]
        elif k == "cond":
            self.lower_cond(op, condition)
        elif k == "ret":
            bits = []
            for v in op.operands:
                if self.src.types[v].kind != "bit":
                    raise LowerError("entry must return bits")
                bits.extend(self.bmap[v])
            self.fn.ops.append(QOp("ret", tuple(bits)))
        elif k in ("call", "call_indirect", "func_const", "func_adj",
                   "func_pred", "lambda"):
            raise LowerError(
                f"residual {k} op; gate-level lowering needs a fully "
                "inlined module"
            )
        else:
            raise LowerError(f"cannot lower op {k}")

    def lower_cond(self, op: QwOp, condition) -> None:
        if condition is not None:
            raise LowerError("nested conditionals are not supported")
        (flag,) = self.bmap[op.operands[0]]
        branch_slots = []
        for region, truth in ((op.regions[0], True), (op.regions[1], False)):
            for inner in region.ops[:-1]:
                self.lower_op(inner, (flag, truth))
            term = region.ops[-1]
            slots = []
            for v in term.operands:
                slots.extend(self.qmap[v])
            branch_slots.append(slots)
        then_slots, else_slots = branch_slots
        if then_slots != else_slots:
            # The then-route permutes wires by renaming; realize that routing
            # physically, only when the flag is set, so both branches agree
            # on the else-route slot order.
            out = list(then_slots)
            for k in range(len(out)):
                want = else_slots[k]
                if out[k] == want:
                    continue
                j = out.index(want, k + 1)
                self.emit_gates([out[k], out[j]], [g(GateKind.SWAP, 0, 1)],
                                (flag, True))
                out[k], out[j] = out[j], out[k]
        out_slots = else_slots
        at = 0
        for r in op.results:
            d = self.src.types[r].dim
            self.qmap[r] = out_slots[at : at + d]
            at += d


def lower_module(m: QwModule) -> QCircModule:
    """Lower the entry function of an inlined module to gate-level IR."""
    fn = _GateLowerer(m, m.entry_fn).run()
    return QCircModule({fn.name: fn}, entry=fn.name)
