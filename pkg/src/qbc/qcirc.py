"""
Gate-level dataflow IR: qubit alloc/free, measurement, and controlled gates
with value semantics (every qubit value is produced once and consumed once).

Synthesis routines build flat ``Gate`` lists over register positions; those
lists get wired into dataflow ops when a module is assembled.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional


class GateKind(Enum):
    X = "x"
    Y = "y"
    Z = "z"
    H = "h"
    S = "s"
    SDG = "sdg"
    T = "t"
    TDG = "tdg"
    P = "p"
    SWAP = "swap"


HERMITIAN = {GateKind.X, GateKind.Y, GateKind.Z, GateKind.H, GateKind.SWAP}

ADJOINT_KIND = {
    GateKind.X: GateKind.X,
    GateKind.Y: GateKind.Y,
    GateKind.Z: GateKind.Z,
    GateKind.H: GateKind.H,
    GateKind.SWAP: GateKind.SWAP,
    GateKind.S: GateKind.SDG,
    GateKind.SDG: GateKind.S,
    GateKind.T: GateKind.TDG,
    GateKind.TDG: GateKind.T,
    GateKind.P: GateKind.P,  # with negated param
}

N_TARGETS = {k: (2 if k is GateKind.SWAP else 1) for k in GateKind}


@dataclass(frozen=True)
class Gate:
    """A gate over register positions (synthesis-level, not dataflow)."""

    kind: GateKind
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    param: float = 0.0

    def __post_init__(self):
        assert len(self.targets) == N_TARGETS[self.kind]
        occupied = set(self.targets) | set(self.controls)
        assert len(occupied) == len(self.targets) + len(self.controls)

    def adjoint(self) -> "Gate":
        param = -self.param if self.kind is GateKind.P else self.param
        return Gate(ADJOINT_KIND[self.kind], self.targets, self.controls, param)

    def shifted(self, offset: int) -> "Gate":
        return Gate(
            self.kind,
            tuple(t + offset for t in self.targets),
            tuple(c + offset for c in self.controls),
            self.param,
        )

    def with_controls(self, extra: tuple[int, ...]) -> "Gate":
        return Gate(self.kind, self.targets, self.controls + extra, self.param)


def g(kind: GateKind, *targets: int, controls: tuple[int, ...] = (), param: float = 0.0) -> Gate:
    return Gate(kind, tuple(targets), tuple(controls), param)


def adjoint_gates(gates: list[Gate]) -> list[Gate]:
    return [gt.adjoint() for gt in reversed(gates)]


# ---------------------------------------------------------------------------
# Dataflow module


@dataclass
class QOp:
    """One op in a single-block gate-level function body.

    kinds and shapes:
      qalloc:            ()                     -> (qubit,)
      qfree/qfreez:      (qubit,)               -> ()
      measure:           (qubit,)               -> (bit,)
      gate:              (*controls, *targets)  -> same count of qubits
      ret:               (*bits,)               -> ()
    Gates may carry a classical condition (bit value id, expected outcome).
    """

    kind: str
    operands: tuple[int, ...] = ()
    results: tuple[int, ...] = ()
    gate: Optional[GateKind] = None
    param: float = 0.0
    num_controls: int = 0
    condition: Optional[tuple[int, bool]] = None


@dataclass
class QCircFn:
    name: str
    ops: list[QOp] = field(default_factory=list)
    qubit_params: tuple[int, ...] = ()
    next_id: int = 0

    def new_id(self) -> int:
        v = self.next_id
        self.next_id += 1
        return v

    def count_gates(self) -> int:
        return sum(1 for op in self.ops if op.kind == "gate")


@dataclass
class QCircModule:
    functions: dict[str, QCircFn] = field(default_factory=dict)
    entry: str = "main"

    @property
    def entry_fn(self) -> QCircFn:
        return self.functions[self.entry]


class CircuitError(Exception):
    pass


def verify_circuit(m: QCircModule) -> None:
    """Check dataflow invariants; raise CircuitError on the first violation."""
    for fn in m.functions.values():
        _verify_fn(fn)


def _verify_fn(fn: QCircFn) -> None:
    defined: set[int] = set(fn.qubit_params)
    qubit_vals: set[int] = set(fn.qubit_params)
    bit_vals: set[int] = set()
    consumed: set[int] = set()
    root: dict[int, int] = {p: p for p in fn.qubit_params}
    allocated: set[int] = set()

    def use_qubit(v: int, where: str) -> None:
        if v not in qubit_vals:
            raise CircuitError(f"{fn.name}: {where} uses undefined qubit %{v}")
        if v in consumed:
            raise CircuitError(f"{fn.name}: qubit %{v} used twice ({where})")
        consumed.add(v)

    for i, op in enumerate(fn.ops):
        where = f"op {i} ({op.kind})"
        if op.kind == "qalloc":
            (res,) = op.results
            if res in defined:
                raise CircuitError(f"{fn.name}: %{res} redefined")
            defined.add(res)
            qubit_vals.add(res)
            root[res] = res
            allocated.add(res)
        elif op.kind in ("qfree", "qfreez"):
            use_qubit(op.operands[0], where)
        elif op.kind == "measure":
            use_qubit(op.operands[0], where)
            (res,) = op.results
            defined.add(res)
            bit_vals.add(res)
        elif op.kind == "gate":
            if len(op.operands) != len(op.results):
                raise CircuitError(f"{fn.name}: {where} operand/result mismatch")
            seen = set()
            for v in op.operands:
                if v in seen:
                    raise CircuitError(
                        f"{fn.name}: {where} repeats qubit %{v} in one gate"
                    )
                seen.add(v)
                use_qubit(v, where)
            ntgt = len(op.operands) - op.num_controls
            if ntgt != N_TARGETS[op.gate]:
                raise CircuitError(f"{fn.name}: {where} wrong target count")
            if op.condition is not None and op.condition[0] not in bit_vals:
                raise CircuitError(f"{fn.name}: {where} conditions on non-bit")
            for v, res in zip(op.operands, op.results):
                if res in defined:
                    raise CircuitError(f"{fn.name}: %{res} redefined")
                defined.add(res)
                qubit_vals.add(res)
                root[res] = root.get(v, v)
        elif op.kind == "ret":
            for v in op.operands:
                if v not in bit_vals:
                    raise CircuitError(f"{fn.name}: ret of non-bit %{v}")
            if i != len(fn.ops) - 1:
                raise CircuitError(f"{fn.name}: ret not last op")
        else:
            raise CircuitError(f"{fn.name}: unknown op kind {op.kind}")
    # Every allocated qubit's chain must end in qfree/qfreez/measure;
    # parameter-rooted chains may dangle (test harness functions).
    dangling = {
        v for v in qubit_vals - consumed if root.get(v, v) in allocated
    }
    if dangling:
        raise CircuitError(
            f"{fn.name}: allocated qubits never consumed: "
            + ", ".join(f"%{v}" for v in sorted(dangling))
        )


def append_gates(fn: QCircFn, wires: list[int], gates: list[Gate],
                 condition: Optional[tuple[int, bool]] = None) -> None:
    """Wire position-based gates into ``fn``, updating ``wires`` in place."""
    for gt in gates:
        positions = list(gt.controls) + list(gt.targets)
        operands = tuple(wires[p] for p in positions)
        results = tuple(fn.new_id() for _ in positions)
        fn.ops.append(
            QOp(
                "gate",
                operands,
                results,
                gate=gt.kind,
                param=gt.param,
                num_controls=len(gt.controls),
                condition=condition,
            )
        )
        for p, r in zip(positions, results):
            wires[p] = r


def print_qcirc(m: QCircModule) -> str:
    lines = []
    for name, fn in m.functions.items():
        args = ", ".join(f"%{v}: qubit" for v in fn.qubit_params)
        lines.append(f"qcfunc @{name}({args}) {{")
        for op in fn.ops:
            lines.append("  " + _print_qop(op))
        lines.append("}")
    return "\n".join(lines) + "\n"


def _print_qop(op: QOp) -> str:
    if op.kind == "qalloc":
        return f"%{op.results[0]} = qalloc"
    if op.kind in ("qfree", "qfreez"):
        return f"{op.kind} %{op.operands[0]}"
    if op.kind == "measure":
        return f"%{op.results[0]} = measure %{op.operands[0]}"
    if op.kind == "ret":
        return "ret " + ", ".join(f"%{v}" for v in op.operands)
    assert op.kind == "gate"
    ctrls = op.operands[: op.num_controls]
    tgts = op.operands[op.num_controls:]
    res = ", ".join(f"%{v}" for v in op.results)
    name = op.gate.value
    if op.gate is GateKind.P:
        name += f"({op.param!r})"
    s = f"{res} = gate {name}"
    if ctrls:
        s += " [" + ", ".join(f"%{v}" for v in ctrls) + "]"
    s += " (" + ", ".join(f"%{v}" for v in tgts) + ")"
    if op.condition is not None:
        bit, val = op.condition
        s += f" if %{bit} == {int(val)}"
    return s


def parse_qcirc(text: str) -> QCircModule:
    """Parse the textual form printed by ``print_qcirc`` (round-trip aid)."""
    import re

    m = QCircModule(functions={}, entry="main")
    fn: Optional[QCircFn] = None
    first = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("qcfunc"):
            mt = re.match(r"qcfunc @(\w+)\((.*)\) \{", line)
            assert mt, line
            params = tuple(
                int(p.strip().split(":")[0][1:])
                for p in mt.group(2).split(",")
                if p.strip()
            )
            fn = QCircFn(mt.group(1), qubit_params=params)
            m.functions[fn.name] = fn
            if first is None:
                first = fn.name
            continue
        if line == "}":
            fn.next_id = 1 + max(
                [max(op.results, default=-1) for op in fn.ops]
                + [max(op.operands, default=-1) for op in fn.ops]
                + [max(fn.qubit_params, default=-1)],
                default=-1,
            )
            continue
        assert fn is not None
        fn.ops.append(_parse_qop(line))
    m.entry = "main" if "main" in m.functions else first
    return m


def _parse_qop(line: str) -> QOp:
    import re

    if line.startswith("qfree ") or line.startswith("qfreez "):
        kind, v = line.split()
        return QOp(kind, (int(v[1:]),))
    if line.startswith("ret"):
        rest = line[3:].strip()
        ops = tuple(int(v.strip()[1:]) for v in rest.split(",")) if rest else ()
        return QOp("ret", ops)
    mt = re.match(r"%(\d+) = qalloc$", line)
    if mt:
        return QOp("qalloc", results=(int(mt.group(1)),))
    mt = re.match(r"%(\d+) = measure %(\d+)$", line)
    if mt:
        return QOp("measure", (int(mt.group(2)),), (int(mt.group(1)),))
    mt = re.match(
        r"(.+) = gate (\w+)(\(([^)]*)\))?( \[(.*?)\])? \((.*?)\)( if %(\d+) == (\d))?$",
        line,
    )
    assert mt, f"bad qcirc line: {line}"
    results = tuple(int(v.strip()[1:]) for v in mt.group(1).split(","))
    kind = GateKind(mt.group(2).split("(")[0])
    param = float(mt.group(4)) if mt.group(4) else 0.0
    ctrls = (
        tuple(int(v.strip()[1:]) for v in mt.group(6).split(","))
        if mt.group(6)
        else ()
    )
    tgts = tuple(int(v.strip()[1:]) for v in mt.group(7).split(","))
    cond = None
    if mt.group(9):
        cond = (int(mt.group(9)), bool(int(mt.group(10))))
    return QOp(
        "gate",
        ctrls + tgts,
        results,
        gate=kind,
        param=param,
        num_controls=len(ctrls),
        condition=cond,
    )
