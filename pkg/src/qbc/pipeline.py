"""
Fixed compilation pipeline: parse -> expand -> typecheck -> AST canonicalize
-> lower to basis IR -> lift/canonicalize/inline (unless disabled) ->
specialize -> lower to gates -> peephole (at -O1) -> multi-control
decomposition (unless disabled) -> backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .backends import emit_qasm3, emit_qir_base
from .canon_ast import canonicalize_ast
from .diagnostics import CompileError, Diagnostic
from .expand import expand
from .lower_ast import lower_to_ir
from .lower_gates import LowerError, lower_module
from .parser import parse
from .peephole import decompose_multicontrol, peephole
from .printer import print_program
from .qcirc import QCircModule, print_qcirc, verify_circuit
from .qwir import QwModule, print_module, verify
from .qwir_passes import (
    canonicalize_ir, count_calls, generate_specializations, inline,
    lift_lambdas, prune_unreachable,
)
from .typecheck import typecheck


@dataclass
class Options:
    opt_level: int = 1
    inline: bool = True
    decompose: bool = True
    reuse_qubits: bool = False
    canonicalize: bool = True
    dims: dict[str, int] = field(default_factory=dict)


def front(source: str, file: str, opts: Options):
    prog = parse(source, file)
    prog = expand(prog, opts.dims, file)
    tp = typecheck(prog, file)
    if opts.canonicalize:
        canonical = canonicalize_ast(prog, file)
        tp = typecheck(canonical, file)
    return tp


def to_qwir(tp, opts: Options) -> QwModule:
    m = lower_to_ir(tp)
    verify(m)
    if opts.inline:
        lift_lambdas(m)
        canonicalize_ir(m)
        inline(m)
        verify(m)
    generate_specializations(m)
    prune_unreachable(m)
    verify(m)
    return m


def to_gates(m: QwModule, opts: Options) -> QCircModule:
    try:
        qc = lower_module(m)
    except LowerError as e:
        raise CompileError(Diagnostic("error", str(e)))
    verify_circuit(qc)
    if opts.opt_level >= 1:
        qc = peephole(qc)
        verify_circuit(qc)
    if opts.decompose:
        qc = decompose_multicontrol(qc)
        verify_circuit(qc)
    return qc


def compile_source(source: str, file: str, opts: Options, emit: str) -> str:
    tp = front(source, file, opts)
    if emit == "ast":
        return print_program(tp.program)
    m = to_qwir(tp, opts)
    if emit == "qwerty-ir":
        return print_module(m)
    qc = to_gates(m, opts)
    if emit == "qcircuit-ir":
        return print_qcirc(qc)
    if emit == "qasm":
        return emit_qasm3(qc, reuse_qubits=opts.reuse_qubits,
                          allow_multi_control=not opts.decompose)
    if emit == "qir":
        return emit_qir_base(qc, reuse_qubits=opts.reuse_qubits)
    raise CompileError(Diagnostic("error", f"unknown emit target {emit!r}"))


def compile_to_circuit(source: str, file: str, opts: Options) -> QCircModule:
    tp = front(source, file, opts)
    m = to_qwir(tp, opts)
    return to_gates(m, opts)


@dataclass
class Stats:
    direct_calls: int
    indirect_calls: int
    gates: Optional[int]
    qubits: Optional[int]

    def render(self) -> str:
        lines = [
            f"direct_calls={self.direct_calls}",
            f"indirect_calls={self.indirect_calls}",
        ]
        if self.gates is not None:
            lines.append(f"gates={self.gates}")
        if self.qubits is not None:
            lines.append(f"qubits={self.qubits}")
        return "\n".join(lines)


def stats_for(source: str, file: str, opts: Options) -> Stats:
    tp = front(source, file, opts)
    m = to_qwir(tp, opts)
    direct, indirect = count_calls(m)
    gates = qubits = None
    try:
        qc = to_gates(m, opts)
        fn = qc.entry_fn
        gates = fn.count_gates()
        qubits = sum(1 for op in fn.ops if op.kind == "qalloc")
    except CompileError:
        pass
    return Stats(direct, indirect, gates, qubits)
