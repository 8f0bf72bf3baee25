"""
Expansion: resolve dimension variables, unroll repeats into tensor products,
and bake captured bit/angle constants into monomorphic function instances.

Runs before type checking. Dimension variables are bound from, in order:
explicit [[...]] bindings, -D command-line bindings (entry only), declared
defaults, and inference from capture lengths or the piped-in register width.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from .ast_nodes import (
    AngleBin, AngleLit, AngleNeg, AnglePi, AngleVar, AngleNode,
    BasisLitNode, BitsNode, BuiltinBasisNode, CallNode, CBin, CExpr, CIndex,
    ClassicalFn, CLit, CNot, CondNode, CReduce, CRepeat, CSlice, CVar,
    DimBin, DimExpr, DimLit, DimVar, DiscardNode, EmbedNode, ExprNode,
    LetNode, MeasureNode, ParamNode, PipeNode, Pos, PredNode, Program,
    QpuFn, QubitLitNode, RepeatNode, TensorNode, TransNode, TypeNode,
    AdjointNode, VarNode, VecNode,
)
from .diagnostics import err


class _Unbound(Exception):
    def __init__(self, name):
        self.name = name


def eval_dim(d: DimExpr, env: dict[str, int]) -> int:
    if isinstance(d, DimLit):
        return d.value
    if isinstance(d, DimVar):
        if d.name not in env:
            raise _Unbound(d.name)
        return env[d.name]
    assert isinstance(d, DimBin)
    a, b = eval_dim(d.left, env), eval_dim(d.right, env)
    if d.op == "+":
        return a + b
    if d.op == "-":
        return a - b
    if d.op == "*":
        return a * b
    if b == 0 or a % b != 0:
        raise err(f"dimension {a}/{b} is not an integer", d.pos)
    return a // b


def _solve_dim(d: DimExpr, target: int, env: dict[str, int], pos: Pos) -> None:
    """Unify eval(d) = target, binding at most one new variable (affine)."""
    try:
        got = eval_dim(d, env)
        if got != target:
            raise err(f"dimension mismatch: expected {target}, found {got}", pos)
        return
    except _Unbound as u:
        var = u.name
    probe1 = eval_dim(d, {**env, var: 1})
    probe2 = eval_dim(d, {**env, var: 2})
    slope = probe2 - probe1
    intercept = probe1 - slope
    if slope == 0 or (target - intercept) % slope != 0:
        raise err(f"cannot solve dimension for {var}", pos)
    value = (target - intercept) // slope
    if value < 1:
        raise err(f"inferred non-positive dimension {var} = {value}", pos)
    env[var] = value


_VALUE, _FN, _BASIS, _ANGLE, _BITS = "value", "fn", "basis", "angle", "bits"


class _Info:
    """Shape info carried during expansion (a light pre-typing pass)."""

    def __init__(self, kind, in_dim=None, out_dim=None):
        self.kind = kind
        self.in_dim = in_dim
        self.out_dim = out_dim

    @staticmethod
    def value(dim):
        return _Info(_VALUE, out_dim=dim)

    @staticmethod
    def fn(in_dim, out_dim):
        return _Info(_FN, in_dim, out_dim)

    @staticmethod
    def basis(dim):
        return _Info(_BASIS, out_dim=dim)


class Expander:
    def __init__(self, program: Program, bindings: dict[str, int], file: str = "<input>"):
        self.program = program
        self.bindings = dict(bindings)
        self.file = file
        self.qpu_instances: dict[tuple, str] = {}
        self.classical_instances: dict[tuple, str] = {}
        self.out_qpus: list[QpuFn] = []
        self.out_classicals: list[ClassicalFn] = []
        self.used_names: set[str] = set()

    # -- entry ---------------------------------------------------------------

    def run(self) -> Program:
        main = self.program.qpu("main")
        if main is None:
            raise err("missing entry kernel 'main'", Pos(1, 1), self.file)
        dim_env: dict[str, int] = {}
        for name, default in zip(main.dim_vars, main.dim_defaults):
            if name in self.bindings:
                dim_env[name] = self.bindings[name]
            elif default is not None:
                dim_env[name] = default
        unknown = set(self.bindings) - set(main.dim_vars)
        if unknown:
            raise err(
                "unknown dimension variable(s) in -D: " + ", ".join(sorted(unknown)),
                main.pos, self.file,
            )
        captures: dict[str, ExprNode] = {}
        for p in main.params:
            if p.type.kind == "qubit":
                raise err("entry kernel 'main' cannot take qubits", p.pos, self.file)
            if p.default is None:
                raise err(f"entry capture '{p.name}' needs a default value", p.pos, self.file)
            if isinstance(p.default, BitsNode):
                _solve_dim(p.type.dim, len(p.default.bits), dim_env, p.pos)
            captures[p.name] = p.default
        for name in main.dim_vars:
            if name not in dim_env:
                raise err(f"dimension variable {name} is unbound; pass -D {name}=...", main.pos, self.file)
        entry = self._instantiate_qpu(main, dim_env, captures, keep_name="main")
        return Program(tuple(self.out_qpus), tuple(self.out_classicals), entry=entry)

    def _fresh_name(self, base: str, dim_env: dict[str, int]) -> str:
        name = base
        if dim_env:
            name += "__" + "_".join(f"{k}{v}" for k, v in sorted(dim_env.items()))
        candidate = name
        k = 2
        while candidate in self.used_names:
            candidate = f"{name}_{k}"
            k += 1
        self.used_names.add(candidate)
        return candidate

    def _capture_key(self, captures: dict[str, ExprNode]):
        out = []
        for k in sorted(captures):
            v = captures[k]
            if isinstance(v, BitsNode):
                out.append((k, "bits", v.bits))
            else:
                assert isinstance(v, AngleNode)
                out.append((k, "angle", _fold_angle(v.angle)))
        return tuple(out)

    # -- qpu instantiation -----------------------------------------------------

    def _instantiate_qpu(
        self,
        fn: QpuFn,
        dim_env: dict[str, int],
        captures: dict[str, ExprNode],
        keep_name: Optional[str] = None,
    ) -> str:
        key = (fn.name, tuple(sorted(dim_env.items())), self._capture_key(captures))
        if key in self.qpu_instances:
            return self.qpu_instances[key]
        name = keep_name or self._fresh_name(fn.name, dim_env)
        self.qpu_instances[key] = name

        value_env: dict[str, Optional[_Info]] = {}
        new_params = []
        for p in fn.params:
            if p.name in captures:
                continue
            ty = self._subst_type(p.type, dim_env)
            if p.type.kind == "qubit":
                value_env[p.name] = _Info.value(eval_dim(ty.dim, {}))
            elif p.type.kind == "bit":
                value_env[p.name] = _Info(_BITS, out_dim=eval_dim(ty.dim, {}))
            else:
                value_env[p.name] = _Info(_ANGLE)
            new_params.append(ParamNode(p.name, ty, None, pos=p.pos))
        qubit_params = [p for p in new_params if p.type.kind == "qubit"]
        if len(qubit_params) > 1:
            raise err(f"kernel {fn.name} has more than one qubit parameter", fn.pos, self.file)
        body, _ = self._expand_expr(fn.body, dim_env, captures, value_env)
        out = QpuFn(
            name, (), (), tuple(new_params),
            self._subst_type(fn.ret_type, dim_env), fn.reversible, body, pos=fn.pos,
        )
        self.out_qpus.append(out)
        return name

    def _subst_type(self, t: TypeNode, dim_env: dict[str, int]) -> TypeNode:
        if t.kind == "angle":
            return t
        try:
            dim = eval_dim(t.dim, dim_env)
        except _Unbound as u:
            raise err(f"dimension variable {u.name} is unbound", t.pos, self.file)
        if dim < 1:
            raise err(f"non-positive dimension {dim}", t.pos, self.file)
        return TypeNode(t.kind, DimLit(dim), pos=t.pos)

    # -- expression expansion ---------------------------------------------------

    def _expand_expr(self, e, dims, captures, env):
        """Return (expanded expr, shape info)."""
        if isinstance(e, QubitLitNode):
            phase = _fold_phase(e.phase, dims, captures, self.file)
            return QubitLitNode(e.chars, phase, pos=e.pos), _Info.value(len(e.chars))
        if isinstance(e, BasisLitNode):
            vecs = []
            for v in e.vectors:
                chars = v.chars
                if v.repeat is not None:
                    chars = chars * self._eval(v.repeat, dims, v.pos)
                phase = _fold_phase(v.phase, dims, captures, self.file)
                vecs.append(VecNode(chars, None, phase, pos=v.pos))
            dim = len(vecs[0].chars) if vecs else 0
            return BasisLitNode(tuple(vecs), pos=e.pos), _Info.basis(dim)
        if isinstance(e, BuiltinBasisNode):
            dim = self._eval(e.dim, dims, e.pos)
            if dim < 1:
                raise err("basis dimension must be positive", e.pos, self.file)
            return BuiltinBasisNode(e.prim, DimLit(dim), pos=e.pos), _Info.basis(dim)
        if isinstance(e, TensorNode):
            parts, infos = [], []
            for p in e.parts:
                np_, info = self._expand_expr(p, dims, captures, env)
                parts.append(np_)
                infos.append(info)
            kinds = {i.kind for i in infos}
            if kinds == {_FN}:
                return (
                    TensorNode(tuple(parts), pos=e.pos),
                    _Info.fn(sum(i.in_dim for i in infos), sum(i.out_dim for i in infos)),
                )
            if kinds <= {_VALUE, _BASIS} and len(kinds) == 1:
                total = sum(i.out_dim for i in infos)
                k = _VALUE if kinds == {_VALUE} else _BASIS
                return TensorNode(tuple(parts), pos=e.pos), _Info(k, out_dim=total)
            raise err("tensor operands must all be values, bases, or functions", e.pos, self.file)
        if isinstance(e, RepeatNode):
            n = self._eval(e.count, dims, e.pos)
            if n < 1:
                raise err("repeat count must be positive", e.pos, self.file)
            inner, info = self._expand_expr(e.operand, dims, captures, env)
            if n == 1:
                return inner, info
            parts = tuple(inner for _ in range(n))
            if info.kind == _FN:
                return TensorNode(parts, pos=e.pos), _Info.fn(n * info.in_dim, n * info.out_dim)
            return TensorNode(parts, pos=e.pos), _Info(info.kind, out_dim=n * info.out_dim)
        if isinstance(e, TransNode):
            b_in, i1 = self._expand_expr(e.b_in, dims, captures, env)
            b_out, i2 = self._expand_expr(e.b_out, dims, captures, env)
            if i1.kind not in (_BASIS,) or i2.kind not in (_BASIS,):
                raise err("translation operands must be bases", e.pos, self.file)
            return TransNode(b_in, b_out, pos=e.pos), _Info.fn(i1.out_dim, i1.out_dim)
        if isinstance(e, PipeNode):
            value, vi = self._expand_expr(e.value, dims, captures, env)
            fn, fi = self._resolve_fn(e.fn, dims, captures, env, hint=vi.out_dim)
            return PipeNode(value, fn, pos=e.pos), _Info.value(fi.out_dim)
        if isinstance(e, AdjointNode):
            fn, fi = self._resolve_fn(e.fn, dims, captures, env, hint=None)
            return AdjointNode(fn, pos=e.pos), fi
        if isinstance(e, PredNode):
            b, bi = self._expand_expr(e.basis, dims, captures, env)
            if bi.kind != _BASIS:
                raise err("predicate must be a basis", e.pos, self.file)
            fn, fi = self._resolve_fn(e.fn, dims, captures, env, hint=None)
            return PredNode(b, fn, pos=e.pos), _Info.fn(bi.out_dim + fi.in_dim, bi.out_dim + fi.out_dim)
        if isinstance(e, MeasureNode):
            b, bi = self._expand_expr(e.basis, dims, captures, env)
            if bi.kind != _BASIS:
                raise err(".measure applies to a basis", e.pos, self.file)
            return MeasureNode(b, pos=e.pos), _Info.fn(bi.out_dim, bi.out_dim)
        if isinstance(e, DiscardNode):
            dim = self._eval(e.dim, dims, e.pos)
            return DiscardNode(DimLit(dim), pos=e.pos), _Info.fn(dim, 0)
        if isinstance(e, EmbedNode):
            return self._resolve_embed(e, dims, captures, env, hint=None)
        if isinstance(e, CondNode):
            then, ti = self._resolve_fn(e.then, dims, captures, env, hint=None)
            flag, fi = self._expand_expr(e.flag, dims, captures, env)
            els, ei = self._resolve_fn(e.els, dims, captures, env, hint=ti.in_dim)
            return CondNode(then, flag, els, pos=e.pos), ti
        if isinstance(e, VarNode):
            if e.name in captures:
                c = captures[e.name]
                if isinstance(c, BitsNode):
                    return c, _Info(_BITS, out_dim=len(c.bits))
                return c, _Info(_ANGLE)
            if e.name in env:
                return e, env[e.name]
            if self.program.qpu(e.name) is not None:
                return self._resolve_fn(e, dims, captures, env, hint=None)
            raise err(f"unknown name '{e.name}'", e.pos, self.file)
        if isinstance(e, CallNode):
            return self._resolve_fn(e, dims, captures, env, hint=None)
        if isinstance(e, AngleNode):
            return AngleNode(_fold_phase(e.angle, dims, captures, self.file), pos=e.pos), _Info(_ANGLE)
        if isinstance(e, BitsNode):
            return e, _Info(_BITS, out_dim=len(e.bits))
        if isinstance(e, LetNode):
            value, vi = self._expand_expr(e.value, dims, captures, env)
            inner_env = dict(env)
            types = []
            if len(e.names) == 1:
                ty = e.types[0]
                if ty is not None:
                    ty = self._subst_type(ty, dims)
                    if eval_dim(ty.dim, {}) != vi.out_dim:
                        raise err("let type does not match value", e.pos, self.file)
                inner_env[e.names[0]] = _Info(
                    _BITS if vi.kind == _BITS else vi.kind, out_dim=vi.out_dim
                )
                types.append(ty)
            else:
                total = 0
                for name, ty in zip(e.names, e.types):
                    if ty is None:
                        raise err("destructuring let requires types", e.pos, self.file)
                    sty = self._subst_type(ty, dims)
                    d = eval_dim(sty.dim, {})
                    inner_env[name] = _Info(vi.kind, out_dim=d)
                    types.append(sty)
                    total += d
                if total != vi.out_dim:
                    raise err(
                        f"destructuring splits {total} of {vi.out_dim} qubits/bits",
                        e.pos, self.file,
                    )
            body, bi = self._expand_expr(e.body, dims, captures, inner_env)
            return LetNode(e.names, tuple(types), value, body, pos=e.pos), bi
        raise err(f"unexpected node {type(e).__name__}", getattr(e, "pos", Pos()), self.file)

    def _eval(self, d: DimExpr, dims: dict[str, int], pos: Pos) -> int:
        try:
            return eval_dim(d, dims)
        except _Unbound as u:
            raise err(f"dimension variable {u.name} is unbound", pos, self.file)

    # -- function-position resolution -------------------------------------------

    def _resolve_fn(self, e, dims, captures, env, hint: Optional[int]):
        """Expand an expression in function position, instantiating kernels."""
        if isinstance(e, VarNode) and self.program.qpu(e.name) is not None:
            e = CallNode(e.name, (), (), pos=e.pos)
        if isinstance(e, CallNode):
            target = self.program.qpu(e.fn)
            if target is None:
                raise err(f"unknown kernel '{e.fn}'", e.pos, self.file)
            return self._instantiate_call(e, target, dims, captures, env, hint)
        if isinstance(e, EmbedNode):
            return self._resolve_embed(e, dims, captures, env, hint)
        new_e, info = self._expand_expr(e, dims, captures, env)
        if info.kind != _FN:
            raise err("expected a function value", getattr(e, "pos", Pos()), self.file)
        return new_e, info

    def _instantiate_call(self, call: CallNode, target: QpuFn, dims, captures, env, hint):
        inner_dims: dict[str, int] = {}
        for var, d in zip(target.dim_vars, call.dim_args):
            inner_dims[var] = self._eval(d, dims, call.pos)
        if len(call.dim_args) > len(target.dim_vars):
            raise err(f"too many dimension bindings for {target.name}", call.pos, self.file)
        cap_params = [p for p in target.params if p.type.kind != "qubit"]
        qubit_params = [p for p in target.params if p.type.kind == "qubit"]
        if len(call.args) > len(cap_params):
            raise err(f"too many capture arguments for {target.name}", call.pos, self.file)
        if len(call.args) < len(cap_params):
            raise err(
                f"kernel {target.name} needs {len(cap_params)} capture argument(s)",
                call.pos, self.file,
            )
        inner_captures: dict[str, ExprNode] = {}
        for p, a in zip(cap_params, call.args):
            na, info = self._expand_expr(a, dims, captures, env)
            if p.type.kind == "bit":
                if info.kind != _BITS or not isinstance(na, BitsNode):
                    raise err(f"capture '{p.name}' must be a constant bit string", call.pos, self.file)
                _solve_dim(p.type.dim, len(na.bits), inner_dims, call.pos)
                inner_captures[p.name] = na
            else:
                if info.kind != _ANGLE:
                    raise err(f"capture '{p.name}' must be an angle", call.pos, self.file)
                inner_captures[p.name] = na if isinstance(na, AngleNode) else AngleNode(na)
        for name, default in zip(target.dim_vars, target.dim_defaults):
            if name not in inner_dims and default is not None:
                inner_dims[name] = default
        if hint is not None and qubit_params:
            try:
                _solve_dim(qubit_params[0].type.dim, hint, inner_dims, call.pos)
            except _Unbound:
                pass
        missing = [v for v in target.dim_vars if v not in inner_dims]
        if missing:
            raise err(
                f"cannot infer dimension(s) {', '.join(missing)} for {target.name}; "
                f"bind them explicitly with {target.name}[[...]]",
                call.pos, self.file,
            )
        inst = self._instantiate_qpu(target, inner_dims, inner_captures)
        in_dim = eval_dim(qubit_params[0].type.dim, inner_dims) if qubit_params else 0
        ret = target.ret_type
        out_dim = eval_dim(ret.dim, inner_dims)
        return VarNode(inst, pos=call.pos), _Info.fn(in_dim, out_dim)

    def _resolve_embed(self, e: EmbedNode, dims, captures, env, hint):
        target = self.program.classical(e.fn)
        if target is None:
            raise err(f"unknown classical function '{e.fn}'", e.pos, self.file)
        inner_dims: dict[str, int] = {}
        for var, d in zip(target.dim_vars, e.dim_args):
            inner_dims[var] = self._eval(d, dims, e.pos)
        cap_params = list(target.params[: len(e.args)])
        inner_captures: dict[str, str] = {}
        for p, a in zip(cap_params, e.args):
            na, info = self._expand_expr(a, dims, captures, env)
            if info.kind != _BITS or not isinstance(na, BitsNode):
                raise err(f"capture '{p.name}' must be a constant bit string", e.pos, self.file)
            _solve_dim(p.type.dim, len(na.bits), inner_dims, e.pos)
            inner_captures[p.name] = na.bits
        for name, default in zip(target.dim_vars, target.dim_defaults):
            if name not in inner_dims and default is not None:
                inner_dims[name] = default
        free_params = target.params[len(e.args):]
        if hint is not None:
            # xor embeds act on inputs+outputs; sign embeds on inputs alone.
            in_expr: DimExpr = DimLit(0)
            for p in free_params:
                in_expr = DimBin("+", in_expr, p.type.dim)
            if e.mode == "xor":
                in_expr = DimBin("+", in_expr, target.ret_type.dim)
            try:
                _solve_dim(in_expr, hint, inner_dims, e.pos)
            except _Unbound:
                pass
        missing = [v for v in target.dim_vars if v not in inner_dims]
        if missing:
            raise err(
                f"cannot infer dimension(s) {', '.join(missing)} for {target.name}; "
                f"bind them explicitly with {target.name}[[...]]",
                e.pos, self.file,
            )
        inst = self._instantiate_classical(target, inner_dims, inner_captures)
        n = sum(eval_dim(p.type.dim, inner_dims) for p in free_params)
        k = eval_dim(target.ret_type.dim, inner_dims)
        if e.mode == "sign" and k != 1:
            raise err(".sign requires a single output bit", e.pos, self.file)
        width = n + k if e.mode == "xor" else n
        return EmbedNode(inst, e.mode, (), (), pos=e.pos), _Info.fn(width, width)

    def _instantiate_classical(self, fn: ClassicalFn, dim_env, captures: dict[str, str]) -> str:
        key = (fn.name, tuple(sorted(dim_env.items())), tuple(sorted(captures.items())))
        if key in self.classical_instances:
            return self.classical_instances[key]
        name = self._fresh_name(fn.name, dim_env)
        self.classical_instances[key] = name
        params = tuple(
            ParamNode(p.name, self._subst_type(p.type, dim_env), None, pos=p.pos)
            for p in fn.params
            if p.name not in captures
        )
        body = _expand_cexpr(fn.body, dim_env, captures, self.file)
        self.out_classicals.append(
            ClassicalFn(
                name, (), (), params, self._subst_type(fn.ret_type, dim_env),
                body, pos=fn.pos,
            )
        )
        return name


def _expand_cexpr(e: CExpr, dims: dict[str, int], captures: dict[str, str], file: str) -> CExpr:
    if isinstance(e, CVar):
        if e.name in captures:
            return CLit(captures[e.name], pos=e.pos)
        return e
    if isinstance(e, CLit):
        return e
    if isinstance(e, CBin):
        return CBin(
            e.op,
            _expand_cexpr(e.left, dims, captures, file),
            _expand_cexpr(e.right, dims, captures, file),
            pos=e.pos,
        )
    if isinstance(e, CNot):
        return CNot(_expand_cexpr(e.operand, dims, captures, file), pos=e.pos)
    if isinstance(e, CIndex):
        return CIndex(
            _expand_cexpr(e.operand, dims, captures, file),
            DimLit(eval_dim(e.index, dims)),
            pos=e.pos,
        )
    if isinstance(e, CSlice):
        return CSlice(
            _expand_cexpr(e.operand, dims, captures, file),
            DimLit(eval_dim(e.lo, dims)),
            DimLit(eval_dim(e.hi, dims)),
            pos=e.pos,
        )
    if isinstance(e, CReduce):
        return CReduce(e.op, _expand_cexpr(e.operand, dims, captures, file), pos=e.pos)
    if isinstance(e, CRepeat):
        return CRepeat(
            _expand_cexpr(e.operand, dims, captures, file),
            DimLit(eval_dim(e.count, dims)),
            pos=e.pos,
        )
    raise err(f"unexpected classical node {type(e).__name__}", getattr(e, "pos", Pos()), file)


def _fold_phase(a, dims, captures, file):
    if a is None:
        return None
    return _subst_angle(a, captures, file)


def _subst_angle(a, captures, file):
    if isinstance(a, AngleVar):
        if a.name in captures and isinstance(captures[a.name], AngleNode):
            return captures[a.name].angle
        raise err(f"unknown angle '{a.name}'", a.pos, file)
    if isinstance(a, AngleNeg):
        return AngleNeg(_subst_angle(a.operand, captures, file), pos=a.pos)
    if isinstance(a, AngleBin):
        return AngleBin(
            a.op,
            _subst_angle(a.left, captures, file),
            _subst_angle(a.right, captures, file),
            pos=a.pos,
        )
    return a


def _fold_angle(a) -> float:
    import math

    if isinstance(a, AngleLit):
        return a.value
    if isinstance(a, AnglePi):
        return math.pi
    if isinstance(a, AngleNeg):
        return -_fold_angle(a.operand)
    if isinstance(a, AngleBin):
        x, y = _fold_angle(a.left), _fold_angle(a.right)
        return {"+": x + y, "-": x - y, "*": x * y, "/": x / y if y else float("nan")}[a.op]
    raise err("angle is not a constant", getattr(a, "pos", Pos()))


def expand(program: Program, bindings: dict[str, int], file: str = "<input>") -> Program:
    """Monomorphize ``program`` starting from its entry kernel."""
    return Expander(program, bindings, file).run()
