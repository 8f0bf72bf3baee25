"""
Basis algebra: primitive bases, basis vectors, literals, and canon-form bases,
plus polynomial-time span-equivalence checking.

Span checking works on two deques of normalized basis elements, popping one
element from each side per iteration and factoring the larger element whenever
dimensions disagree. Factoring is the inverse of taking row-major products of
vector lists, so the whole check runs in polynomial time even for bases whose
expanded vector lists would be exponentially large.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union


class Prim(Enum):
    STD = "std"
    PM = "pm"
    IJ = "ij"
    FOURIER = "fourier"

    def __str__(self) -> str:
        return self.value

    @property
    def separable(self) -> bool:
        # An N-qubit std/pm/ij basis factors into N single-qubit bases;
        # fourier[N] with N > 1 does not.
        return self is not Prim.FOURIER


# Qubit-literal characters, position 0 leftmost = qubit 0 = MSB of the index.
CHAR_TO_PRIM_BIT = {
    "0": (Prim.STD, "0"),
    "1": (Prim.STD, "1"),
    "p": (Prim.PM, "0"),
    "m": (Prim.PM, "1"),
    "i": (Prim.IJ, "0"),
    "j": (Prim.IJ, "1"),
}

PRIM_BIT_TO_CHAR = {(p, b): c for c, (p, b) in CHAR_TO_PRIM_BIT.items()}


@dataclass(frozen=True)
class PhaseParam:
    """Reference to an angle operand of the owning IR op (symbolic phase)."""

    index: int


Phase = Union[float, PhaseParam]


@dataclass(frozen=True)
class BasisVector:
    """One vector of a basis literal: a prim, eigenbits, and optional phase.

    Bit i of ``eigenbits`` is '1' iff position i is the minus eigenstate of
    ``prim``. ``prim`` is never FOURIER.
    """

    prim: Prim
    eigenbits: str
    phase: Optional[Phase] = None

    def __post_init__(self):
        assert self.prim is not Prim.FOURIER
        assert self.eigenbits and set(self.eigenbits) <= {"0", "1"}

    @property
    def dim(self) -> int:
        return len(self.eigenbits)

    @property
    def index(self) -> int:
        return int(self.eigenbits, 2)

    def chars(self) -> str:
        return "".join(PRIM_BIT_TO_CHAR[(self.prim, b)] for b in self.eigenbits)

    def __str__(self) -> str:
        s = f"'{self.chars()}'"
        if self.phase is not None:
            s += f"@{_fmt_phase(self.phase)}"
        return s


def _fmt_phase(phase: Phase) -> str:
    if isinstance(phase, PhaseParam):
        return f"$({phase.index})"
    return repr(phase)


@dataclass(frozen=True)
class BasisLiteral:
    """A nonempty set of same-prim, same-dim basis vectors written {bv, ...}."""

    vectors: tuple[BasisVector, ...]

    @property
    def dim(self) -> int:
        return self.vectors[0].dim

    @property
    def prim(self) -> Prim:
        return self.vectors[0].prim

    def __str__(self) -> str:
        return "{" + ",".join(str(v) for v in self.vectors) + "}"


@dataclass(frozen=True)
class BuiltinBasis:
    """std[N], pm[N], ij[N], or fourier[N]; always fully spans."""

    prim: Prim
    dim: int

    def __str__(self) -> str:
        return f"{self.prim}[{self.dim}]"


@dataclass(frozen=True)
class Padding:
    """Placeholder element used only inside standardization planning."""

    dim: int

    def __str__(self) -> str:
        return f"pad[{self.dim}]"


BasisElement = Union[BuiltinBasis, BasisLiteral, Padding]


@dataclass(frozen=True)
class Basis:
    """Canon form: a flat, nonempty tensor-product list of basis elements."""

    elements: tuple[BasisElement, ...]

    @property
    def dim(self) -> int:
        return sum(e.dim for e in self.elements)

    def __str__(self) -> str:
        return " + ".join(str(e) for e in self.elements)


def basis(*elements: BasisElement) -> Basis:
    return Basis(tuple(elements))


def lit(*specs: str, prim: Optional[Prim] = None) -> BasisLiteral:
    """Build a literal from qubit-literal strings like '01' or ('1', pi)."""
    vectors = []
    for spec in specs:
        if isinstance(spec, tuple):
            chars, phase = spec
        else:
            chars, phase = spec, None
        vectors.append(vector_from_chars(chars, phase))
    out = BasisLiteral(tuple(vectors))
    if prim is not None:
        out = BasisLiteral(
            tuple(BasisVector(prim, v.eigenbits, v.phase) for v in out.vectors)
        )
    return out


def vector_from_chars(chars: str, phase: Optional[Phase] = None) -> BasisVector:
    """Parse a uniform-prim qubit literal such as '01' or 'pm' into a vector."""
    prims = {CHAR_TO_PRIM_BIT[c][0] for c in chars}
    if len(prims) != 1:
        raise ValueError(f"mixed primitive bases in basis vector '{chars}'")
    bits = "".join(CHAR_TO_PRIM_BIT[c][1] for c in chars)
    return BasisVector(prims.pop(), bits, phase)


def validate_literal(bl: BasisLiteral) -> Optional[str]:
    """Return None if ``bl`` is a valid literal, else a diagnostic message."""
    dims = {v.dim for v in bl.vectors}
    if len(dims) != 1:
        return "basis literal vectors have mismatched dimensions: " + ", ".join(
            str(v) for v in bl.vectors
        )
    prims = {v.prim for v in bl.vectors}
    if len(prims) != 1:
        return "basis literal vectors have mismatched primitive bases: " + ", ".join(
            str(v) for v in bl.vectors
        )
    seen: dict[str, BasisVector] = {}
    for v in bl.vectors:
        if v.eigenbits in seen:
            return f"duplicate eigenbits in basis literal: {seen[v.eigenbits]} vs {v}"
        seen[v.eigenbits] = v
    if len(bl.vectors) > 2 ** bl.dim:
        return "too many vectors in basis literal"
    return None


def fully_spans(e: BasisElement) -> bool:
    if isinstance(e, BuiltinBasis):
        return True
    if isinstance(e, BasisLiteral):
        return len(e.vectors) == 2 ** e.dim
    raise ValueError("padding has no span")


def normalize_element(e: BasisElement) -> BasisElement:
    """Strip phases and sort literal vectors lexicographically by eigenbits."""
    if isinstance(e, BuiltinBasis):
        return e
    assert isinstance(e, BasisLiteral)
    stripped = [BasisVector(v.prim, v.eigenbits) for v in e.vectors]
    stripped.sort(key=lambda v: v.eigenbits)
    return BasisLiteral(tuple(stripped))


def _is_sorted_literal(e: BasisElement) -> bool:
    if not isinstance(e, BasisLiteral):
        return True
    bits = [v.eigenbits for v in e.vectors]
    return all(v.phase is None for v in e.vectors) and bits == sorted(bits)


def factor_full_span(bl: BasisLiteral, n: int) -> Optional[BasisLiteral]:
    """Factor a fully-spanning n-qubit prefix from ``bl``; None on failure.

    ``bl`` must be normalized. On success the remainder literal satisfies
    span(bl) = (full n-qubit space) (x) span(remainder).
    """
    assert bl.dim > n
    m = len(bl.vectors)
    if m % (1 << n) != 0:
        return None
    prefixes = {v.eigenbits[:n] for v in bl.vectors}
    if len(prefixes) < (1 << n):
        return None
    suffix_counts: dict[str, int] = {}
    for v in bl.vectors:
        suf = v.eigenbits[n:]
        suffix_counts[suf] = suffix_counts.get(suf, 0) + 1
    if any(c < (1 << n) for c in suffix_counts.values()):
        return None
    # The >= checks plus pairwise-distinct eigenbits force exact counts.
    assert len(prefixes) == 1 << n
    assert all(c == 1 << n for c in suffix_counts.values())
    remainder = tuple(
        BasisVector(bl.prim, v.eigenbits[n:])
        for v in bl.vectors
        if v.eigenbits[:n] == "0" * n
    )
    return BasisLiteral(remainder)


def factor_literal(bl: BasisLiteral, bl2: BasisLiteral) -> Optional[BasisLiteral]:
    """Factor literal ``bl2`` as a prefix of ``bl``; None on failure.

    Both literals must be normalized.
    """
    assert bl.dim > bl2.dim
    if bl.prim is not bl2.prim:
        return None
    m, m2 = len(bl.vectors), len(bl2.vectors)
    if m % m2 != 0:
        return None
    n = bl2.dim
    wanted = {v.eigenbits for v in bl2.vectors}
    prefixes = {v.eigenbits[:n] for v in bl.vectors}
    if len(prefixes) < m2 or not prefixes <= wanted:
        return None
    suffix_counts: dict[str, int] = {}
    for v in bl.vectors:
        suf = v.eigenbits[n:]
        suffix_counts[suf] = suffix_counts.get(suf, 0) + 1
    if any(c < m2 for c in suffix_counts.values()):
        return None
    assert prefixes == wanted
    assert all(c == m2 for c in suffix_counts.values())
    first = bl2.vectors[0].eigenbits
    remainder = tuple(
        BasisVector(bl.prim, v.eigenbits[n:])
        for v in bl.vectors
        if v.eigenbits[:n] == first
    )
    return BasisLiteral(remainder)


def factor_element(
    big: BasisElement, small: BasisElement, bigdeque: deque
) -> bool:
    """Factor ``small`` from ``big``, pushing the remainder onto ``bigdeque``.

    Dispatches over the three factoring cases; returns False on fallthrough
    (which makes the enclosing span check fail).
    """
    assert big.dim > small.dim
    delta = big.dim - small.dim
    if fully_spans(big) and fully_spans(small):
        # Full spans of equal dimension are all the same space, so the
        # remainder can be named with big's prim regardless of structure.
        bigdeque.appendleft(BuiltinBasis(big.prim, delta))
        return True
    if fully_spans(small) and isinstance(big, BasisLiteral):
        remainder = factor_full_span(big, small.dim)
        if remainder is not None:
            assert _is_sorted_literal(remainder)
            bigdeque.appendleft(remainder)
            return True
        return False
    if isinstance(big, BasisLiteral) and isinstance(small, BasisLiteral):
        remainder = factor_literal(big, small)
        if remainder is not None:
            assert _is_sorted_literal(remainder)
            bigdeque.appendleft(remainder)
            return True
        return False
    return False


@dataclass(frozen=True)
class SpanMismatch:
    """Why a span-equivalence check failed."""

    message: str
    left: Optional[BasisElement] = None
    right: Optional[BasisElement] = None

    def __str__(self) -> str:
        if self.left is not None and self.right is not None:
            return f"{self.message}: {self.left} vs {self.right}"
        return self.message


def _elements_equal(a: BasisElement, b: BasisElement) -> bool:
    if isinstance(a, BuiltinBasis) and isinstance(b, BuiltinBasis):
        return a == b
    if isinstance(a, BasisLiteral) and isinstance(b, BasisLiteral):
        return a == b
    # Builtin vs literal of the same span: equal only if both fully span,
    # which the caller checks separately.
    return False


def check_span_equivalence(b_in: Basis, b_out: Basis) -> Optional[SpanMismatch]:
    """Return None iff span(b_in) = span(b_out); else a mismatch diagnostic.

    Runs the two-deque pop/compare/factor loop; polynomial in the number of
    elements and vectors, never in 2^dim.
    """
    ldeque: deque = deque(normalize_element(e) for e in b_in.elements)
    rdeque: deque = deque(normalize_element(e) for e in b_out.elements)
    while ldeque and rdeque:
        left = ldeque.popleft()
        right = rdeque.popleft()
        if left.dim == right.dim:
            if _elements_equal(left, right):
                continue
            if fully_spans(left) and fully_spans(right):
                continue
            return SpanMismatch("basis elements span different spaces", left, right)
        if left.dim > right.dim:
            big, small, bigdeque = left, right, ldeque
        else:
            big, small, bigdeque = right, left, rdeque
        if not factor_element(big, small, bigdeque):
            return SpanMismatch("cannot factor basis element", left, right)
    if ldeque or rdeque:
        return SpanMismatch("bases have mismatched dimensions")
    return None


def builtin_vectors(e: BuiltinBasis) -> list[BasisVector]:
    """Enumerate a separable builtin's vectors in index order."""
    assert e.prim is not Prim.FOURIER
    return [
        BasisVector(e.prim, format(k, f"0{e.dim}b")) for k in range(1 << e.dim)
    ]


def element_has_phases(e: BasisElement) -> bool:
    return isinstance(e, BasisLiteral) and any(
        v.phase is not None for v in e.vectors
    )


def basis_vector_count(b: Basis) -> int:
    n = 1
    for e in b.elements:
        n *= (1 << e.dim) if isinstance(e, BuiltinBasis) else len(e.vectors)
    return n
