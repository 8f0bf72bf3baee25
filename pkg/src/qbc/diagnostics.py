"""Positioned diagnostics shared by every pipeline stage."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .ast_nodes import Pos


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning
    message: str
    pos: Optional[Pos] = None
    file: Optional[str] = None

    def render(self) -> str:
        where = self.file or "<input>"
        if self.pos is not None:
            where += f":{self.pos.line}:{self.pos.col}"
        return f"{where}: {self.severity}: {self.message}"


class CompileError(Exception):
    """Carries one or more diagnostics out of a failing stage."""

    def __init__(self, diags):
        if isinstance(diags, Diagnostic):
            diags = [diags]
        self.diagnostics = list(diags)
        super().__init__("\n".join(d.render() for d in self.diagnostics))


def err(message: str, pos: Optional[Pos] = None, file: Optional[str] = None) -> CompileError:
    return CompileError(Diagnostic("error", message, pos, file))
