#!/usr/bin/env python3
"""Regenerate the golden QASM/QIR outputs for the benchmark programs.

Each golden is verified before freezing: the QASM text is re-ingested and
its exact output distribution compared against the directly compiled
circuit.
"""

from __future__ import annotations

import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from qbc.backends import read_qasm3  # noqa: E402
from qbc.pipeline import Options, compile_source, compile_to_circuit  # noqa: E402
from qbc.run import distribution  # noqa: E402

BENCHMARKS = ["bell", "bv", "dj", "grover", "simon", "period", "teleport"]


def main() -> int:
    golden_dir = ROOT / "tests" / "goldens"
    golden_dir.mkdir(exist_ok=True)
    for name in BENCHMARKS:
        src_path = ROOT / "benchmarks" / f"{name}.qw"
        source = src_path.read_text()
        opts = Options()
        qasm = compile_source(source, str(src_path), opts, "qasm")
        circuit = compile_to_circuit(source, str(src_path), opts)
        want = distribution(circuit, all_bits=True)
        got = distribution(read_qasm3(qasm), all_bits=True)
        assert _close(want, got), f"{name}: re-ingested distribution differs"
        (golden_dir / f"{name}.qasm").write_text(qasm, newline="\n")
        try:
            qir = compile_source(source, str(src_path), opts, "qir")
            (golden_dir / f"{name}.ll").write_text(qir, newline="\n")
        except Exception as e:  # teleport branches: QASM only
            print(f"{name}: no QIR golden ({e})")
        print(f"{name}: ok")
    return 0


def _close(a: dict, b: dict) -> bool:
    keys = set(a) | set(b)
    return all(abs(a.get(k, 0.0) - b.get(k, 0.0)) < 1e-9 for k in keys)


if __name__ == "__main__":
    raise SystemExit(main())
