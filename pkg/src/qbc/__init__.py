"""qbc: a compiler and simulator for a basis-oriented quantum language."""

__version__ = "0.1.0"
