"""Escape analysis for a small class-based language.

The package provides a frontend (parser + lowering to an operation-level IR),
a concrete small-step interpreter with a collecting oracle, two abstract
domains for reachable creation points, a denotational fixpoint engine, a
set-constraint engine, and a command-line interface.
"""

__version__ = "0.1.0"
