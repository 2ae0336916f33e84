"""Frontend: parse ``.oo`` source and lower it to the operation-level IR."""

from .ir import (Block, Branch, Candidate, Exit, Goto, MethodIR, Op, Program,
                 boundary_envs)
from .lower import FrontendError, load_program, load_source
from .syntax import parse_source

__all__ = [
    "Block",
    "Branch",
    "Candidate",
    "Exit",
    "FrontendError",
    "Goto",
    "MethodIR",
    "Op",
    "Program",
    "boundary_envs",
    "load_program",
    "load_source",
    "parse_source",
]
