"""Collecting oracle: gather the concrete states crossing each watchpoint.

This is the ground truth the abstract engines are tested against.  For each
entry state the interpreter runs one deterministic trace; every state that
crosses a watchpoint (user-labeled points and method exits) is recorded,
deduplicated modulo location renaming and garbage.  A run that exhausts its
step budget is flagged ``truncated``: the recorded sets are then a subset of
the real collecting semantics, which keeps soundness comparisons one-sided
but still valid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .concrete import Interpreter, Truncated, canonical_state, entry_state, state_key
from .frontend.ir import Program


@dataclass
class CollectedStates:
    """States recorded at watchpoints, keyed by watchpoint name."""

    program: Program
    states: dict[str, dict] = field(default_factory=dict)
    truncated: bool = False
    stuck: bool = False
    steps_used: int = 0

    def record(self, method: str, watch: str, frame: dict, memory: dict):
        bucket = self.states.setdefault(watch, {})
        key = state_key(frame, memory)
        if key not in bucket:
            bucket[key] = canonical_state(frame, memory)

    def at(self, watch: str) -> list:
        """The distinct canonical states seen at a watchpoint."""
        return list(self.states.get(watch, {}).values())

    def watch_names(self) -> list[str]:
        return sorted(self.states)


def collect(program: Program, entries=None, budget: int = 100_000,
            method: str | None = None) -> CollectedStates:
    """Run the program and collect watchpoint states.

    ``entries`` is an iterable of (frame, memory) entry states; by default
    the single standard entry state is used.
    """
    result = CollectedStates(program)
    name = method or program.entry
    if name is None:
        raise ValueError("no entry method configured")
    if entries is None:
        entries = [entry_state(program, name)]
    for state in entries:
        interp = Interpreter(program, budget=budget, on_watch=result.record)
        try:
            final = interp.run_entry(name, state)
            if final is None:
                result.stuck = True
        except Truncated:
            result.truncated = True
        result.steps_used += budget - max(interp.remaining, 0)
    return result
