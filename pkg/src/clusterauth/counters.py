"""Primitive-operation counters.

Counting is scope-local: a `counting()` context installs an OpCounts on a
contextvar and the arithmetic/hash primitives tick it. With no active scope
the primitives run uncounted. Scopes nest; every enclosing scope is ticked,
so a phase total and a per-message total can be collected at once.
"""
from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass, field


@dataclass
class OpCounts:
    t_hf: int = 0
    t_me: int = 0
    t_mm: int = 0
    t_xor: int = 0
    t_sss: int = 0

    def add(self, other: "OpCounts") -> "OpCounts":
        return OpCounts(
            self.t_hf + other.t_hf,
            self.t_me + other.t_me,
            self.t_mm + other.t_mm,
            self.t_xor + other.t_xor,
            self.t_sss + other.t_sss,
        )

    def as_dict(self) -> dict:
        return {
            "t_hf": self.t_hf,
            "t_me": self.t_me,
            "t_mm": self.t_mm,
            "t_xor": self.t_xor,
            "t_sss": self.t_sss,
        }


@dataclass
class _Stack:
    scopes: list = field(default_factory=list)


_active: contextvars.ContextVar[_Stack | None] = contextvars.ContextVar(
    "clusterauth_opcounts", default=None
)


def tick(kind: str, n: int = 1) -> None:
    stack = _active.get()
    if stack is None:
        return
    for counts in stack.scopes:
        setattr(counts, kind, getattr(counts, kind) + n)


@contextlib.contextmanager
def counting():
    """Collect primitive-operation counts for the enclosed code."""
    stack = _active.get()
    token = None
    if stack is None:
        stack = _Stack()
        token = _active.set(stack)
    counts = OpCounts()
    stack.scopes.append(counts)
    try:
        yield counts
    finally:
        stack.scopes.pop()
        if token is not None:
            _active.reset(token)
