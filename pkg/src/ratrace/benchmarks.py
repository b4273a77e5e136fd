"""Builders for the bundled synthetic program families and corpus access."""

from __future__ import annotations

from pathlib import Path

from .errors import DomainError


def corpus_path(name: str) -> Path:
    """Path of a bundled corpus file."""
    path = Path(__file__).parent / "corpus" / name
    if not path.exists():
        raise DomainError(f"no bundled corpus file named {name!r}")
    return path


def n_writers_program_text(n: int) -> str:
    """n threads each write their index to x once; one thread reads x.
    The read can take any of the n writes or the initial value, and the
    write order is otherwise irrelevant, so there are exactly n+1 weak
    traces."""
    if n < 1:
        raise DomainError("need at least one writer")
    lines = ["vars x"]
    for tid in range(1, n + 1):
        lines += [f"thread t{tid}", f"w x {tid}", "end"]
    lines += [f"thread t{n + 1}", "r x a", "end"]
    return "\n".join(lines) + "\n"


def redundant_co_program_text(n: int) -> str:
    """Two threads each write 1 to x n times; one thread reads x twice.
    All writes store the same value, so only which write each read takes
    matters, giving 3n^2 + 3n + 1 weak traces; write-order enumeration
    would instead visit a factorial number of executions."""
    if n < 1:
        raise DomainError("need at least one write per writer")
    body = ["w x 1"] * n
    lines = ["vars x"]
    for tid in (1, 2):
        lines += [f"thread t{tid}", *body, "end"]
    lines += ["thread t3", "r x a", "r x b", "end"]
    return "\n".join(lines) + "\n"


def redundant_co_looped_text(n: int) -> str:
    """The looped form of the redundant-co writer: a counted loop storing 1
    to x n times.  Unrolling with bound n yields the straight-line form."""
    if n < 1:
        raise DomainError("need at least one iteration")
    writer = [
        "label top",
        "w x 1",
        "l i = i + 1",
        f"l if i < {n} goto top",
    ]
    lines = ["vars x"]
    for tid in (1, 2):
        lines += [f"thread t{tid}", *writer, "end"]
    lines += ["thread t3", "r x a", "r x b", "end"]
    return "\n".join(lines) + "\n"
