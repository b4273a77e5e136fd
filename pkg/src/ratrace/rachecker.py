"""Release-acquire consistency: acyclicity checking and saturation.

A trace satisfies RA when, for every variable x, the union of program order,
read-from, coherence on x, and from-read on x is acyclic.  A partial trace is
RA-consistent when some total coherence extension satisfies RA; that holds
exactly when the trace's saturation passes the acyclicity test, which is what
is_ra_consistent computes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

from .errors import DomainError
from .model import EventId, Trace, derived_fr


@dataclass(frozen=True)
class ConsistencyVerdict:
    """Outcome of a consistency check.  When inconsistent, witness_cycle
    lists events forming a forbidden cycle (each consecutive pair, wrapping
    around, is an edge on some single variable's relation union)."""

    consistent: bool
    witness_cycle: Optional[tuple[EventId, ...]] = None

    def __bool__(self) -> bool:
        return self.consistent


def _adjacency(
    trace: Trace, variable: str, include_fr: bool
) -> dict[EventId, list[EventId]]:
    succ: dict[EventId, list[EventId]] = {}
    for t in trace.thread_ids():
        evs = trace.thread_events(t)
        for a, b in zip(evs, evs[1:]):
            succ.setdefault(a, []).append(b)
    for w, r in trace.rf_pairs():
        succ.setdefault(w, []).append(r)
    pairs = set(trace.co_pairs(variable))
    if include_fr:
        pairs |= derived_fr(trace, variable)
    for a, b in pairs:
        succ.setdefault(a, []).append(b)
    return succ


def _find_cycle(
    nodes: list[EventId], succ: dict[EventId, list[EventId]]
) -> Optional[tuple[EventId, ...]]:
    """First cycle found by iterative depth-first search, or None."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = dict.fromkeys(nodes, WHITE)
    for start in nodes:
        if color[start] != WHITE:
            continue
        color[start] = GRAY
        path = [start]
        stack = [iter(succ.get(start, ()))]
        while stack:
            descended = False
            for nxt in stack[-1]:
                if color[nxt] == GRAY:
                    return tuple(path[path.index(nxt) :])
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    path.append(nxt)
                    stack.append(iter(succ.get(nxt, ())))
                    descended = True
                    break
            if not descended:
                color[path.pop()] = BLACK
                stack.pop()
    return None


def satisfies_ra(trace: Trace) -> ConsistencyVerdict:
    """Acyclicity of po + rf + co^x + fr^x for every variable x."""
    nodes = [ev.id for ev in trace.events()]
    for var in trace.variables:
        cycle = _find_cycle(nodes, _adjacency(trace, var, include_fr=True))
        if cycle is not None:
            return ConsistencyVerdict(False, cycle)
    return ConsistencyVerdict(True)


def _rf_pairs_on(trace: Trace, variable: str) -> Iterator[tuple[EventId, EventId]]:
    for w, r in trace.rf_pairs():
        if trace.event(r).variable == variable:
            yield w, r


def _saturation_gaps(
    trace: Trace, variable: str
) -> set[tuple[EventId, EventId]]:
    """Coherence pairs (e, source) forced by reads but absent from the trace:
    e reaches some read of source without reaching source itself."""
    gaps = set()
    writes = trace.writes_on(variable)
    for source, read in _rf_pairs_on(trace, variable):
        for e in writes:
            if e == source:
                continue
            if trace.reaches_with_var(variable, e, read) and not (
                trace.reaches_with_var(variable, e, source)
            ):
                gaps.add((e, source))
    return gaps


def is_saturated(trace: Trace) -> bool:
    return all(not _saturation_gaps(trace, var) for var in trace.variables)


def saturate(trace: Trace) -> Trace:
    """Least coherence extension closing every saturation gap.  Terminates on
    any input (co grows within a finite set); on RA-inconsistent inputs the
    result may contain coherence cycles, which the acyclicity test then
    rejects."""
    current = trace
    while True:
        grew = False
        for var in current.variables:
            gaps = _saturation_gaps(current, var)
            if gaps:
                current = current.with_co_edges(var, gaps)
                grew = True
        if not grew:
            return current


def is_ra_consistent(trace: Trace) -> ConsistencyVerdict:
    """Whether some total coherence extension satisfies RA; decided by
    saturating first and then testing acyclicity."""
    return satisfies_ra(saturate(trace))


def add_co_edge(trace: Trace, e1: EventId, e2: EventId) -> Trace:
    """Extend coherence with the pair (e1, e2); set semantics, so adding a
    present pair returns an equal trace."""
    ev1 = trace.event(e1)
    ev2 = trace.event(e2)
    if not (ev1.is_write and ev2.is_write):
        raise DomainError(f"coherence pair ({e1}, {e2}) involves a read")
    if ev1.variable != ev2.variable:
        raise DomainError(
            f"coherence pair ({e1}, {e2}) mixes {ev1.variable} and {ev2.variable}"
        )
    if e1 == e2:
        raise DomainError(f"reflexive coherence pair on {e1}")
    return trace.with_co_edges(ev1.variable, [(e1, e2)])


def check_fr_abstract(trace: Trace) -> bool:
    """True when dropping from-read changes no variable's acyclicity verdict.
    Holds for every saturated trace; unsaturated traces may go either way."""
    nodes = [ev.id for ev in trace.events()]
    for var in trace.variables:
        with_fr = _find_cycle(nodes, _adjacency(trace, var, include_fr=True))
        without_fr = _find_cycle(nodes, _adjacency(trace, var, include_fr=False))
        if (with_fr is None) != (without_fr is None):
            return False
    return True
