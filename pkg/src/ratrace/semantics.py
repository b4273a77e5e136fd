"""Transition rules pairing program configurations with saturated traces.

A step executes one pending global statement of one thread.  Writes append a
new coherence-unordered write event.  Reads pick a source among the readable
writes and record the forced coherence edges from the other visible writes to
that source, which keeps the trace saturated and, hence, every reachable
trace extendable to a consistent total one.
"""

from __future__ import annotations

from typing import NamedTuple, Union

from .errors import ContractViolationError, NotReadableError, TraceLookupError
from .model import READ, WRITE, Event, EventId, Trace, count_ops
from .program import (
    Configuration,
    Program,
    commit_pending,
    next_global,
)


class WriteObs(NamedTuple):
    """A thread performed its pending write."""

    event: EventId


class ReadObs(NamedTuple):
    """A thread performed its pending read, taking its value from source."""

    read: EventId
    source: EventId


Observation = Union[WriteObs, ReadObs]

ObservationSequence = tuple[Observation, ...]


def observed_event(obs: Observation) -> EventId:
    """The event the observation created."""
    return obs.event if isinstance(obs, WriteObs) else obs.read


def _readable_visible(
    trace: Trace, thread: int, variable: str
) -> tuple[set[EventId], set[EventId]]:
    if thread < 1:
        raise TraceLookupError(f"bad thread index {thread}")
    writes = trace.writes_on(variable)
    n = len(trace)
    thread_mask = trace._mask_of(trace.thread_events(thread))
    # events that can reach the thread through po/rf, the thread's own
    # events included (the reflexive closure)
    reach_thread = thread_mask
    if thread_mask:
        porf = trace._porf_rows()
        for i in range(n):
            if porf[i] & thread_mask:
                reach_thread |= 1 << i
    writes_mask = trace._mask_of(writes)
    rows = trace._porfco_rows(variable)
    readable_set: set[EventId] = set()
    visible_set: set[EventId] = set()
    for w in writes:
        pos = trace._position(w)
        # w is hidden when some same-variable write after it (in the
        # po/rf/co closure) can reach an event of the thread
        if rows[pos] & writes_mask & reach_thread:
            continue
        readable_set.add(w)
        if (1 << pos) & reach_thread:
            visible_set.add(w)
    count_ops(2 * n)
    return readable_set, visible_set


def readable(trace: Trace, thread: int, variable: str) -> set[EventId]:
    """Writes on the variable a new read of the thread may take its value
    from without losing consistency."""
    return _readable_visible(trace, thread, variable)[0]


def visible(trace: Trace, thread: int, variable: str) -> set[EventId]:
    """Readable writes that reach the thread through po/rf; these become
    coherence-before whichever source the new read picks."""
    return _readable_visible(trace, thread, variable)[1]


def extend_write(
    trace: Trace, thread: int, variable: str, value: int
) -> tuple[Trace, EventId]:
    """Append a write event after the thread's last event.  Only po grows;
    read-from and stored coherence stay untouched."""
    eid = EventId(thread, trace.next_index(thread))
    return trace.extended_with_event(Event(eid, WRITE, variable, value)), eid


def extend_read(
    trace: Trace, thread: int, variable: str, source: EventId
) -> tuple[Trace, EventId]:
    """Append a read event taking its value from source.  Adds the rf edge
    and a coherence edge from every other visible write to source."""
    readable_set, visible_set = _readable_visible(trace, thread, variable)
    if source not in readable_set:
        raise NotReadableError(
            f"{source} is not readable on {variable!r} for thread {thread}"
        )
    eid = EventId(thread, trace.next_index(thread))
    extended = trace.extended_with_event(
        Event(eid, READ, variable, None),
        rf_source=source,
        co_additions=[(v, source) for v in visible_set if v != source],
    )
    return extended, eid


def enabled_observations(
    config: Configuration, program: Program, trace: Trace
) -> list[Observation]:
    """All single-step options: one WriteObs per thread with a pending write,
    one ReadObs per readable source per thread with a pending read.  Ordered
    by thread, then by source id."""
    out: list[Observation] = []
    for thread in range(1, program.thread_count + 1):
        pending = next_global(config, program, thread)
        if pending is None:
            continue
        eid = EventId(thread, trace.next_index(thread))
        if pending.kind == "W":
            out.append(WriteObs(eid))
        else:
            out.extend(
                ReadObs(eid, source)
                for source in sorted(readable(trace, thread, pending.variable))
            )
    return out


def step(
    config: Configuration, program: Program, trace: Trace, obs: Observation
) -> tuple[Configuration, Trace]:
    """Execute one observation: advance the owning thread past its pending
    global statement and extend the trace with the matching event."""
    eid = observed_event(obs)
    thread = eid.thread
    if not 1 <= thread <= program.thread_count:
        raise ContractViolationError(f"observation names unknown thread {thread}")
    pending = next_global(config, program, thread)
    if pending is None:
        raise ContractViolationError(f"thread {thread} is finished; {obs} not enabled")
    expected = EventId(thread, trace.next_index(thread))
    if eid != expected:
        raise ContractViolationError(f"observation id {eid} out of order, expected {expected}")
    if isinstance(obs, WriteObs):
        if pending.kind != "W":
            raise ContractViolationError(f"thread {thread} has a pending read, got {obs}")
        extended, _ = extend_write(trace, thread, pending.variable, pending.value)
        return commit_pending(config, thread, pending), extended
    if pending.kind != "R":
        raise ContractViolationError(f"thread {thread} has a pending write, got {obs}")
    value = trace.event(obs.source).value
    extended, _ = extend_read(trace, thread, pending.variable, obs.source)
    return (
        commit_pending(config, thread, pending, read_value=value),
        extended,
    )
