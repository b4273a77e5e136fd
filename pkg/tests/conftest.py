"""Shared test helpers: seeded random trace generation."""

from __future__ import annotations

import random

from ratrace.model import (
    READ,
    WRITE,
    Event,
    EventId,
    Trace,
    build_trace,
    init_event_id,
)


# Shared fixture traces for the two-thread racing-writes program
# (t1: x:=1; a:=x and t2: x:=2; b:=x) and the two litmus shapes used
# across the checker and oracle tests.

W1 = Event(EventId(1, 1), WRITE, "x", 1)
R1 = Event(EventId(1, 2), READ, "x", None)
W2 = Event(EventId(2, 1), WRITE, "x", 2)
R2 = Event(EventId(2, 2), READ, "x", None)


def racing_writes_only() -> Trace:
    """Both writes done, no reads yet (trivially saturated)."""
    return build_trace(["x"], [W1, W2])


def racing_after_first_read(saturated: bool) -> Trace:
    """t1 has read x from t2's write; the forced co edge is present or not."""
    co = [(W1.id, W2.id)] if saturated else []
    return build_trace(["x"], [W1, W2, R1], rf=[(W2.id, R1.id)], co=co)


def racing_crossed_reads() -> Trace:
    """t1 read x:=2 but t2 read x:=1; no coherence choice can satisfy RA."""
    return build_trace(
        ["x"], [W1, W2, R1, R2], rf=[(W2.id, R1.id), (W1.id, R2.id)]
    )


def two_plus_two_w_trace() -> Trace:
    """Four writes (t1: x:=1; y:=2 and t2: y:=1; x:=2) with both value-2
    writes placed coherence-first."""
    events = [
        Event(EventId(1, 1), WRITE, "x", 1),
        Event(EventId(1, 2), WRITE, "y", 2),
        Event(EventId(2, 1), WRITE, "y", 1),
        Event(EventId(2, 2), WRITE, "x", 2),
    ]
    co = [(EventId(2, 2), EventId(1, 1)), (EventId(1, 2), EventId(2, 1))]
    return build_trace(["x", "y"], events, co=co)


def s_shape_trace() -> Trace:
    """t1: x:=1; y:=1 and t2: a:=y; x:=2, with the read taking y:=1 and
    x:=2 placed coherence-first (the classic forbidden shape)."""
    events = [
        Event(EventId(1, 1), WRITE, "x", 1),
        Event(EventId(1, 2), WRITE, "y", 1),
        Event(EventId(2, 1), READ, "y", None),
        Event(EventId(2, 2), WRITE, "x", 2),
    ]
    return build_trace(
        ["x", "y"],
        events,
        rf=[(EventId(1, 2), EventId(2, 1))],
        co=[(EventId(2, 2), EventId(1, 1))],
    )


def random_saturated_consistent_traces(
    count: int, seed: int, **shape
) -> list[Trace]:
    """Saturations of random co-free traces, filtered to RA-satisfying ones.
    Every returned trace is saturated and consistent.  Extra keyword
    arguments bound the underlying structural generator."""
    from ratrace.rachecker import satisfies_ra, saturate

    rng = random.Random(seed)
    out = []
    while len(out) < count:
        base = random_structural_trace(rng, **shape)
        stripped = build_trace(base.variables, base.events(), base.rf_pairs())
        sat = saturate(stripped)
        if satisfies_ra(sat).consistent:
            out.append(sat)
    return out


def random_structural_trace(
    rng: random.Random,
    max_threads: int = 3,
    max_events: int = 12,
    max_variables: int = 2,
    max_writes_per_var: int | None = None,
) -> Trace:
    """A random well-formed trace; no consistency guarantee (co pairs are
    arbitrary same-variable write pairs, cycles allowed).  A write cap keeps
    traces within brute-force extension capacity when one is given."""
    variables = ["x", "y", "z"][: rng.randint(1, max_variables)]
    n_threads = rng.randint(1, max_threads)
    budget = rng.randint(0, max_events)
    events: list[Event] = []
    writes = {v: [init_event_id(v)] for v in variables}
    reads = []
    for t in range(1, n_threads + 1):
        length = rng.randint(0, budget // n_threads + 1)
        for i in range(1, length + 1):
            var = rng.choice(variables)
            eid = EventId(t, i)
            capped = (
                max_writes_per_var is not None
                and len(writes[var]) - 1 >= max_writes_per_var
            )
            if rng.random() < 0.55 and not capped:
                events.append(Event(eid, WRITE, var, rng.randint(0, 3)))
                writes[var].append(eid)
            else:
                events.append(Event(eid, READ, var, None))
                reads.append((eid, var))
    rf = [(rng.choice(writes[var]), r) for r, var in reads]
    co = []
    for var in variables:
        ws = [w for w in writes[var] if not w.is_init]
        for i, a in enumerate(ws):
            for b in ws[i + 1 :]:
                roll = rng.random()
                if roll < 0.25:
                    co.append((a, b))
                elif roll < 0.5:
                    co.append((b, a))
    return build_trace(variables, events, rf, co)
