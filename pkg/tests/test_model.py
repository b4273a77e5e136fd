"""Structure-level tests: events, trace assembly, reachability, keys."""

from __future__ import annotations

import random

import pytest

from conftest import random_structural_trace
from ratrace.errors import FormatError, TraceLookupError
from ratrace.model import (
    READ,
    WRITE,
    Event,
    EventId,
    build_trace,
    check_structure,
    derived_fr,
    init_event_id,
    is_total,
    new_empty_trace,
    parse_event_id,
    reaches,
    trace_from_json,
    trace_to_dot,
    trace_to_json,
    weaken,
)


def test_event_id_ordering_and_rendering():
    init_x = init_event_id("x")
    init_y = init_event_id("y")
    e11 = EventId(1, 1)
    e21 = EventId(2, 1)
    assert sorted([e21, e11, init_y, init_x]) == [init_x, init_y, e11, e21]
    assert str(init_x) == "init.x"
    assert str(e21) == "t2.1"
    assert parse_event_id("t2.1") == e21
    assert parse_event_id("init.x") == init_x
    with pytest.raises(FormatError):
        parse_event_id("frob")


def test_empty_trace_holds_initializers_only():
    t = new_empty_trace(["x", "y"])
    assert len(t) == 2
    assert t.writes_on("x") == (init_event_id("x"),)
    assert t.event(init_event_id("y")).value == 0
    assert t.thread_ids() == ()
    assert t.co_pairs("x") == set()
    with pytest.raises(TraceLookupError):
        t.writes_on("z")


def test_extension_keeps_stored_co_untouched():
    t = new_empty_trace(["x"])
    t1 = t.extended_with_event(Event(EventId(1, 1), WRITE, "x", 1))
    t2 = t1.extended_with_event(Event(EventId(1, 2), WRITE, "x", 2))
    assert t2.stored_co_pairs("x") == frozenset()
    # implied layer orders the initializer before both writes
    assert t2.co_pairs("x") == {
        (init_event_id("x"), EventId(1, 1)),
        (init_event_id("x"), EventId(1, 2)),
    }
    # the original values are unchanged
    assert len(t) == 1 and len(t1) == 2


def test_extension_rejects_index_gap():
    t = new_empty_trace(["x"])
    with pytest.raises(FormatError):
        t.extended_with_event(Event(EventId(1, 2), WRITE, "x", 1))


def test_read_extension_records_rf():
    t = new_empty_trace(["x"])
    w = Event(EventId(1, 1), WRITE, "x", 5)
    r = Event(EventId(2, 1), READ, "x", None)
    t2 = t.extended_with_event(w).extended_with_event(r, rf_source=w.id)
    assert t2.rf_pairs() == ((w.id, r.id),)
    assert t2.rf_source(r.id) == w.id
    assert t2.reaches_po_rf(w.id, r.id)
    assert not t2.reaches_po_rf(r.id, w.id)


def test_build_trace_rejects_sourceless_read():
    events = [Event(EventId(1, 1), READ, "x", None)]
    with pytest.raises(FormatError):
        build_trace(["x"], events)


def test_build_trace_rejects_cross_variable_rf():
    events = [
        Event(EventId(1, 1), WRITE, "x", 1),
        Event(EventId(2, 1), READ, "y", None),
    ]
    with pytest.raises(FormatError):
        build_trace(["x", "y"], events, rf=[(EventId(1, 1), EventId(2, 1))])


def test_build_trace_folds_initializer_co_into_implied_layer():
    w = Event(EventId(1, 1), WRITE, "x", 1)
    t = build_trace(["x"], [w], co=[(init_event_id("x"), w.id)])
    assert t.stored_co_pairs("x") == frozenset()
    assert (init_event_id("x"), w.id) in t.co_pairs("x")


def _message_passing_trace():
    # t1: W x=1; W y=1    t2: R y (from t1.2); R x (from t1.1)
    wx = Event(EventId(1, 1), WRITE, "x", 1)
    wy = Event(EventId(1, 2), WRITE, "y", 1)
    ry = Event(EventId(2, 1), READ, "y", None)
    rx = Event(EventId(2, 2), READ, "x", None)
    return build_trace(
        ["x", "y"], [wx, wy, ry, rx], rf=[(wy.id, ry.id), (wx.id, rx.id)]
    )


def test_reaches_follows_po_and_rf():
    t = _message_passing_trace()
    assert reaches(t, None, EventId(1, 1), EventId(2, 2))
    assert reaches(t, "x", EventId(1, 1), EventId(2, 2))
    assert not reaches(t, None, EventId(2, 2), EventId(1, 1))
    # initializers have no outgoing po; only co can leave them
    assert reaches(t, "x", init_event_id("x"), EventId(2, 2))
    assert not reaches(t, "y", init_event_id("x"), EventId(1, 1))
    with pytest.raises(TraceLookupError):
        reaches(t, None, EventId(9, 9), EventId(1, 1))


def test_reaches_sees_explicit_co_edges():
    w1 = Event(EventId(1, 1), WRITE, "x", 1)
    w2 = Event(EventId(2, 1), WRITE, "x", 2)
    t = build_trace(["x"], [w1, w2], co=[(w1.id, w2.id)])
    assert reaches(t, "x", w1.id, w2.id)
    assert not t.reaches_po_rf(w1.id, w2.id)
    assert reaches(t, None, w1.id, w2.id)


def _dfs_reachable(trace, variable_filter, start):
    edges: dict[EventId, set[EventId]] = {}
    for t in trace.thread_ids():
        evs = trace.thread_events(t)
        for a, b in zip(evs, evs[1:]):
            edges.setdefault(a, set()).add(b)
    for w, r in trace.rf_pairs():
        edges.setdefault(w, set()).add(r)
    variables = trace.variables if variable_filter is None else [variable_filter]
    for var in variables:
        for a, b in trace.co_pairs(var):
            edges.setdefault(a, set()).add(b)
    frontier = list(edges.get(start, ()))
    seen = set(frontier)
    while frontier:
        node = frontier.pop()
        for nxt in edges.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


def test_reaches_matches_dfs_oracle_on_random_traces():
    rng = random.Random(20260822)
    for _ in range(1000):
        trace = random_structural_trace(rng)
        ids = [ev.id for ev in trace.events()]
        for var in trace.variables:
            for a in ids:
                expected = _dfs_reachable(trace, var, a)
                got = {b for b in ids if reaches(trace, var, a, b)}
                assert got == expected, f"filter {var}, source {a}"
        for a in rng.sample(ids, min(3, len(ids))):
            expected = _dfs_reachable(trace, None, a)
            got = {b for b in ids if reaches(trace, None, a, b)}
            assert got == expected, f"unfiltered, source {a}"


def test_incremental_closures_match_full_rebuild():
    rng = random.Random(7)
    for _ in range(200):
        trace = random_structural_trace(rng)
        check_structure(trace)


def test_weaken_ignores_coherence():
    w1 = Event(EventId(1, 1), WRITE, "x", 1)
    w2 = Event(EventId(2, 1), WRITE, "x", 2)
    r = Event(EventId(3, 1), READ, "x", None)
    base = dict(rf=[(w1.id, r.id)])
    a = build_trace(["x"], [w1, w2, r], co=[(w1.id, w2.id)], **base)
    b = build_trace(["x"], [w1, w2, r], co=[(w2.id, w1.id)], **base)
    assert weaken(a) == weaken(b)
    c = build_trace(["x"], [w1, w2, r], rf=[(w2.id, r.id)])
    assert weaken(a) != weaken(c)


def test_weaken_distinguishes_values_and_threads():
    w_a = build_trace(["x"], [Event(EventId(1, 1), WRITE, "x", 1)])
    w_b = build_trace(["x"], [Event(EventId(1, 1), WRITE, "x", 2)])
    w_c = build_trace(["x"], [Event(EventId(2, 1), WRITE, "x", 1)])
    keys = {weaken(w_a), weaken(w_b), weaken(w_c)}
    assert len(keys) == 3


def test_is_total_requires_all_pairs_ordered():
    w1 = Event(EventId(1, 1), WRITE, "x", 1)
    w2 = Event(EventId(2, 1), WRITE, "x", 2)
    partial = build_trace(["x"], [w1, w2])
    assert not is_total(partial)
    total = partial.with_co_edges("x", [(w1.id, w2.id)])
    assert is_total(total)
    assert is_total(new_empty_trace(["x", "y"]))


def test_is_total_requires_transitivity():
    ws = [Event(EventId(t, 1), WRITE, "x", t) for t in (1, 2, 3)]
    # pairwise ordered but (w1, w3) missing the transitive shortcut
    t = build_trace(
        ["x"],
        ws,
        co=[
            (ws[0].id, ws[1].id),
            (ws[1].id, ws[2].id),
            (ws[2].id, ws[0].id),
        ],
    )
    assert not is_total(t)


def test_derived_fr_steps_from_source_to_later_writes():
    w1 = Event(EventId(1, 1), WRITE, "x", 1)
    w2 = Event(EventId(2, 1), WRITE, "x", 2)
    r = Event(EventId(3, 1), READ, "x", None)
    t = build_trace(
        ["x"], [w1, w2, r], rf=[(w1.id, r.id)], co=[(w1.id, w2.id)]
    )
    assert derived_fr(t, "x") == {(r.id, w2.id)}
    # reading the coherence-last write leaves fr empty
    t2 = build_trace(
        ["x"], [w1, w2, r], rf=[(w2.id, r.id)], co=[(w1.id, w2.id)]
    )
    assert derived_fr(t2, "x") == set()


def test_json_round_trip_preserves_trace():
    rng = random.Random(99)
    for _ in range(50):
        trace = random_structural_trace(rng)
        again = trace_from_json(trace_to_json(trace))
        assert again == trace
        assert weaken(again) == weaken(trace)


def test_json_rejects_malformed_input():
    with pytest.raises(FormatError):
        trace_from_json({"rf": []})
    with pytest.raises(FormatError):
        trace_from_json(
            {
                "events": [
                    {"thread": 1, "index": 1, "kind": "R", "var": "x"},
                ],
                "rf": [],
            }
        )


def test_dot_export_lists_all_edges():
    t = _message_passing_trace()
    dot = trace_to_dot(t)
    assert '"t1.1" -> "t1.2" [style=solid, label="po"];' in dot
    assert '"t1.1" -> "t2.2" [style=dashed, label="rf"];' in dot
    assert '"init.x" -> "t1.1" [style=dotted, label="co"];' in dot
    assert '"init.x" [label="init.x: W x=0"];' in dot
