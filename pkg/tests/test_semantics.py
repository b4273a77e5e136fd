"""Transition-rule tests: readable/visible sets and trace extension."""

from __future__ import annotations

import pytest

import conftest
from ratrace.errors import ContractViolationError, NotReadableError
from ratrace.model import (
    READ,
    WRITE,
    Event,
    EventId,
    build_trace,
    init_event_id,
    new_empty_trace,
    weaken,
)
from ratrace.program import initial_configuration, is_terminal, parse_program
from ratrace.rachecker import is_saturated, satisfies_ra
from ratrace.semantics import (
    ReadObs,
    WriteObs,
    enabled_observations,
    extend_read,
    extend_write,
    observed_event,
    readable,
    step,
    visible,
)


def _two_writers_one_reader_trace():
    """Three writes on x: e2 then e3 in thread 1 (coherence-ordered), e1 alone
    in thread 3; thread 2 already read x from e3 and then wrote y.  The next
    read of thread 2 may take e3 or e1, but never the hidden e2; only e3 is
    visible to thread 2."""
    e2 = Event(EventId(1, 1), WRITE, "x", 1)
    e3 = Event(EventId(1, 2), WRITE, "x", 2)
    e4 = Event(EventId(2, 1), READ, "x", None)
    e5 = Event(EventId(2, 2), WRITE, "y", 1)
    e1 = Event(EventId(3, 1), WRITE, "x", 3)
    trace = build_trace(
        ["x", "y"],
        [e2, e3, e4, e5, e1],
        rf=[(e3.id, e4.id)],
        co=[(e2.id, e3.id)],
    )
    return trace, e1.id, e2.id, e3.id


def test_readable_excludes_hidden_writes():
    trace, e1, e2, e3 = _two_writers_one_reader_trace()
    assert readable(trace, 2, "x") == {e1, e3}
    assert visible(trace, 2, "x") == {e3}


def test_extend_read_adds_coherence_from_visible_writes():
    trace, e1, e2, e3 = _two_writers_one_reader_trace()
    before = trace.stored_co_pairs("x")
    extended, new_id = extend_read(trace, 2, "x", e1)
    assert new_id == EventId(2, 3)
    assert (e1, new_id) in extended.rf_pairs()
    assert extended.stored_co_pairs("x") - before == {(e3, e1)}
    assert is_saturated(extended) and satisfies_ra(extended).consistent


def test_extend_read_from_sole_visible_write_adds_no_coherence():
    trace, e1, e2, e3 = _two_writers_one_reader_trace()
    extended, _ = extend_read(trace, 2, "x", e3)
    assert extended.stored_co_pairs("x") == trace.stored_co_pairs("x")


def test_extend_read_rejects_hidden_source():
    trace, e1, e2, e3 = _two_writers_one_reader_trace()
    with pytest.raises(NotReadableError):
        extend_read(trace, 2, "x", e2)


def test_empty_trace_readability():
    t = new_empty_trace(["x"])
    assert readable(t, 1, "x") == {init_event_id("x")}
    # nothing reaches a thread with no events yet
    assert visible(t, 1, "x") == set()


def test_racing_writes_walkthrough():
    t = conftest.racing_writes_only()
    for thread in (1, 2):
        assert readable(t, thread, "x") == {conftest.W1.id, conftest.W2.id}
    assert visible(t, 1, "x") == {conftest.W1.id}
    assert visible(t, 2, "x") == {conftest.W2.id}
    # thread 1 reads the other thread's write: the own write gets ordered
    # before the source, and afterwards only the source stays readable to
    # the second thread
    extended, _ = extend_read(t, 1, "x", conftest.W2.id)
    assert extended == conftest.racing_after_first_read(saturated=True)
    assert readable(extended, 2, "x") == {conftest.W2.id}


def test_extend_write_touches_only_po():
    trace, e1, e2, e3 = _two_writers_one_reader_trace()
    extended, new_id = extend_write(trace, 3, "x", 9)
    assert new_id == EventId(3, 2)
    assert extended.stored_co_pairs("x") == trace.stored_co_pairs("x")
    assert extended.rf_pairs() == trace.rf_pairs()
    assert extended.reaches_po_rf(e1, new_id)
    assert is_saturated(extended) and satisfies_ra(extended).consistent


def _brute_readable(trace, thread, variable):
    from ratrace.model import reaches

    out = set()
    thread_events = trace.thread_events(thread)
    for e in trace.writes_on(variable):
        hidden = False
        for e2 in trace.writes_on(variable):
            for e3 in thread_events:
                if reaches(trace, variable, e, e2) and (
                    e2 == e3 or trace.reaches_po_rf(e2, e3)
                ):
                    hidden = True
        if not hidden:
            out.add(e)
    return out


def _brute_visible(trace, thread, variable):
    thread_events = trace.thread_events(thread)
    return {
        e
        for e in _brute_readable(trace, thread, variable)
        if any(e == e2 or trace.reaches_po_rf(e, e2) for e2 in thread_events)
    }


def test_readable_visible_match_definition_on_random_traces():
    for sat in conftest.random_saturated_consistent_traces(400, seed=101):
        threads = set(sat.thread_ids()) | {1, 2}
        for thread in threads:
            for var in sat.variables:
                r = readable(sat, thread, var)
                v = visible(sat, thread, var)
                assert r == _brute_readable(sat, thread, var)
                assert v == _brute_visible(sat, thread, var)
                assert v <= r


def test_extension_preserves_saturation_and_consistency():
    for sat in conftest.random_saturated_consistent_traces(150, seed=311):
        threads = sorted(set(sat.thread_ids()) | {1})
        for thread in threads:
            var = sat.variables[0]
            extended, _ = extend_write(sat, thread, var, 7)
            assert is_saturated(extended)
            assert satisfies_ra(extended).consistent
            for source in readable(sat, thread, var):
                extended, _ = extend_read(sat, thread, var, source)
                assert is_saturated(extended)
                assert satisfies_ra(extended).consistent


RACING_READS = """\
vars x
thread t1
w x 1
r x a
end
thread t2
w x 2
r x b
end
"""


def test_enabled_observations_enumerates_reads_per_source():
    program = parse_program(RACING_READS)
    config = initial_configuration(program)
    trace = new_empty_trace(program.variables)
    first = enabled_observations(config, program, trace)
    assert first == [WriteObs(EventId(1, 1)), WriteObs(EventId(2, 1))]
    for obs in list(first):
        config, trace = step(config, program, trace, obs)
    after_writes = enabled_observations(config, program, trace)
    t1_reads = [o for o in after_writes if observed_event(o).thread == 1]
    assert t1_reads == [
        ReadObs(EventId(1, 2), EventId(1, 1)),
        ReadObs(EventId(1, 2), EventId(2, 1)),
    ]
    assert len(after_writes) == 4


def test_enabled_observations_empty_on_terminal():
    program = parse_program("vars x\nthread t1\nw x 1\nend\n")
    config = initial_configuration(program)
    trace = new_empty_trace(program.variables)
    config, trace = step(config, program, trace, WriteObs(EventId(1, 1)))
    assert is_terminal(config, program)
    assert enabled_observations(config, program, trace) == []


def test_step_delivers_read_values_to_registers():
    program = parse_program(RACING_READS)
    config = initial_configuration(program)
    trace = new_empty_trace(program.variables)
    for obs in (
        WriteObs(EventId(1, 1)),
        WriteObs(EventId(2, 1)),
        ReadObs(EventId(1, 2), EventId(2, 1)),
        ReadObs(EventId(2, 2), EventId(2, 1)),
    ):
        config, trace = step(config, program, trace, obs)
    assert dict(config.threads[0].registers)["a"] == 2
    assert dict(config.threads[1].registers)["b"] == 2
    assert is_terminal(config, program)
    assert len(trace) == 5  # one initializer + four events


def test_step_rejects_unenabled_observations():
    program = parse_program(RACING_READS)
    config = initial_configuration(program)
    trace = new_empty_trace(program.variables)
    with pytest.raises(ContractViolationError):
        step(config, program, trace, ReadObs(EventId(1, 1), init_event_id("x")))
    with pytest.raises(ContractViolationError):
        step(config, program, trace, WriteObs(EventId(1, 2)))
    with pytest.raises(ContractViolationError):
        step(config, program, trace, WriteObs(EventId(9, 1)))
    config2, trace2 = step(config, program, trace, WriteObs(EventId(1, 1)))
    config2, trace2 = step(config2, program, trace2, WriteObs(EventId(2, 1)))
    done = step(config2, program, trace2, ReadObs(EventId(1, 2), EventId(2, 1)))
    with pytest.raises(ContractViolationError):
        step(done[0], program, done[1], WriteObs(EventId(1, 3)))


def test_registers_depend_only_on_read_sources():
    """Two interleavings with identical rf choices give identical final
    registers and weak traces."""
    program = parse_program(RACING_READS)

    def run(order):
        config = initial_configuration(program)
        trace = new_empty_trace(program.variables)
        for obs in order:
            config, trace = step(config, program, trace, obs)
        return config, weaken(trace)

    a = run(
        (
            WriteObs(EventId(1, 1)),
            WriteObs(EventId(2, 1)),
            ReadObs(EventId(1, 2), EventId(2, 1)),
            ReadObs(EventId(2, 2), EventId(2, 1)),
        )
    )
    b = run(
        (
            WriteObs(EventId(2, 1)),
            WriteObs(EventId(1, 1)),
            ReadObs(EventId(2, 2), EventId(2, 1)),
            ReadObs(EventId(1, 2), EventId(2, 1)),
        )
    )
    assert a == b
