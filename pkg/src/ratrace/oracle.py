"""Independent ground truth for differential testing.

This module re-derives results the exploration stack must agree with, on
purpose without using its machinery: total traces are enumerated by a
stepwise interleaving semantics that inserts each new write at every
coherence position and lets each read take any existing same-variable write;
acyclicity is decided by Kahn's algorithm over explicit edge lists rather
than the cached closures; partial-trace consistency is decided by trying
every total coherence extension.  Only the program interpreter and the weak
key text format are shared, so both sides talk about the same programs and
the same keys.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator, NamedTuple

from .errors import CapacityError, DomainError
from .model import (
    READ,
    WRITE,
    Event,
    EventId,
    Trace,
    WeakTraceKey,
    describe_event,
    init_event_id,
    weak_key_from_parts,
)
from .program import (
    Configuration,
    Lit,
    Program,
    Read as ReadStmt,
    Write as WriteStmt,
    commit_pending,
    initial_configuration,
    next_global,
    parse_program,
)

MAX_ORACLE_EVENTS = 14
MAX_WRITES_PER_VARIABLE = 6

COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class ReferenceResult:
    """What the exhaustive enumeration found for one program."""

    total_traces: int
    weak_keys: frozenset[WeakTraceKey]


@dataclass(frozen=True)
class DifferentialReport:
    """Weak-key set comparison between the exploration and the oracle."""

    matched: bool
    explored: frozenset[WeakTraceKey]
    enumerated: frozenset[WeakTraceKey]

    @property
    def explored_only(self) -> frozenset[WeakTraceKey]:
        return self.explored - self.enumerated

    @property
    def enumerated_only(self) -> frozenset[WeakTraceKey]:
        return self.enumerated - self.explored


class _State(NamedTuple):
    """One node of the stepwise enumeration.  Everything is immutable and
    hashable, so visited-state deduplication is a set lookup."""

    config: Configuration
    events: tuple[Event, ...]  # sorted by id
    rf: frozenset[tuple[EventId, EventId]]  # (write, read)
    co: tuple[tuple[str, tuple[EventId, ...]], ...]  # per-var total orders


def _acyclic_for_variable(
    variable: str,
    events: tuple[Event, ...],
    rf: frozenset[tuple[EventId, EventId]],
    co_order: tuple[EventId, ...],
) -> bool:
    """Kahn's algorithm on po + rf + co^variable + fr^variable.  Coherence
    contributes consecutive pairs of the total order; from-read contributes,
    for each read of the variable, the edge to the write right after its
    source (later writes follow through the coherence chain)."""
    nodes = [ev.id for ev in events]
    var_of = {ev.id: ev.variable for ev in events}
    edges: list[tuple[EventId, EventId]] = []
    by_thread: dict[int, list[EventId]] = {}
    for ev in events:
        if not ev.id.is_init:
            by_thread.setdefault(ev.id.thread, []).append(ev.id)
    for evs in by_thread.values():
        evs.sort()
        edges.extend(zip(evs, evs[1:]))
    edges.extend(rf)
    edges.extend(zip(co_order, co_order[1:]))
    position = {e: i for i, e in enumerate(co_order)}
    for w, r in rf:
        if var_of[r] == variable and w in position:
            after = position[w] + 1
            if after < len(co_order):
                edges.append((r, co_order[after]))
    indegree = dict.fromkeys(nodes, 0)
    successors: dict[EventId, list[EventId]] = {}
    for a, b in edges:
        indegree[b] += 1
        successors.setdefault(a, []).append(b)
    queue = [n for n in nodes if indegree[n] == 0]
    seen = 0
    while queue:
        n = queue.pop()
        seen += 1
        for m in successors.get(n, ()):
            indegree[m] -= 1
            if indegree[m] == 0:
                queue.append(m)
    return seen == len(nodes)


def _check_static_capacity(
    program: Program, max_events: int, max_writes: int
) -> None:
    globals_total = program.global_statement_budget()
    if globals_total > max_events:
        raise CapacityError(
            f"program may execute {globals_total} global statements, "
            f"enumeration bound is {max_events}"
        )
    per_var: dict[str, int] = dict.fromkeys(program.variables, 0)
    for body in program.threads:
        for stmt in body:
            if isinstance(stmt, WriteStmt):
                per_var[stmt.variable] += 1
    for var, count in per_var.items():
        if count > max_writes:
            raise CapacityError(
                f"variable {var!r} has {count} writes, bound is {max_writes}"
            )


def _weak_key_of_state(state: _State, variables: tuple[str, ...]) -> WeakTraceKey:
    thread_events: dict[int, list[str]] = {}
    for ev in state.events:
        if ev.id.is_init:
            continue
        thread_events.setdefault(ev.id.thread, []).append(
            describe_event(ev.kind, ev.variable, ev.value)
        )
    rf_ids = [f"{w}>{r}" for w, r in state.rf]
    return weak_key_from_parts(variables, thread_events, rf_ids)


def enumerate_total_traces(
    program: Program,
    max_events: int = MAX_ORACLE_EVENTS,
    max_writes_per_var: int = MAX_WRITES_PER_VARIABLE,
    reverse_order: bool = False,
) -> ReferenceResult:
    """Exhaustively enumerate the RA-satisfying total traces of a program and
    the weak keys they induce.  reverse_order flips the thread scheduling
    order; the result must not depend on it."""
    _check_static_capacity(program, max_events, max_writes_per_var)
    variables = program.variables
    init_events = tuple(
        Event(init_event_id(v), WRITE, v, 0) for v in sorted(variables)
    )
    start = _State(
        initial_configuration(program),
        init_events,
        frozenset(),
        tuple((v, (init_event_id(v),)) for v in sorted(variables)),
    )
    visited: set[_State] = set()
    totals: set[tuple] = set()
    weak_keys: set[WeakTraceKey] = set()
    stack = [start]
    thread_range = range(1, program.thread_count + 1)
    while stack:
        state = stack.pop()
        if state in visited:
            continue
        visited.add(state)
        threads = reversed(thread_range) if reverse_order else thread_range
        progressed = False
        for thread in threads:
            pending = next_global(state.config, program, thread)
            if pending is None:
                continue
            progressed = True
            count = sum(1 for ev in state.events if ev.id.thread == thread)
            eid = EventId(thread, count + 1)
            orders = dict(state.co)
            if pending.kind == "W":
                new_event = Event(eid, WRITE, pending.variable, pending.value)
                events = tuple(sorted(state.events + (new_event,)))
                config = commit_pending(state.config, thread, pending)
                old_order = orders[pending.variable]
                # position 0 is pinned by the initializer
                for pos in range(1, len(old_order) + 1):
                    new_order = old_order[:pos] + (eid,) + old_order[pos:]
                    if not _acyclic_for_variable(
                        pending.variable, events, state.rf, new_order
                    ):
                        continue
                    co = tuple(
                        (v, new_order if v == pending.variable else o)
                        for v, o in state.co
                    )
                    stack.append(_State(config, events, state.rf, co))
            else:
                new_event = Event(eid, READ, pending.variable, None)
                events = tuple(sorted(state.events + (new_event,)))
                for source_ev in state.events:
                    if source_ev.kind != WRITE:
                        continue
                    if source_ev.variable != pending.variable:
                        continue
                    rf = state.rf | {(source_ev.id, eid)}
                    if not _acyclic_for_variable(
                        pending.variable, events, rf, orders[pending.variable]
                    ):
                        continue
                    config = commit_pending(
                        state.config, thread, pending, read_value=source_ev.value
                    )
                    stack.append(_State(config, events, rf, state.co))
        if not progressed:
            # terminal; relations were kept consistent at every step
            totals.add((state.events, state.rf, state.co))
            weak_keys.add(_weak_key_of_state(state, variables))
    return ReferenceResult(len(totals), frozenset(weak_keys))


# ----- second independent path for static litmus programs --------------------


def _static_events(program: Program) -> list[Event]:
    """The fixed event list of a straight-line constant-write program, or a
    domain error if control flow or values could depend on execution."""
    events = []
    for t, body in enumerate(program.threads, start=1):
        index = 0
        for stmt in body:
            if isinstance(stmt, WriteStmt):
                if not isinstance(stmt.expr, Lit):
                    raise DomainError("write value depends on registers")
                index += 1
                events.append(
                    Event(EventId(t, index), WRITE, stmt.variable, stmt.expr.value)
                )
            elif isinstance(stmt, ReadStmt):
                index += 1
                events.append(Event(EventId(t, index), READ, stmt.variable, None))
            else:
                raise DomainError("program is not straight-line")
    return events


def count_by_relation_enumeration(program: Program) -> ReferenceResult:
    """Totals for a static program by brute force over all (rf, coherence)
    combinations, filtered by the acyclicity test.  Cross-check path for
    enumerate_total_traces; rejects programs whose events are not fixed."""
    from itertools import permutations, product

    events = _static_events(program)
    all_events = tuple(
        sorted(
            events
            + [Event(init_event_id(v), WRITE, v, 0) for v in program.variables]
        )
    )
    reads = [ev for ev in all_events if ev.kind == READ]
    writes_by_var = {
        v: [ev.id for ev in all_events if ev.kind == WRITE and ev.variable == v]
        for v in program.variables
    }
    rf_choices = [[(w, r.id) for w in writes_by_var[r.variable]] for r in reads]
    co_choices = []
    for v in sorted(program.variables):
        rest = [w for w in writes_by_var[v] if not w.is_init]
        co_choices.append(
            [(init_event_id(v),) + perm for perm in permutations(rest)]
        )
    totals = 0
    weak_keys = set()
    for rf_combo in product(*rf_choices):
        rf = frozenset(rf_combo)
        for co_combo in product(*co_choices):
            co = tuple(zip(sorted(program.variables), co_combo))
            if all(
                _acyclic_for_variable(var, all_events, rf, order)
                for var, order in co
            ):
                totals += 1
                state = _State(initial_configuration(program), all_events, rf, co)
                weak_keys.add(_weak_key_of_state(state, program.variables))
    return ReferenceResult(totals, frozenset(weak_keys))


# ----- partial-trace consistency by extension search --------------------------


def _linear_extensions(
    writes: list[EventId], must_precede: frozenset[tuple[EventId, EventId]]
) -> Iterator[tuple[EventId, ...]]:
    """All orderings of writes compatible with the constraint pairs."""
    if not writes:
        yield ()
        return
    for w in writes:
        if any((other, w) in must_precede for other in writes if other != w):
            continue
        for rest in _linear_extensions([x for x in writes if x != w], must_precede):
            yield (w,) + rest


def consistent_total_coherences(
    trace: Trace,
    max_writes_per_var: int = MAX_WRITES_PER_VARIABLE,
) -> Iterator[tuple[tuple[str, tuple[EventId, ...]], ...]]:
    """Every combination of per-variable total coherence orders that extends
    the stored pairs and satisfies RA.  Each item maps variables (sorted) to
    their full order, initializer first."""
    from itertools import product

    per_var_orders = []
    for var in sorted(trace.variables):
        writes = [w for w in trace.writes_on(var) if not w.is_init]
        if len(writes) > max_writes_per_var:
            raise CapacityError(
                f"variable {var!r} has {len(writes)} writes, bound is "
                f"{max_writes_per_var}"
            )
        constraints = frozenset(trace.co_pairs(var))
        init = init_event_id(var)
        if any(dst == init for _, dst in constraints):
            return  # nothing may precede the initializer
        orders = [(init,) + ext for ext in _linear_extensions(writes, constraints)]
        if not orders:
            return
        per_var_orders.append((var, orders))
    events = trace.events()
    rf = frozenset(trace.rf_pairs())
    for combo in product(*(orders for _, orders in per_var_orders)):
        co = tuple((var, order) for (var, _), order in zip(per_var_orders, combo))
        if all(
            _acyclic_for_variable(var, events, rf, order) for var, order in co
        ):
            yield co


def check_consistency_bruteforce(
    trace: Trace, max_writes_per_var: int = MAX_WRITES_PER_VARIABLE
) -> bool:
    """Whether some total coherence extension of the trace satisfies RA,
    decided by trying every per-variable linear extension of the stored
    coherence pairs."""
    return (
        next(consistent_total_coherences(trace, max_writes_per_var), None)
        is not None
    )


def common_coherence(trace: Trace) -> dict[str, frozenset[tuple[EventId, EventId]]]:
    """Per variable, the coherence pairs shared by every consistent total
    extension of the trace.  Raises a domain error when there is none."""
    shared: dict[str, set[tuple[EventId, EventId]]] = {}
    found = False
    for combo in consistent_total_coherences(trace):
        found = True
        for var, order in combo:
            pairs = {
                (order[i], order[j])
                for i in range(len(order))
                for j in range(i + 1, len(order))
            }
            if var in shared:
                shared[var] &= pairs
            else:
                shared[var] = pairs
    if not found:
        raise DomainError("trace has no consistent total extension")
    return {var: frozenset(pairs) for var, pairs in shared.items()}


# ----- fuzzing ----------------------------------------------------------------


@dataclass(frozen=True)
class FuzzSpec:
    """Shape bounds for random program generation."""

    thread_count: int = 2
    variables: int = 2
    statements_per_thread: int = 4
    write_values: tuple[int, int] = (0, 3)
    conditional_probability: float = 0.15
    seed: int = 0

    def validate(self) -> None:
        if not 1 <= self.thread_count <= 3:
            raise DomainError("thread_count must be in 1..3")
        if not 1 <= self.variables <= 2:
            raise DomainError("variables must be in 1..2")
        if not 1 <= self.statements_per_thread <= 5:
            raise DomainError("statements_per_thread must be in 1..5")
        if self.write_values[0] > self.write_values[1]:
            raise DomainError("empty write value range")
        if not 0.0 <= self.conditional_probability <= 1.0:
            raise DomainError("conditional_probability must be in [0, 1]")


_GLOBAL_STATEMENT_BUDGET = 12


def generate_program(spec: FuzzSpec) -> Program:
    """Deterministic random program within the spec bounds: loop-free (all
    jumps forward), no more than 12 global statements overall and 6 writes
    per variable, so the oracle can always enumerate it.  Single-statement
    threads always get a write so the smallest shapes still produce events."""
    spec.validate()
    rng = random.Random(spec.seed)
    variables = ("x", "y")[: spec.variables]
    writes_left = dict.fromkeys(variables, MAX_WRITES_PER_VARIABLE)
    globals_left = _GLOBAL_STATEMENT_BUDGET
    lines = ["vars " + " ".join(variables)]
    for t in range(1, spec.thread_count + 1):
        lines.append(f"thread t{t}")
        length = rng.randint(1, spec.statements_per_thread)
        registers = [f"r{t}{i}" for i in range(2)]
        body: list[str] = []
        labels_at: dict[int, str] = {}
        for i in range(length):
            var = rng.choice(variables)
            reg = rng.choice(registers)
            roll = rng.random()
            jump_roll = rng.random()
            if jump_roll < spec.conditional_probability and i + 1 < length:
                # forward jump over a nonempty suffix keeps threads loop-free
                target = rng.randint(i + 1, length)
                name = labels_at.setdefault(target, f"skip{t}_{target}")
                body.append(
                    f"l if {reg} {rng.choice(COMPARE_OPS)} "
                    f"{rng.randint(*spec.write_values)} goto {name}"
                )
            elif (
                (length == 1 or roll < 0.45)
                and writes_left[var] > 0
                and globals_left > 0
            ):
                writes_left[var] -= 1
                globals_left -= 1
                body.append(f"w {var} {rng.randint(*spec.write_values)}")
            elif roll < 0.80 and globals_left > 0:
                globals_left -= 1
                body.append(f"r {var} {reg}")
            else:
                op = rng.choice(("+", "-", "*"))
                body.append(
                    f"l {reg} = {rng.choice(registers)} {op} "
                    f"{rng.randint(*spec.write_values)}"
                )
        for position, item in enumerate(body):
            if position in labels_at:
                lines.append(f"label {labels_at[position]}")
            lines.append(item)
        if len(body) in labels_at:
            lines.append(f"label {labels_at[len(body)]}")
        lines.append("end")
    if rng.random() < 0.4:
        reg = f"r1{rng.randint(0, 1)}"
        lines.append(
            f"final {rng.choice(('exists', 'forall'))} {reg}@t1 "
            f"{rng.choice(COMPARE_OPS)} {rng.randint(*spec.write_values)}"
        )
    return parse_program("\n".join(lines) + "\n")


def differential_check(
    program: Program,
    max_events: int = MAX_ORACLE_EVENTS,
    max_writes_per_var: int = MAX_WRITES_PER_VARIABLE,
) -> DifferentialReport:
    """Run the optimal exploration and the exhaustive enumeration on the same
    program and compare their weak-key sets."""
    from .dpor import explore_program

    enumerated = enumerate_total_traces(
        program, max_events=max_events, max_writes_per_var=max_writes_per_var
    ).weak_keys
    explored = frozenset(explore_program(program).weak_keys)
    return DifferentialReport(explored == enumerated, explored, enumerated)
