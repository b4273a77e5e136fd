"""Optimal exploration of weak traces.

Depth-first exploration of a program's reachable (configuration, trace)
states under the saturated read-write semantics.  Writes never branch: a
new write is simply appended and its coherence consequences are derived by
saturation.  Reads branch over every readable source.  A write that might
have served earlier reads is handled by recording a schedule: the shortest
observation sequence that re-executes the write before the read, replayed
once the read's ordinary branches are done.  Writes re-executed inside a
replay declare their own postponements again, so a write postponed past
several reads reaches each of them one replay at a time.  Every terminal
state then carries a distinct weak trace, each one exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import (
    ContractViolationError,
    InternalInvariantError,
    TraceLookupError,
)
from .model import Trace, EventId, WeakTraceKey, new_empty_trace, trace_to_json, weaken
from .program import (
    Configuration,
    Program,
    eval_final_condition,
    initial_configuration,
    is_terminal,
    next_global,
)
from .rachecker import is_saturated, satisfies_ra
from .semantics import (
    Observation,
    ObservationSequence,
    ReadObs,
    WriteObs,
    observed_event,
    readable,
    step,
)

Reporter = Callable[[Trace, WeakTraceKey, Optional[bool]], None]


@dataclass(frozen=True)
class Schedule:
    """Replayable observation sequence ending with a write and the read that
    is redirected to it."""

    observations: ObservationSequence

    def __post_init__(self) -> None:
        if len(self.observations) < 2:
            raise ContractViolationError("schedule needs a final write/read pair")
        write, read = self.observations[-2], self.observations[-1]
        if not isinstance(write, WriteObs) or not isinstance(read, ReadObs):
            raise ContractViolationError(
                "schedule must end with a write then the redirected read"
            )
        if read.source != write.event:
            raise ContractViolationError(
                "schedule's final read must take the scheduled write"
            )

    @property
    def target_read(self) -> EventId:
        last = self.observations[-1]
        assert isinstance(last, ReadObs)
        return last.read


def schedules_equivalent(s1: Schedule, s2: Schedule) -> bool:
    """Order-insensitive equality of the observation sets."""
    return frozenset(s1.observations) == frozenset(s2.observations)


@dataclass
class ReadBookkeeping:
    """Per-read exploration state: schedules waiting to be replayed and
    whether the read may still be redirected to a later write."""

    scheduled: list[Schedule] = field(default_factory=list)
    swap: bool = True


@dataclass(frozen=True)
class ExplorationStats:
    """Summary of one full exploration."""

    terminal_traces: int
    weak_keys: frozenset[WeakTraceKey]
    schedules_created: int
    schedules_deduplicated: int
    events_executed: int
    assertion_outcome: Optional[bool]


def declare_postponed(
    trace: Trace,
    obs_seq: ObservationSequence,
    bookkeeping: dict[EventId, ReadBookkeeping],
    all_matching_reads: bool = False,
) -> tuple[int, int]:
    """Record the just-executed write as a postponed alternative for the
    closest earlier read it could have served: same variable, not already
    ordered before the write, still swappable.  Returns the number of
    schedules inserted and the number discarded as equivalent duplicates."""
    last = obs_seq[-1]
    if not isinstance(last, WriteObs):
        raise ContractViolationError("observation history must end with a write")
    write_id = last.event
    variable = trace.event(write_id).variable
    created = 0
    deduplicated = 0
    for i in range(len(obs_seq) - 2, -1, -1):
        obs = obs_seq[i]
        if not isinstance(obs, ReadObs):
            continue
        read_id = obs.read
        if trace.event(read_id).variable != variable:
            continue
        if trace.reaches_po_rf(read_id, write_id):
            continue
        entry = bookkeeping.get(read_id)
        if entry is None or not entry.swap:
            continue
        prefix = tuple(
            o
            for o in obs_seq[i + 1 : -1]
            if trace.reaches_po_rf(observed_event(o), write_id)
        )
        schedule = Schedule(prefix + (last, ReadObs(read_id, write_id)))
        keys = {frozenset(s.observations) for s in entry.scheduled}
        if frozenset(schedule.observations) in keys:
            deduplicated += 1
        else:
            entry.scheduled.append(schedule)
            created += 1
        if not all_matching_reads:
            break
    return created, deduplicated


class Explorer:
    """One exploration run; holds the per-path bookkeeping and counters."""

    def __init__(
        self,
        program: Program,
        reporter: Optional[Reporter] = None,
        debug_invariants: bool = False,
        all_matching_reads: bool = False,
    ) -> None:
        self._program = program
        self._reporter = reporter
        self._debug = debug_invariants
        self._all_matching = all_matching_reads
        self._budget = program.global_statement_budget()
        self._book: dict[EventId, ReadBookkeeping] = {}
        self._weak_keys: set[WeakTraceKey] = set()
        self._terminals = 0
        self._created = 0
        self._deduplicated = 0
        self._events = 0
        self._final_votes: list[bool] = []

    # -- helpers ---------------------------------------------------------

    def _step(
        self, config: Configuration, trace: Trace, obs: Observation
    ) -> tuple[Configuration, Trace]:
        config, trace = step(config, self._program, trace, obs)
        self._events += 1
        if self._debug:
            if not is_saturated(trace):
                raise InternalInvariantError(
                    f"trace lost saturation after {obs}: {trace_to_json(trace)}"
                )
            if not satisfies_ra(trace):
                raise InternalInvariantError(
                    f"trace violates RA after {obs}: {trace_to_json(trace)}"
                )
        return config, trace

    def _report_terminal(self, config: Configuration, trace: Trace) -> None:
        if not is_terminal(config, self._program):
            raise InternalInvariantError(
                "no enabled observation in a non-terminal configuration"
            )
        key = weaken(trace)
        if key in self._weak_keys:
            raise InternalInvariantError(f"weak trace explored twice: {key}")
        self._weak_keys.add(key)
        self._terminals += 1
        outcome: Optional[bool] = None
        if self._program.final is not None:
            outcome = eval_final_condition(config, self._program)
            self._final_votes.append(outcome)
        if self._reporter is not None:
            self._reporter(trace, key, outcome)

    def stats(self) -> ExplorationStats:
        outcome: Optional[bool] = None
        if self._program.final is not None:
            if self._program.final.mode == "exists":
                outcome = any(self._final_votes)
            else:
                outcome = all(self._final_votes)
        return ExplorationStats(
            terminal_traces=self._terminals,
            weak_keys=frozenset(self._weak_keys),
            schedules_created=self._created,
            schedules_deduplicated=self._deduplicated,
            events_executed=self._events,
            assertion_outcome=outcome,
        )

    # -- the algorithm ---------------------------------------------------

    def explore(
        self,
        config: Configuration,
        trace: Trace,
        obs_seq: ObservationSequence,
    ) -> None:
        if len(obs_seq) > self._budget:
            raise InternalInvariantError(
                f"observation path exceeds the program budget {self._budget}"
            )
        pending = {
            t: next_global(config, self._program, t)
            for t in range(1, self._program.thread_count + 1)
        }
        write_threads = [t for t, p in pending.items() if p and p.kind == "W"]
        read_threads = [t for t, p in pending.items() if p and p.kind == "R"]
        if write_threads:
            thread = min(write_threads)
            obs = WriteObs(EventId(thread, trace.next_index(thread)))
            new_config, new_trace = self._step(config, trace, obs)
            new_seq = obs_seq + (obs,)
            self.explore(new_config, new_trace, new_seq)
            created, deduplicated = declare_postponed(
                new_trace, new_seq, self._book, self._all_matching
            )
            self._created += created
            self._deduplicated += deduplicated
            for entry in self._book.values():
                for schedule in entry.scheduled:
                    if len(schedule.observations) > self._budget:
                        raise InternalInvariantError(
                            "schedule longer than the program budget"
                        )
        elif read_threads:
            thread = min(read_threads)
            variable = pending[thread].variable
            read_id = EventId(thread, trace.next_index(thread))
            sources = readable(trace, thread, variable)
            if not sources:
                raise InternalInvariantError(
                    f"no readable source for {read_id} on {variable!r}"
                )
            entry = ReadBookkeeping()
            self._book[read_id] = entry
            for source in sources:
                obs = ReadObs(read_id, source)
                new_config, new_trace = self._step(config, trace, obs)
                self.explore(new_config, new_trace, obs_seq + (obs,))
            snapshot = list(entry.scheduled)
            for schedule in snapshot:
                self.run_schedule(config, trace, obs_seq, schedule)
            if entry.scheduled != snapshot:
                raise InternalInvariantError(
                    "schedules appeared while replaying for the same read"
                )
            del self._book[read_id]
        else:
            self._report_terminal(config, trace)

    def run_schedule(
        self,
        config: Configuration,
        trace: Trace,
        obs_seq: ObservationSequence,
        schedule: Schedule,
    ) -> None:
        replay_entries: list[EventId] = []
        for obs in schedule.observations:
            try:
                config, trace = self._step(config, trace, obs)
            except (ContractViolationError, TraceLookupError) as exc:
                raise InternalInvariantError(
                    f"scheduled observation {obs} is not enabled; "
                    f"trace: {trace_to_json(trace)}"
                ) from exc
            obs_seq = obs_seq + (obs,)
            if isinstance(obs, ReadObs):
                existing = self._book.get(obs.read)
                if existing is not None:
                    existing.swap = False  # the redirected read itself
                else:
                    self._book[obs.read] = ReadBookkeeping(swap=False)
                    replay_entries.append(obs.read)
            else:
                # A replayed write may still serve reads older than the one
                # this schedule redirects; declaring it again lets the
                # postponement propagate past nearer reads to older ones.
                created, deduplicated = declare_postponed(
                    trace, obs_seq, self._book, self._all_matching
                )
                self._created += created
                self._deduplicated += deduplicated
        self.explore(config, trace, obs_seq)
        for read_id in replay_entries:
            del self._book[read_id]


def explore(
    program: Program,
    config: Configuration,
    trace: Trace,
    obs_seq: ObservationSequence = (),
    reporter: Optional[Reporter] = None,
    debug_invariants: bool = False,
    all_matching_reads: bool = False,
) -> ExplorationStats:
    """Explore all weak traces reachable from the given augmented state and
    return the aggregated statistics.  The state must be consistent: the
    trace saturated and RA-satisfying, produced by obs_seq."""
    if not is_saturated(trace):
        raise ContractViolationError("exploration requires a saturated trace")
    if not satisfies_ra(trace):
        raise ContractViolationError("exploration requires an RA-satisfying trace")
    explorer = Explorer(
        program,
        reporter=reporter,
        debug_invariants=debug_invariants,
        all_matching_reads=all_matching_reads,
    )
    for obs in obs_seq:
        if isinstance(obs, ReadObs):
            explorer._book[obs.read] = ReadBookkeeping()
    explorer.explore(config, trace, obs_seq)
    return explorer.stats()


def explore_program(
    program: Program,
    reporter: Optional[Reporter] = None,
    debug_invariants: bool = False,
    all_matching_reads: bool = False,
) -> ExplorationStats:
    """Explore a whole program from its initial configuration."""
    return explore(
        program,
        initial_configuration(program),
        new_empty_trace(program.variables),
        (),
        reporter=reporter,
        debug_invariants=debug_invariants,
        all_matching_reads=all_matching_reads,
    )
