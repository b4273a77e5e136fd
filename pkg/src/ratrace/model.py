"""Events, traces, relations, and reachability queries.

A trace is a graph over events: per-thread program order (po), a read-from
edge for every read (rf), and a per-variable coherence order over writes (co).
co is stored as explicit pairs and is not kept transitive; every query that
needs transitivity goes through cached bitset closures.

Each variable has one initializer write (value 0) that belongs to no thread.
The initializer is coherence-before every other write on its variable; those
pairs are implied by event presence rather than stored, so extending a trace
with a write never touches the stored co set.
"""

from __future__ import annotations

from typing import Iterable, Iterator, NamedTuple, Optional

from .errors import DomainError, FormatError, TraceLookupError

INIT_THREAD = 0

WRITE = "W"
READ = "R"

# Counter of elementary relation operations (bitset row touches), used by the
# performance-budget tests.  Closure rebuilds count n^3, incremental appends
# and mask scans count n.
_OP_COUNT = 0


def reset_op_counter() -> None:
    global _OP_COUNT
    _OP_COUNT = 0


def op_counter() -> int:
    return _OP_COUNT


def count_ops(n: int) -> None:
    global _OP_COUNT
    _OP_COUNT += n


class EventId(NamedTuple):
    """Identity of an event: real events are (thread >= 1, index >= 1);
    initializers are (INIT_THREAD, 0, variable).  Tuple ordering puts
    initializers before all real threads."""

    thread: int
    index: int
    init_var: str = ""

    @property
    def is_init(self) -> bool:
        return self.thread == INIT_THREAD

    def __str__(self) -> str:
        if self.is_init:
            return f"init.{self.init_var}"
        return f"t{self.thread}.{self.index}"


def init_event_id(variable: str) -> EventId:
    return EventId(INIT_THREAD, 0, variable)


def parse_event_id(text: str) -> EventId:
    """Inverse of str(EventId): accepts "t<k>.<i>" and "init.<var>"."""
    head, _, tail = text.partition(".")
    if head == "init" and tail:
        return init_event_id(tail)
    if head.startswith("t") and tail:
        try:
            return EventId(int(head[1:]), int(tail))
        except ValueError:
            pass
    raise FormatError(f"malformed event id {text!r}")


class Event(NamedTuple):
    id: EventId
    kind: str  # WRITE or READ
    variable: str
    value: Optional[int]  # writes only; None for reads

    @property
    def is_write(self) -> bool:
        return self.kind == WRITE


def _warshall(rows: list[int]) -> None:
    """In-place transitive closure of a bitset adjacency matrix."""
    n = len(rows)
    for k in range(n):
        bit = 1 << k
        rk = rows[k]
        for i in range(n):
            if rows[i] & bit:
                rows[i] |= rk
    count_ops(n * n * n)


def _append_sink(rows: list[int], pred_positions: Iterable[int]) -> None:
    """Extend a closure matrix with one new event that has only incoming
    edges (from pred_positions) and no outgoing ones."""
    n = len(rows)
    pred_mask = 0
    for p in pred_positions:
        pred_mask |= 1 << p
    new_bit = 1 << n
    for i in range(n):
        if rows[i] & pred_mask:
            rows[i] |= new_bit
    p = pred_mask
    while p:
        low = p & -p
        rows[low.bit_length() - 1] |= new_bit
        p ^= low
    rows.append(0)
    count_ops(n)


class Trace:
    """Value-semantic trace; all mutating operations return fresh copies."""

    __slots__ = (
        "_variables",
        "_events",
        "_order",
        "_pos",
        "_threads",
        "_writes",
        "_reads",
        "_rf",
        "_co",
        "_porf",
        "_porfco",
    )

    def __init__(self, variables: Iterable[str]):
        variables = tuple(variables)
        if len(set(variables)) != len(variables):
            raise FormatError(f"duplicate variable in {variables}")
        self._variables = variables
        self._events: dict[EventId, Event] = {}
        self._order: list[EventId] = []
        self._pos: dict[EventId, int] = {}
        self._threads: dict[int, list[EventId]] = {}
        self._writes: dict[str, list[EventId]] = {v: [] for v in variables}
        self._reads: dict[str, list[EventId]] = {v: [] for v in variables}
        self._rf: dict[EventId, EventId] = {}
        self._co: dict[str, set[tuple[EventId, EventId]]] = {v: set() for v in variables}
        self._porf: list[int] = []
        self._porfco: dict[str, list[int]] = {v: [] for v in variables}
        for v in variables:
            self._insert_event(Event(init_event_id(v), WRITE, v, 0))
            self._porf.append(0)
            for x in variables:
                self._porfco[x].append(0)

    # ----- plumbing -------------------------------------------------------

    def _clone(self) -> "Trace":
        t = object.__new__(Trace)
        t._variables = self._variables
        t._events = dict(self._events)
        t._order = list(self._order)
        t._pos = dict(self._pos)
        t._threads = {k: list(v) for k, v in self._threads.items()}
        t._writes = {k: list(v) for k, v in self._writes.items()}
        t._reads = {k: list(v) for k, v in self._reads.items()}
        t._rf = dict(self._rf)
        t._co = {k: set(v) for k, v in self._co.items()}
        t._porf = list(self._porf)
        t._porfco = {k: list(v) for k, v in self._porfco.items()}
        return t

    def _insert_event(self, event: Event) -> None:
        eid = event.id
        if eid in self._events:
            raise FormatError(f"duplicate event id {eid}")
        if event.variable not in self._writes:
            raise TraceLookupError(f"unknown variable {event.variable!r}")
        if event.kind not in (WRITE, READ):
            raise FormatError(f"bad event kind {event.kind!r}")
        if event.kind == READ and event.value is not None:
            raise FormatError(f"read event {eid} carries a value")
        if event.kind == WRITE and event.value is None:
            raise FormatError(f"write event {eid} has no value")
        if eid.is_init:
            if eid.index != 0 or eid.init_var != event.variable or event.value != 0:
                raise FormatError(f"malformed initializer {event}")
        else:
            if eid.index < 1 or eid.thread < 1 or eid.init_var:
                raise FormatError(f"malformed event id {eid}")
            evs = self._threads.setdefault(eid.thread, [])
            if eid.index != len(evs) + 1:
                raise FormatError(
                    f"event {eid} breaks per-thread index contiguity"
                )
            evs.append(eid)
        self._events[eid] = event
        self._pos[eid] = len(self._order)
        self._order.append(eid)
        if event.kind == WRITE:
            self._writes[event.variable].append(eid)
        else:
            self._reads[event.variable].append(eid)

    def _edge_pairs(self, var: Optional[str]) -> Iterator[tuple[EventId, EventId]]:
        # po edges between consecutive thread events generate the same
        # closure as the full per-thread order
        for evs in self._threads.values():
            yield from zip(evs, evs[1:])
        for r, w in self._rf.items():
            yield w, r
        if var is not None:
            yield from self.co_pairs(var)

    def _rebuild_closure(self, var: Optional[str]) -> list[int]:
        n = len(self._order)
        rows = [0] * n
        pos = self._pos
        for a, b in self._edge_pairs(var):
            rows[pos[a]] |= 1 << pos[b]
        _warshall(rows)
        return rows

    # ----- accessors ------------------------------------------------------

    @property
    def variables(self) -> tuple[str, ...]:
        return self._variables

    def __len__(self) -> int:
        return len(self._order)

    def events(self) -> tuple[Event, ...]:
        return tuple(self._events[e] for e in sorted(self._order))

    def has_event(self, eid: EventId) -> bool:
        return eid in self._events

    def event(self, eid: EventId) -> Event:
        try:
            return self._events[eid]
        except KeyError:
            raise TraceLookupError(f"unknown event {eid}") from None

    def thread_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self._threads))

    def thread_events(self, thread: int) -> tuple[EventId, ...]:
        return tuple(self._threads.get(thread, ()))

    def next_index(self, thread: int) -> int:
        return len(self._threads.get(thread, ())) + 1

    def writes_on(self, variable: str) -> tuple[EventId, ...]:
        if variable not in self._writes:
            raise TraceLookupError(f"unknown variable {variable!r}")
        return tuple(self._writes[variable])

    def reads_on(self, variable: str) -> tuple[EventId, ...]:
        if variable not in self._reads:
            raise TraceLookupError(f"unknown variable {variable!r}")
        return tuple(self._reads[variable])

    def rf_pairs(self) -> tuple[tuple[EventId, EventId], ...]:
        """(write, read) pairs."""
        return tuple((w, r) for r, w in self._rf.items())

    def rf_source(self, read: EventId) -> EventId:
        try:
            return self._rf[read]
        except KeyError:
            raise TraceLookupError(f"{read} has no read-from source") from None

    def co_pairs(self, variable: str) -> set[tuple[EventId, EventId]]:
        """The full coherence relation on one variable: stored pairs plus the
        implied initializer-before-every-write pairs."""
        if variable not in self._co:
            raise TraceLookupError(f"unknown variable {variable!r}")
        pairs = set(self._co[variable])
        init = init_event_id(variable)
        pairs.update((init, w) for w in self._writes[variable] if not w.is_init)
        return pairs

    def stored_co_pairs(self, variable: str) -> frozenset[tuple[EventId, EventId]]:
        return frozenset(self._co[variable])

    def po_pairs(self) -> set[tuple[EventId, EventId]]:
        """The full program-order relation (all before/after pairs)."""
        pairs = set()
        for evs in self._threads.values():
            for i, a in enumerate(evs):
                pairs.update((a, b) for b in evs[i + 1 :])
        return pairs

    # ----- reachability ---------------------------------------------------

    def reaches_po_rf(self, e1: EventId, e2: EventId) -> bool:
        """Nonempty-path reachability in po + rf."""
        count_ops(1)
        return bool(self._porf[self._pos[e1]] & (1 << self._pos[e2]))

    def reaches_with_var(self, variable: str, e1: EventId, e2: EventId) -> bool:
        """Nonempty-path reachability in po + rf + co^variable."""
        count_ops(1)
        return bool(self._porfco[variable][self._pos[e1]] & (1 << self._pos[e2]))

    def _porf_rows(self) -> list[int]:
        return self._porf

    def _porfco_rows(self, variable: str) -> list[int]:
        return self._porfco[variable]

    def _position(self, eid: EventId) -> int:
        return self._pos[eid]

    def _mask_of(self, ids: Iterable[EventId]) -> int:
        mask = 0
        for e in ids:
            mask |= 1 << self._pos[e]
        return mask

    # ----- functional updates ---------------------------------------------

    def extended_with_event(
        self,
        event: Event,
        rf_source: Optional[EventId] = None,
        co_additions: Iterable[tuple[EventId, EventId]] = (),
    ) -> "Trace":
        """Append one fresh po-maximal event.  rf_source links a read to its
        write; co_additions are coherence pairs on the event's variable (they
        may point at old events, forcing a closure rebuild)."""
        t = self._clone()
        prior = t._threads.get(event.id.thread, ())
        porf_preds = [prior[-1]] if prior else []
        t._insert_event(event)
        if rf_source is not None:
            if rf_source not in t._events:
                raise TraceLookupError(f"unknown rf source {rf_source}")
            t._rf[event.id] = rf_source
            porf_preds.append(rf_source)
        pred_pos = [t._pos[p] for p in porf_preds]
        _append_sink(t._porf, pred_pos)
        for x in t._variables:
            preds = list(pred_pos)
            if event.kind == WRITE and event.variable == x:
                preds.append(t._pos[init_event_id(x)])
            _append_sink(t._porfco[x], preds)
        new_pairs = [p for p in co_additions if p not in t.co_pairs(event.variable)]
        if new_pairs:
            t._co[event.variable].update(new_pairs)
            t._porfco[event.variable] = t._rebuild_closure(event.variable)
        return t

    def with_co_edges(
        self, variable: str, pairs: Iterable[tuple[EventId, EventId]]
    ) -> "Trace":
        """Add explicit coherence pairs on one variable (existing pairs are
        ignored; set semantics)."""
        if variable not in self._co:
            raise TraceLookupError(f"unknown variable {variable!r}")
        existing = self.co_pairs(variable)
        new_pairs = [p for p in pairs if p not in existing]
        if not new_pairs:
            return self
        t = self._clone()
        t._co[variable].update(new_pairs)
        t._porfco[variable] = t._rebuild_closure(variable)
        return t

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            set(self._variables) == set(other._variables)
            and self._events == other._events
            and self._rf == other._rf
            and all(self.co_pairs(v) == other.co_pairs(v) for v in self._variables)
        )

    def __hash__(self):  # pragma: no cover - traces are not hashable
        raise TypeError("Trace is unhashable; use weaken() or canonical keys")

    def __repr__(self) -> str:
        return f"<Trace events={len(self)} vars={','.join(self._variables)}>"


# ----- constructors --------------------------------------------------------


def new_empty_trace(variables: Iterable[str]) -> Trace:
    """A trace holding only the initializer write of each variable."""
    return Trace(variables)


def build_trace(
    variables: Iterable[str],
    events: Iterable[Event],
    rf: Iterable[tuple[EventId, EventId]] = (),
    co: Iterable[tuple[EventId, EventId]] = (),
) -> Trace:
    """Assemble an arbitrary trace from parts (fixtures, JSON import, fuzzing).

    rf pairs are (write, read).  Initializer-sourced co pairs are accepted and
    folded into the implied layer.  Every read must have exactly one source.
    """
    trace = Trace(variables)
    for event in sorted(events, key=lambda e: e.id):
        if event.id.is_init:
            if not trace.has_event(event.id):
                raise FormatError(f"initializer {event.id} for undeclared variable")
            continue
        trace._insert_event(event)
    rf_map: dict[EventId, EventId] = {}
    for w, r in rf:
        for e in (w, r):
            if not trace.has_event(e):
                raise FormatError(f"rf references unknown event {e}")
        we, re = trace.event(w), trace.event(r)
        if not we.is_write or re.is_write:
            raise FormatError(f"rf pair ({w}, {r}) is not write->read")
        if we.variable != re.variable:
            raise FormatError(f"rf pair ({w}, {r}) mixes variables")
        if r in rf_map:
            raise FormatError(f"read {r} has two rf sources")
        rf_map[r] = w
    for var in trace.variables:
        for r in trace.reads_on(var):
            if r not in rf_map:
                raise FormatError(f"read {r} has no rf source")
    trace._rf = rf_map
    for a, b in co:
        for e in (a, b):
            if not trace.has_event(e):
                raise FormatError(f"co references unknown event {e}")
        ea, eb = trace.event(a), trace.event(b)
        if not (ea.is_write and eb.is_write) or ea.variable != eb.variable:
            raise FormatError(f"co pair ({a}, {b}) is not same-variable writes")
        if a == b:
            raise FormatError(f"reflexive co pair on {a}")
        if a.is_init:
            continue  # implied
        trace._co[ea.variable].add((a, b))
    trace._porf = trace._rebuild_closure(None)
    for var in trace.variables:
        trace._porfco[var] = trace._rebuild_closure(var)
    return trace


# ----- spec-level queries ---------------------------------------------------


def reaches(
    trace: Trace,
    variable_filter: Optional[str],
    e1: EventId,
    e2: EventId,
) -> bool:
    """Nonempty-path reachability in po + rf + co, with co restricted to one
    variable when a filter is given (all variables' co otherwise)."""
    for e in (e1, e2):
        if not trace.has_event(e):
            raise TraceLookupError(f"unknown event {e}")
    if variable_filter is not None:
        return trace.reaches_with_var(variable_filter, e1, e2)
    rows = [0] * len(trace)
    for var in trace.variables:
        var_rows = trace._porfco_rows(var)
        for i in range(len(rows)):
            rows[i] |= var_rows[i]
    # closure of the union is not the union of closures; close once more
    _warshall(rows)
    return bool(rows[trace._position(e1)] & (1 << trace._position(e2)))


WeakTraceKey = str


def weak_key_from_parts(
    variables: Iterable[str],
    thread_events: dict[int, list[str]],
    rf_ids: Iterable[str],
) -> WeakTraceKey:
    """Canonical text key shared by every trace producer.  thread_events maps
    thread index to rendered event descriptions in program order; rf_ids are
    rendered "source>read" strings."""
    vars_part = ",".join(sorted(variables))
    threads_part = ";".join(
        f"t{t}=" + ",".join(descs)
        for t, descs in sorted(thread_events.items())
        if descs
    )
    rf_part = ",".join(sorted(rf_ids))
    return f"vars[{vars_part}] po[{threads_part}] rf[{rf_part}]"


def describe_event(kind: str, variable: str, value: Optional[int]) -> str:
    if kind == WRITE:
        return f"W {variable}={value}"
    return f"R {variable}"


def weaken(trace: Trace) -> WeakTraceKey:
    """Canonical key of the trace with all coherence edges removed."""
    thread_events = {
        t: [
            describe_event(ev.kind, ev.variable, ev.value)
            for ev in map(trace.event, trace.thread_events(t))
        ]
        for t in trace.thread_ids()
    }
    rf_ids = [f"{w}>{r}" for w, r in trace.rf_pairs()]
    return weak_key_from_parts(trace.variables, thread_events, rf_ids)


def is_total(trace: Trace) -> bool:
    """True iff every variable's coherence relation is a strict total order
    (all distinct write pairs ordered, irreflexive, transitive)."""
    for var in trace.variables:
        writes = trace.writes_on(var)
        pairs = trace.co_pairs(var)
        if any((w, w) in pairs for w in writes):
            return False
        for i, a in enumerate(writes):
            for b in writes[i + 1 :]:
                if (a, b) not in pairs and (b, a) not in pairs:
                    return False
        succ: dict[EventId, set[EventId]] = {}
        for a, b in pairs:
            succ.setdefault(a, set()).add(b)
        for a, bs in succ.items():
            for b in bs:
                if not succ.get(b, set()) <= bs:
                    return False
    return True


def derived_fr(trace: Trace, variable: str) -> set[tuple[EventId, EventId]]:
    """fr on one variable: read r is fr-before any write coherence-after r's
    source."""
    co_succ: dict[EventId, set[EventId]] = {}
    for a, b in trace.co_pairs(variable):
        co_succ.setdefault(a, set()).add(b)
    fr = set()
    for w, r in trace.rf_pairs():
        if trace.event(r).variable == variable:
            fr.update((r, w2) for w2 in co_succ.get(w, ()))
    return fr


def check_structure(trace: Trace) -> None:
    """Debug-mode structural validation; raises FormatError on violation."""
    for var in trace.variables:
        init = init_event_id(var)
        if not trace.has_event(init):
            raise FormatError(f"missing initializer for {var}")
    for t in trace.thread_ids():
        for i, eid in enumerate(trace.thread_events(t)):
            if eid.index != i + 1:
                raise FormatError(f"po index gap at {eid}")
    for w, r in trace.rf_pairs():
        we, re = trace.event(w), trace.event(r)
        if not we.is_write or re.is_write or we.variable != re.variable:
            raise FormatError(f"bad rf pair ({w}, {r})")
    for var in trace.variables:
        for a, b in trace.stored_co_pairs(var):
            ea, eb = trace.event(a), trace.event(b)
            if not (ea.is_write and eb.is_write):
                raise FormatError(f"co pair ({a}, {b}) on non-writes")
            if ea.variable != var or eb.variable != var:
                raise FormatError(f"co pair ({a}, {b}) off variable {var}")
            if a == b:
                raise FormatError(f"reflexive co pair on {a}")
    fresh_porf = trace._rebuild_closure(None)
    if fresh_porf != trace._porf_rows():
        raise FormatError("stale po+rf closure cache")
    for var in trace.variables:
        if trace._rebuild_closure(var) != trace._porfco_rows(var):
            raise FormatError(f"stale closure cache for {var}")


# ----- serialization --------------------------------------------------------


def trace_to_json(trace: Trace) -> dict:
    events = []
    for ev in trace.events():
        entry: dict = {
            "thread": "init" if ev.id.is_init else ev.id.thread,
            "index": ev.id.index,
            "kind": ev.kind,
            "var": ev.variable,
        }
        if ev.value is not None:
            entry["value"] = ev.value
        events.append(entry)
    rf = sorted([str(w), str(r)] for w, r in trace.rf_pairs())
    co = sorted(
        [str(a), str(b)] for var in trace.variables for a, b in trace.co_pairs(var)
    )
    return {"events": events, "rf": rf, "co": co}


def trace_from_json(obj: dict) -> Trace:
    if not isinstance(obj, dict) or "events" not in obj:
        raise FormatError("trace JSON must be an object with an 'events' array")
    events: list[Event] = []
    variables: list[str] = []
    for entry in obj["events"]:
        try:
            thread = entry["thread"]
            index = int(entry["index"])
            kind = entry["kind"]
            var = entry["var"]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed event entry {entry!r}") from exc
        if var not in variables:
            variables.append(var)
        value = entry.get("value")
        if value is not None:
            value = int(value)
        if thread == "init":
            eid = init_event_id(var)
        else:
            try:
                eid = EventId(int(thread), index)
            except (TypeError, ValueError) as exc:
                raise FormatError(f"bad thread {thread!r}") from exc
        events.append(Event(eid, kind, var, value))
    def _pairs(field: str) -> list[tuple[EventId, EventId]]:
        out = []
        for pair in obj.get(field, ()):
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise FormatError(f"malformed {field} pair {pair!r}")
            out.append((parse_event_id(pair[0]), parse_event_id(pair[1])))
        return out
    return build_trace(variables, events, _pairs("rf"), _pairs("co"))


def trace_to_dot(trace: Trace) -> str:
    lines = ["digraph trace {", "  rankdir=TB;"]
    for ev in trace.events():
        label = f"{ev.id}: {describe_event(ev.kind, ev.variable, ev.value)}"
        lines.append(f'  "{ev.id}" [label="{label}"];')
    for t in trace.thread_ids():
        evs = trace.thread_events(t)
        for a, b in zip(evs, evs[1:]):
            lines.append(f'  "{a}" -> "{b}" [style=solid, label="po"];')
    for w, r in sorted(trace.rf_pairs()):
        lines.append(f'  "{w}" -> "{r}" [style=dashed, label="rf"];')
    for var in trace.variables:
        for a, b in sorted(trace.co_pairs(var)):
            lines.append(f'  "{a}" -> "{b}" [style=dotted, label="co"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
