"""Input language: parsing, pretty-printing, unrolling, interpretation.

Line-based surface syntax, one statement per line, `#` starts a comment:

    vars x y
    thread t1
    w x 1            # write shared variable
    r y a            # read shared variable into register a
    l a = a + 2      # local assignment
    l if a == 2 goto done
    halt
    label done
    end
    final exists a@t1 == 2

Expressions mention registers and integer literals only; shared variables are
accessed solely through `w` and `r`.  Arithmetic wraps to signed 64-bit.
Registers default to 0.  Labels are positional metadata resolved at parse
time; goto targets are stored as statement indices.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Union

from .errors import DivergenceError, DomainError, FormatError, TraceLookupError

_I64_MASK = (1 << 64) - 1
_I64_MIN = -(1 << 63)
_I64_MAX = (1 << 63) - 1

_SILENT_BUDGET = 10_000

_IDENT_RE = re.compile(r"[A-Za-z_]\w*\Z")

COMPARISONS = ("==", "!=", "<=", ">=", "<", ">")


def _wrap(value: int) -> int:
    return ((value - _I64_MIN) & _I64_MASK) + _I64_MIN


def _compare(op: str, a: int, b: int) -> bool:
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise DomainError(f"unknown comparison {op!r}")


# ----- expressions ----------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Reg:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - *
    left: "Expr"
    right: "Expr"


Expr = Union[Lit, Reg, Neg, BinOp]


def eval_expr(expr: Expr, registers: dict[str, int]) -> int:
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Reg):
        return registers.get(expr.name, 0)
    if isinstance(expr, Neg):
        return _wrap(-eval_expr(expr.operand, registers))
    a = eval_expr(expr.left, registers)
    b = eval_expr(expr.right, registers)
    if expr.op == "+":
        return _wrap(a + b)
    if expr.op == "-":
        return _wrap(a - b)
    if expr.op == "*":
        return _wrap(a * b)
    raise DomainError(f"unknown operator {expr.op!r}")


_PRECEDENCE = {"+": 1, "-": 1, "*": 2}


def render_expr(expr: Expr, parent_prec: int = 0) -> str:
    if isinstance(expr, Lit):
        return str(expr.value)
    if isinstance(expr, Reg):
        return expr.name
    if isinstance(expr, Neg):
        inner = render_expr(expr.operand, 3)
        return f"-{inner}"
    prec = _PRECEDENCE[expr.op]
    text = (
        f"{render_expr(expr.left, prec)} {expr.op} {render_expr(expr.right, prec + 1)}"
    )
    return f"({text})" if prec < parent_prec else text


# ----- statements and programs ----------------------------------------------


@dataclass(frozen=True)
class Write:
    variable: str
    expr: Expr


@dataclass(frozen=True)
class Read:
    variable: str
    register: str


@dataclass(frozen=True)
class Assign:
    register: str
    expr: Expr


@dataclass(frozen=True)
class CondGoto:
    left: Expr
    op: str
    right: Expr
    target: int


@dataclass(frozen=True)
class Goto:
    target: int


@dataclass(frozen=True)
class Halt:
    pass


Statement = Union[Write, Read, Assign, CondGoto, Goto, Halt]


class FinalAtom(NamedTuple):
    register: str
    thread: str  # thread name
    op: str
    value: int


@dataclass(frozen=True)
class FinalCondition:
    """Disjunction (clauses) of conjunctions (atoms) over terminal registers."""

    mode: str  # "exists" or "forall"
    clauses: tuple[tuple[FinalAtom, ...], ...]


@dataclass(frozen=True)
class Program:
    variables: tuple[str, ...]
    thread_names: tuple[str, ...]
    threads: tuple[tuple[Statement, ...], ...]
    final: Optional[FinalCondition] = None

    @property
    def thread_count(self) -> int:
        return len(self.threads)

    def thread_index(self, name: str) -> int:
        """1-based index of a thread name."""
        try:
            return self.thread_names.index(name) + 1
        except ValueError:
            raise TraceLookupError(f"unknown thread {name!r}") from None

    def global_statement_budget(self) -> int:
        """Upper bound on executed global statements (each statement of an
        acyclic thread runs at most once)."""
        return sum(
            1
            for body in self.threads
            for s in body
            if isinstance(s, (Write, Read))
        )


class ThreadState(NamedTuple):
    pc: int
    registers: tuple[tuple[str, int], ...]  # sorted by name


class Configuration(NamedTuple):
    threads: tuple[ThreadState, ...]


class PendingGlobal(NamedTuple):
    """The next global statement of one thread, after folding local steps.
    value is filled for writes; register names the destination for reads.
    registers/next_pc describe the thread state to commit alongside it."""

    kind: str  # "W" or "R"
    variable: str
    value: Optional[int]
    register: Optional[str]
    next_pc: int
    registers: tuple[tuple[str, int], ...]


def initial_configuration(program: Program) -> Configuration:
    return Configuration(tuple(ThreadState(0, ()) for _ in program.threads))


# ----- tokenizer and parser --------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>==|!=|<=|>=|&&|\|\||[-+*()<>@=]))"
)


def _tokenize(text: str, lineno: int) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip():
                raise FormatError(
                    f"line {lineno}: unexpected character {text[pos:].strip()[0]!r}"
                )
            break
        if m.group("int") is not None:
            tokens.append(("int", m.group("int")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name")))
        else:
            tokens.append(("op", m.group("op")))
        pos = m.end()
    return tokens


class _TokenStream:
    def __init__(self, tokens: list[tuple[str, str]], lineno: int):
        self.tokens = tokens
        self.pos = 0
        self.lineno = lineno

    def peek(self) -> Optional[tuple[str, str]]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise FormatError(f"line {self.lineno}: unexpected end of line")
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        tok = self.next()
        if tok != ("op", op):
            raise FormatError(f"line {self.lineno}: expected {op!r}, got {tok[1]!r}")

    def done(self) -> bool:
        return self.pos >= len(self.tokens)


def _parse_expr(stream: _TokenStream, variables: tuple[str, ...]) -> Expr:
    def factor() -> Expr:
        kind, text = stream.next()
        if kind == "int":
            value = int(text)
            if value > _I64_MAX:
                raise FormatError(
                    f"line {stream.lineno}: literal {text} exceeds 64-bit range"
                )
            return Lit(value)
        if kind == "name":
            if text in variables:
                raise FormatError(
                    f"line {stream.lineno}: shared variable {text!r} in expression"
                )
            return Reg(text)
        if text == "-":
            return Neg(factor())
        if text == "(":
            e = expr()
            stream.expect_op(")")
            return e
        raise FormatError(f"line {stream.lineno}: unexpected token {text!r}")

    def term() -> Expr:
        e = factor()
        while stream.peek() == ("op", "*"):
            stream.next()
            e = BinOp("*", e, factor())
        return e

    def expr() -> Expr:
        e = term()
        while stream.peek() in (("op", "+"), ("op", "-")):
            _, op = stream.next()
            e = BinOp(op, e, term())
        return e

    return expr()


def _parse_comparison_op(stream: _TokenStream) -> str:
    kind, text = stream.next()
    if kind != "op" or text not in COMPARISONS:
        raise FormatError(f"line {stream.lineno}: expected comparison, got {text!r}")
    return text


class _PendingJump(NamedTuple):
    label: str
    lineno: int
    cond: Optional[tuple[Expr, str, Expr]]  # None for plain goto


def _require_ident(name: str, what: str, lineno: int) -> str:
    if not _IDENT_RE.match(name):
        raise FormatError(f"line {lineno}: invalid {what} name {name!r}")
    return name


def _parse_final(
    text: str, lineno: int, thread_names: tuple[str, ...]
) -> FinalCondition:
    stream = _TokenStream(_tokenize(text, lineno), lineno)
    kind, mode = stream.next()
    if kind != "name" or mode not in ("exists", "forall"):
        raise FormatError(f"line {lineno}: expected exists or forall, got {mode!r}")
    clauses: list[tuple[FinalAtom, ...]] = []
    atoms: list[FinalAtom] = []
    while True:
        kind, reg = stream.next()
        if kind != "name":
            raise FormatError(f"line {lineno}: expected register, got {reg!r}")
        stream.expect_op("@")
        kind, thread = stream.next()
        if thread not in thread_names:
            raise FormatError(f"line {lineno}: unknown thread {thread!r}")
        op = _parse_comparison_op(stream)
        sign = 1
        kind, num = stream.next()
        if (kind, num) == ("op", "-"):
            sign = -1
            kind, num = stream.next()
        if kind != "int":
            raise FormatError(f"line {lineno}: expected integer, got {num!r}")
        atoms.append(FinalAtom(reg, thread, op, sign * int(num)))
        if stream.done():
            break
        kind, sep = stream.next()
        if sep == "&&":
            continue
        if sep == "||":
            clauses.append(tuple(atoms))
            atoms = []
            continue
        raise FormatError(f"line {lineno}: expected && or ||, got {sep!r}")
    clauses.append(tuple(atoms))
    return FinalCondition(mode, tuple(clauses))


def parse_program(text: str) -> Program:
    variables: Optional[tuple[str, ...]] = None
    thread_names: list[str] = []
    threads: list[tuple[Statement, ...]] = []
    final_line: Optional[tuple[str, int]] = None

    current: Optional[str] = None  # open thread name
    stmts: list[Union[Statement, _PendingJump]] = []
    labels: dict[str, int] = {}
    last_line = 0

    def close_thread() -> None:
        body: list[Statement] = []
        for item in stmts:
            if not isinstance(item, _PendingJump):
                body.append(item)
                continue
            if item.label not in labels:
                raise FormatError(
                    f"line {item.lineno}: unknown label {item.label!r}"
                )
            target = labels[item.label]
            if item.cond is None:
                body.append(Goto(target))
            else:
                left, op, right = item.cond
                body.append(CondGoto(left, op, right, target))
        threads.append(tuple(body))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        last_line = lineno
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()

        if head == "vars":
            if variables is not None:
                raise FormatError(f"line {lineno}: duplicate vars declaration")
            if current is not None:
                raise FormatError(f"line {lineno}: vars inside thread block")
            names = rest.split()
            if not names:
                raise FormatError(f"line {lineno}: vars needs at least one name")
            for v in names:
                _require_ident(v, "variable", lineno)
            if len(set(names)) != len(names):
                raise FormatError(f"line {lineno}: duplicate variable name")
            variables = tuple(names)
            continue

        if variables is None:
            raise FormatError(f"line {lineno}: vars declaration must come first")

        if head == "thread":
            if current is not None:
                raise FormatError(f"line {lineno}: thread {current!r} not closed")
            name = _require_ident(rest, "thread", lineno)
            if name in thread_names:
                raise FormatError(f"line {lineno}: duplicate thread {name!r}")
            thread_names.append(name)
            current = name
            stmts = []
            labels = {}
            continue

        if head == "end":
            if current is None:
                raise FormatError(f"line {lineno}: end outside thread block")
            if rest:
                raise FormatError(f"line {lineno}: trailing text after end")
            close_thread()
            current = None
            continue

        if head == "final":
            if current is not None:
                raise FormatError(f"line {lineno}: final inside thread block")
            if final_line is not None:
                raise FormatError(f"line {lineno}: duplicate final condition")
            final_line = (rest, lineno)
            continue

        if current is None:
            raise FormatError(f"line {lineno}: statement outside thread block")

        if head == "label":
            name = _require_ident(rest, "label", lineno)
            if name in labels:
                raise FormatError(f"line {lineno}: duplicate label {name!r}")
            labels[name] = len(stmts)
            continue

        if head == "halt":
            if rest:
                raise FormatError(f"line {lineno}: trailing text after halt")
            stmts.append(Halt())
            continue

        if head == "w":
            var, _, expr_text = rest.partition(" ")
            if var not in variables:
                raise FormatError(f"line {lineno}: unknown variable {var!r}")
            stream = _TokenStream(_tokenize(expr_text, lineno), lineno)
            expr = _parse_expr(stream, variables)
            if not stream.done():
                raise FormatError(f"line {lineno}: trailing tokens after expression")
            stmts.append(Write(var, expr))
            continue

        if head == "r":
            parts = rest.split()
            if len(parts) != 2:
                raise FormatError(f"line {lineno}: expected 'r <var> <register>'")
            var, reg = parts
            if var not in variables:
                raise FormatError(f"line {lineno}: unknown variable {var!r}")
            _require_ident(reg, "register", lineno)
            if reg in variables:
                raise FormatError(
                    f"line {lineno}: register {reg!r} collides with a shared variable"
                )
            stmts.append(Read(var, reg))
            continue

        if head == "l":
            stream = _TokenStream(_tokenize(rest, lineno), lineno)
            kind, first = stream.next()
            if (kind, first) == ("name", "goto"):
                kind, label = stream.next()
                if kind != "name" or not stream.done():
                    raise FormatError(f"line {lineno}: expected 'l goto <label>'")
                stmts.append(_PendingJump(label, lineno, None))
                continue
            if (kind, first) == ("name", "if"):
                left = _parse_expr(stream, variables)
                op = _parse_comparison_op(stream)
                right = _parse_expr(stream, variables)
                kind, kw = stream.next()
                if (kind, kw) != ("name", "goto"):
                    raise FormatError(f"line {lineno}: expected goto, got {kw!r}")
                kind, label = stream.next()
                if kind != "name" or not stream.done():
                    raise FormatError(f"line {lineno}: expected label after goto")
                stmts.append(_PendingJump(label, lineno, (left, op, right)))
                continue
            if kind == "name":
                if first in variables:
                    raise FormatError(
                        f"line {lineno}: register {first!r} collides with a "
                        "shared variable"
                    )
                stream.expect_op("=")
                expr = _parse_expr(stream, variables)
                if not stream.done():
                    raise FormatError(
                        f"line {lineno}: trailing tokens after expression"
                    )
                stmts.append(Assign(first, expr))
                continue
            raise FormatError(f"line {lineno}: malformed local statement")

        raise FormatError(f"line {lineno}: unknown statement {head!r}")

    if current is not None:
        raise FormatError(f"line {last_line}: thread {current!r} not closed")
    if variables is None:
        raise FormatError("line 1: missing vars declaration")

    final = None
    if final_line is not None:
        final = _parse_final(final_line[0], final_line[1], tuple(thread_names))
    return Program(variables, tuple(thread_names), tuple(threads), final)


# ----- pretty printer ---------------------------------------------------------


def _render_statement(stmt: Statement, label_of: dict[int, str]) -> str:
    if isinstance(stmt, Write):
        return f"w {stmt.variable} {render_expr(stmt.expr)}"
    if isinstance(stmt, Read):
        return f"r {stmt.variable} {stmt.register}"
    if isinstance(stmt, Assign):
        return f"l {stmt.register} = {render_expr(stmt.expr)}"
    if isinstance(stmt, Goto):
        return f"l goto {label_of[stmt.target]}"
    if isinstance(stmt, CondGoto):
        return (
            f"l if {render_expr(stmt.left)} {stmt.op} {render_expr(stmt.right)} "
            f"goto {label_of[stmt.target]}"
        )
    if isinstance(stmt, Halt):
        return "halt"
    raise DomainError(f"unknown statement {stmt!r}")


def pretty_print(program: Program) -> str:
    lines = ["vars " + " ".join(program.variables)]
    for name, body in zip(program.thread_names, program.threads):
        lines.append(f"thread {name}")
        targets = sorted(
            {s.target for s in body if isinstance(s, (Goto, CondGoto))}
        )
        label_of = {t: f"L{t}" for t in targets}
        for idx, stmt in enumerate(body):
            if idx in label_of:
                lines.append(f"label {label_of[idx]}")
            lines.append(_render_statement(stmt, label_of))
        if len(body) in label_of:
            lines.append(f"label {label_of[len(body)]}")
        lines.append("end")
    if program.final is not None:
        rendered = " || ".join(
            " && ".join(f"{a.register}@{a.thread} {a.op} {a.value}" for a in clause)
            for clause in program.final.clauses
        )
        lines.append(f"final {program.final.mode} {rendered}")
    return "\n".join(lines) + "\n"


# ----- unrolling --------------------------------------------------------------


def _falls_through(stmt: Statement) -> bool:
    return not isinstance(stmt, (Goto, Halt))


def unroll(program: Program, bound: int) -> Program:
    """Bound every per-thread loop: each backward jump advances into a fresh
    copy of the thread body, and the last copy's back edges lead to a trailing
    halt.  Loop-free threads are kept as-is."""
    if bound < 1:
        raise DomainError(f"unroll bound must be >= 1, got {bound}")
    new_threads = []
    changed = False
    for body in program.threads:
        has_back_edge = any(
            isinstance(s, (Goto, CondGoto)) and s.target <= i
            for i, s in enumerate(body)
        )
        if not has_back_edge:
            new_threads.append(body)
            continue
        changed = True
        size = len(body)
        # a body whose last statement can fall through needs one explicit
        # exit jump per copy, otherwise control would leak into the next copy
        exit_slot = _falls_through(body[-1])
        copy_size = size + (1 if exit_slot else 0)
        halt_index = bound * copy_size
        out: list[Statement] = []
        for k in range(bound):
            base = k * copy_size
            last_copy = k == bound - 1
            for idx, stmt in enumerate(body):
                if isinstance(stmt, (Goto, CondGoto)):
                    t = stmt.target
                    if t > idx:  # forward
                        new_target = halt_index if t >= size else base + t
                    elif last_copy:
                        if isinstance(stmt, Goto):
                            out.append(Halt())
                            continue
                        new_target = halt_index
                    else:
                        new_target = (k + 1) * copy_size + t
                    out.append(replace(stmt, target=new_target))
                else:
                    out.append(stmt)
            if exit_slot:
                out.append(Goto(halt_index))
        out.append(Halt())
        new_threads.append(tuple(out))
    if not changed:
        return program
    return replace(program, threads=tuple(new_threads))


# ----- interpretation ---------------------------------------------------------


def next_global(
    config: Configuration, program: Program, thread: int
) -> Optional[PendingGlobal]:
    """Fold the thread's local statements forward and report its pending
    global statement, or None when the thread is finished.  Pure: the
    configuration is not modified; repeated calls agree."""
    if not 1 <= thread <= len(program.threads):
        raise TraceLookupError(f"unknown thread index {thread}")
    body = program.threads[thread - 1]
    state = config.threads[thread - 1]
    pc = state.pc
    registers = dict(state.registers)
    for _ in range(_SILENT_BUDGET):
        if pc >= len(body):
            return None
        stmt = body[pc]
        if isinstance(stmt, Halt):
            return None
        if isinstance(stmt, Write):
            value = eval_expr(stmt.expr, registers)
            return PendingGlobal(
                "W", stmt.variable, value, None, pc + 1, _freeze(registers)
            )
        if isinstance(stmt, Read):
            return PendingGlobal(
                "R", stmt.variable, None, stmt.register, pc + 1, _freeze(registers)
            )
        if isinstance(stmt, Assign):
            registers[stmt.register] = eval_expr(stmt.expr, registers)
            pc += 1
        elif isinstance(stmt, Goto):
            pc = stmt.target
        elif isinstance(stmt, CondGoto):
            if _compare(
                stmt.op,
                eval_expr(stmt.left, registers),
                eval_expr(stmt.right, registers),
            ):
                pc = stmt.target
            else:
                pc += 1
        else:
            raise DomainError(f"unknown statement {stmt!r}")
    raise DivergenceError(
        f"thread {thread} ran {_SILENT_BUDGET} local steps without reaching a "
        "global statement; unroll the program first"
    )


def _freeze(registers: dict[str, int]) -> tuple[tuple[str, int], ...]:
    return tuple(sorted(registers.items()))


def commit_pending(
    config: Configuration,
    thread: int,
    pending: PendingGlobal,
    read_value: Optional[int] = None,
) -> Configuration:
    """Advance one thread past its pending global statement.  For reads the
    delivered value lands in the destination register."""
    registers = pending.registers
    if pending.kind == "R":
        if read_value is None:
            raise DomainError("read commit requires a value")
        regs = dict(registers)
        regs[pending.register] = _wrap(read_value)
        registers = _freeze(regs)
    state = ThreadState(pending.next_pc, registers)
    threads = list(config.threads)
    threads[thread - 1] = state
    return Configuration(tuple(threads))


def is_terminal(config: Configuration, program: Program) -> bool:
    return all(
        next_global(config, program, t) is None
        for t in range(1, len(program.threads) + 1)
    )


def eval_final_condition(config: Configuration, program: Program) -> bool:
    """Evaluate the final condition on one terminal configuration.  The
    exists/forall aggregation across terminal states happens at the caller."""
    cond = program.final
    if cond is None:
        raise DomainError("program has no final condition")
    for clause in cond.clauses:
        ok = True
        for atom in clause:
            registers = dict(
                config.threads[program.thread_index(atom.thread) - 1].registers
            )
            if not _compare(atom.op, registers.get(atom.register, 0), atom.value):
                ok = False
                break
        if ok:
            return True
    return False
