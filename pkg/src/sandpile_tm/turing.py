"""Single-tape Turing machines: definition, interpreter, file format and a test corpus."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .textio import ParseError

L, R = "L", "R"


class HaltedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TuringMachine:
    states: tuple[str, ...]
    start: str
    finals: frozenset[str]
    alphabet: tuple[str, ...]
    blank: str
    delta: dict[tuple[str, str], tuple[str, str, str]]
    name: str = "machine"

    def __post_init__(self):
        if self.start not in self.states:
            raise ValueError(f"start state {self.start!r} not in Q")
        if self.blank not in self.alphabet:
            raise ValueError(f"blank {self.blank!r} not in alphabet")
        if not self.finals <= set(self.states):
            raise ValueError("final states must be in Q")
        if len(set(self.states)) != len(self.states) or len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("duplicate state or letter")
        for q in self.states:
            if q in self.finals:
                continue
            for g in self.alphabet:
                if (q, g) not in self.delta:
                    raise ValueError(f"delta undefined on ({q}, {g})")
        for (q, g), (q2, g2, d) in self.delta.items():
            if q in self.finals:
                raise ValueError(f"delta defined on final state {q}")
            if q not in self.states or q2 not in self.states or g not in self.alphabet or g2 not in self.alphabet:
                raise ValueError(f"delta row ({q}, {g}) uses unknown symbols")
            if d not in (L, R):
                raise ValueError(f"direction must be L or R, got {d!r}")


@dataclass(frozen=True)
class TapeSnapshot:
    tape: dict[int, str]
    head: int
    state: str
    halted: bool
    time: int = 0

    def letter(self, x: int, blank: str) -> str:
        return self.tape.get(x, blank)

    def normalized(self, blank: str) -> "TapeSnapshot":
        return replace(self, tape={x: g for x, g in self.tape.items() if g != blank})

    def render(self, blank: str, lo: int, hi: int) -> str:
        cells = []
        for x in range(lo, hi + 1):
            g = self.letter(x, blank)
            cells.append(f"[{self.state}:{g}]" if x == self.head else g)
        return " ".join(cells)


def initial_snapshot(m: TuringMachine, tape: dict[int, str] | str | None = None) -> TapeSnapshot:
    """Head on square 0 in the start state.  A string tape is written from square 0."""
    if tape is None:
        tape = {}
    elif isinstance(tape, str):
        tape = dict(enumerate(tape))
    for g in tape.values():
        if g not in m.alphabet:
            raise ValueError(f"letter {g!r} not in alphabet")
    return TapeSnapshot(dict(tape), 0, m.start, m.start in m.finals).normalized(m.blank)


def tm_step(m: TuringMachine, s: TapeSnapshot) -> TapeSnapshot:
    if s.halted:
        raise HaltedError("machine has halted")
    g = s.letter(s.head, m.blank)
    q2, g2, d = m.delta[(s.state, g)]
    tape = dict(s.tape)
    if g2 == m.blank:
        tape.pop(s.head, None)
    else:
        tape[s.head] = g2
    head = s.head + (1 if d == R else -1)
    return TapeSnapshot(tape, head, q2, q2 in m.finals, s.time + 1)


def tm_run(m: TuringMachine, s: TapeSnapshot, steps: int) -> list[TapeSnapshot]:
    """Trace of at most ``steps`` steps; stops early at a halt."""
    trace = [s]
    for _ in range(steps):
        if trace[-1].halted:
            break
        trace.append(tm_step(m, trace[-1]))
    return trace


def halting_time(m: TuringMachine, s: TapeSnapshot, budget: int) -> int | None:
    for t, snap in enumerate(tm_run(m, s, budget)):
        if snap.halted:
            return t
    return None


# ---------------------------------------------------------------- file format
#
#   name busy-beaver-3
#   states A B C H
#   alphabet 0 1
#   blank 0
#   start A
#   final H
#   tape 0            (optional: initial tape written from square 0)
#   A 0 -> B 1 R
#
# '#' starts a comment.

_HEADER = ("states", "alphabet", "blank", "start", "final")


def parse_machine(text: str, source: str = "<machine>") -> tuple[TuringMachine, str]:
    fields: dict[str, list[str]] = {}
    rows: list[tuple[int, list[str]]] = []
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if "->" in toks:
            rows.append((i, toks))
        elif toks[0] in _HEADER + ("name", "tape"):
            if toks[0] in fields:
                raise ParseError(f"duplicate {toks[0]!r} line", i, 1, source)
            fields[toks[0]] = toks[1:]
        else:
            raise ParseError(f"unknown directive {toks[0]!r}", i, 1, source)
    for key in _HEADER[:4]:
        if key not in fields:
            raise ParseError(f"missing {key!r} line", 1, 1, source)
    for key in ("blank", "start"):
        if len(fields[key]) != 1:
            raise ParseError(f"{key!r} takes exactly one symbol", 1, 1, source)
    delta = {}
    for i, toks in rows:
        if len(toks) != 6 or toks[2] != "->":
            raise ParseError("expected 'q g -> q2 g2 L|R'", i, 1, source)
        q, g, _, q2, g2, d = toks
        if (q, g) in delta:
            raise ParseError(f"duplicate rule for ({q}, {g})", i, 1, source)
        delta[(q, g)] = (q2, g2, d)
    try:
        m = TuringMachine(tuple(fields["states"]), fields["start"][0], frozenset(fields.get("final", [])),
                          tuple(fields["alphabet"]), fields["blank"][0], delta,
                          " ".join(fields.get("name", ["machine"])))
    except ValueError as e:
        raise ParseError(str(e), rows[0][0] if rows else 1, 1, source) from None
    tape = "".join(fields.get("tape", []))
    return m, tape


def emit_machine(m: TuringMachine, tape: str = "") -> str:
    out = [f"name {m.name}", "states " + " ".join(m.states), "alphabet " + " ".join(m.alphabet),
           f"blank {m.blank}", f"start {m.start}", "final " + " ".join(q for q in m.states if q in m.finals)]
    if tape:
        out.append("tape " + " ".join(tape))
    for q in m.states:
        for g in m.alphabet:
            if (q, g) in m.delta:
                q2, g2, d = m.delta[(q, g)]
                out.append(f"{q} {g} -> {q2} {g2} {d}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- corpus


@dataclass
class CorpusEntry:
    machine: TuringMachine
    tape: str = ""
    halts_at: int | None = None
    notes: str = field(default="")


def _m(name, states, start, finals, alphabet, blank, rows) -> TuringMachine:
    delta = {}
    for row in rows:
        q, g, q2, g2, d = row.split()
        delta[(q, g)] = (q2, g2, d)
    return TuringMachine(tuple(states), start, frozenset(finals), tuple(alphabet), blank, delta, name)


def corpus() -> dict[str, CorpusEntry]:
    return {
        "right-mover": CorpusEntry(
            _m("right-mover", ["r"], "r", [], ["0"], "0", ["r 0 r 0 R"]),
            notes="never halts; head walks right over blank tape"),
        "halter": CorpusEntry(
            _m("halter", ["q", "f"], "q", ["f"], ["0", "1"], "0", ["q 0 f 1 R", "q 1 f 1 R"]),
            halts_at=1, notes="writes a 1 and halts after one step"),
        "incrementer": CorpusEntry(
            _m("incrementer", ["s", "h"], "s", ["h"], ["0", "1"], "0", ["s 1 s 1 R", "s 0 h 1 R"]),
            tape="111", halts_at=4, notes="unary n -> n+1"),
        "busy-beaver-3": CorpusEntry(
            _m("busy-beaver-3", ["A", "B", "C", "H"], "A", ["H"], ["0", "1"], "0", [
                "A 0 B 1 R", "A 1 H 1 R",
                "B 0 B 1 L", "B 1 C 0 R",
                "C 0 C 1 L", "C 1 A 1 L"]),
            halts_at=21, notes="3-state 2-symbol maximum-shift machine"),
    }


def load_machine(path: str | Path) -> tuple[TuringMachine, str]:
    p = Path(path)
    return parse_machine(p.read_text(), str(p))
