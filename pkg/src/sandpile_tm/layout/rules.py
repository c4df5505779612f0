"""A common view of CA tables and lazy rule sets: bit-coded states plus (pattern, result) rules."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from ..ca import CARow, CellularAutomaton, bits_for, state_name
from ..lazy import LAZY, WILD, LazyAutomaton, LazyRow

# decoded cube values besides real state indices
BAD = -3          # both wires of a cell toppled, some bit lazy, or a code outside S


@dataclass
class RuleTable:
    names: list[str]
    radius: int
    rules: list[tuple[tuple[int, ...], int]]      # WILD allowed in patterns
    background: int | None                        # state outside the window; None means lazy

    @property
    def n_states(self) -> int:
        return len(self.names)

    @property
    def bits(self) -> int:
        return bits_for(self.n_states)

    def code(self, s: int) -> tuple[int, ...]:
        """Bit string of state ``s``, most significant bit first."""
        b = self.bits
        return tuple((s >> (b - 1 - m)) & 1 for m in range(b))

    def decode_bits(self, bits: list[int | None]) -> int:
        if all(v is None for v in bits):
            return LAZY
        if any(v is None for v in bits):
            return BAD
        k = 0
        for v in bits:
            k = 2 * k + v
        return k if k < self.n_states else BAD

    @classmethod
    def from_ca(cls, ca: CellularAutomaton) -> "RuleTable":
        S = range(len(ca.states))
        rules = [((a, b, c), int(ca.table[a, b, c])) for a, b, c in product(S, S, S)]
        return cls([state_name(s) for s in ca.states], ca.radius, rules, ca.blank)

    @classmethod
    def from_lazy(cls, a: LazyAutomaton) -> "RuleTable":
        rules = [(r.pattern, r.result) for r in a.rules]
        return cls([state_name(s) for s in a.states], a.radius, rules, None)


def row_values(table: RuleTable, row: CARow | LazyRow, lo: int, hi: int) -> list[int]:
    """States of a CA or lazy row on [lo, hi], filling outside with the background."""
    fill = table.background if table.background is not None else LAZY
    out = []
    for x in range(lo, hi + 1):
        i = x - row.lo
        out.append(int(row.cells[i]) if 0 <= i < len(row.cells) else fill)
    return out


__all__ = ["BAD", "LAZY", "WILD", "RuleTable", "row_values"]
