"""Snapshot export shared by every module: CSV site lists and z-slice grids."""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

Site = tuple[int, int, int]

_DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int = 1, source: str = "<text>"):
        super().__init__(f"{source}:{line}:{col}: {msg}")
        self.line = line
        self.col = col


def cell_char(v: int) -> str:
    if v == 0:
        return "."
    if v < 0:
        return "-"
    return _DIGITS[v] if v < len(_DIGITS) else "+"


def slice_grid(chips: Callable[[Site], int] | Mapping[Site, int], z: int,
               xs: range, ys: range) -> str:
    """Text grid of one z-slice; top row is the largest y, as in the figures."""
    get = chips.get if isinstance(chips, Mapping) else None
    lines = []
    for y in reversed(ys):
        row = []
        for x in xs:
            v = get((x, y, z), 0) if get is not None else chips((x, y, z))
            row.append(cell_char(int(v)))
        lines.append("".join(row))
    return "\n".join(lines) + "\n"


def write_csv(items: Iterable[tuple[Site, int]], header: str = "x,y,z,chips") -> str:
    out = [header]
    for (x, y, z), v in sorted(items):
        out.append(f"{x},{y},{z},{v}")
    return "\n".join(out) + "\n"


def read_csv(text: str, source: str = "<csv>") -> dict[Site, int]:
    sites: dict[Site, int] = {}
    lines = text.splitlines()
    for ln, line in enumerate(lines, 1):
        s = line.strip()
        if not s or s.startswith("#") or (ln == 1 and s.startswith("x,")):
            continue
        parts = s.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", ln, 1, source)
        try:
            x, y, z, v = (int(p) for p in parts)
        except ValueError:
            raise ParseError("non-integer field", ln, 1, source) from None
        if (x, y, z) in sites:
            raise ParseError(f"duplicate site {(x, y, z)}", ln, 1, source)
        sites[(x, y, z)] = v
    return sites
