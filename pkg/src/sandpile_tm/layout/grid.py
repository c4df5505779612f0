"""Cube coordinates: the cube c(x, t) holds square x of the automaton at time t."""

from __future__ import annotations

from dataclasses import dataclass, replace

Site = tuple[int, int, int]


@dataclass(frozen=True)
class CubeGrid:
    """Window x in [x_lo, x_hi], t in [0, t_hi] of cubes with side ``n``.

    Cube c(x, t) is the box [nx, n(x+1)-1] x [0, n-1] x [nt, n(t+1)-1];
    the sandpile's third axis is time.  ``n`` may be 0 until the router has
    sized the cubes.
    """
    x_lo: int
    x_hi: int
    t_hi: int
    n: int = 0

    def __post_init__(self):
        if self.x_lo > self.x_hi or self.t_hi < 0:
            raise ValueError("empty window")
        if self.n < 0:
            raise ValueError("cube side must be non-negative")

    @classmethod
    def symmetric(cls, X: int, T: int, n: int = 0) -> "CubeGrid":
        return cls(-X, X, T, n)

    def sized(self, n: int) -> "CubeGrid":
        return replace(self, n=n)

    @property
    def width(self) -> int:
        return self.x_hi - self.x_lo + 1

    def cubes(self):
        for t in range(self.t_hi + 1):
            for x in range(self.x_lo, self.x_hi + 1):
                yield x, t

    def __contains__(self, cube) -> bool:
        x, t = cube
        return self.x_lo <= x <= self.x_hi and 0 <= t <= self.t_hi

    def origin(self, x: int, t: int) -> Site:
        """Lowest corner of cube c(x, t)."""
        if self.n <= 0:
            raise ValueError("cube side not set")
        return (self.n * x, 0, self.n * t)

    def region(self, x: int, t: int) -> tuple[Site, Site]:
        ox, oy, oz = self.origin(x, t)
        m = self.n - 1
        return (ox, oy, oz), (ox + m, oy + m, oz + m)

    def cube_of(self, site: Site) -> tuple[int, int]:
        return site[0] // self.n, site[2] // self.n

    def box(self, margin_x: int = 0) -> tuple[Site, Site]:
        """Sandpile sites covered by the window, widened by ``margin_x`` cubes each side."""
        lo, _ = self.region(self.x_lo - margin_x, 0)
        _, hi = self.region(self.x_hi + margin_x, self.t_hi)
        return lo, hi
