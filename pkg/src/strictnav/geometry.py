"""Axis-aligned rectangles and the segment tests shared by the maze simulator
and the landmark graph.

All geometry is 2D. Points are plain ``(x, y)`` tuples so that the hot loops
(collision sweeps, edge pruning) stay allocation-light.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Point = tuple[float, float]


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"degenerate rectangle {self!r}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def contains(self, p: Point) -> bool:
        """Point inside the closed rectangle (boundary counts)."""
        return self.x0 <= p[0] <= self.x1 and self.y0 <= p[1] <= self.y1

    def contains_strict(self, p: Point) -> bool:
        """Point strictly inside the open interior (boundary excluded)."""
        return self.x0 < p[0] < self.x1 and self.y0 < p[1] < self.y1


def dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def point_in_any(p: Point, rects: tuple[Rect, ...] | list[Rect], strict: bool = True) -> bool:
    """True if p lies inside any rectangle (interior-only when strict)."""
    if strict:
        return any(r.contains_strict(p) for r in rects)
    return any(r.contains(p) for r in rects)


def segment_crosses_rect(a: Point, b: Point, rect: Rect) -> bool:
    """True iff the open segment a-b passes through the rectangle's interior.

    Sliding exactly along a face does not count as crossing; neither does
    touching a corner. Uses the slab method: clip the segment parameter to
    each axis interval, then confirm the surviving midpoint is strictly
    interior (which rejects boundary-only contact).
    """
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    t0, t1 = 0.0, 1.0
    for p0, d, lo, hi in ((a[0], dx, rect.x0, rect.x1), (a[1], dy, rect.y0, rect.y1)):
        if d == 0.0:
            if p0 < lo or p0 > hi:
                return False
            continue
        ta = (lo - p0) / d
        tb = (hi - p0) / d
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return False
    tm = 0.5 * (t0 + t1)
    mid = (a[0] + tm * dx, a[1] + tm * dy)
    return rect.contains_strict(mid)


def segment_crosses_any(a: Point, b: Point, rects: tuple[Rect, ...] | list[Rect]) -> bool:
    return any(segment_crosses_rect(a, b, r) for r in rects)
