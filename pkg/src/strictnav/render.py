"""Deterministic SVG rendering of mazes, landmark graphs, planned paths,
trajectories, and visitation heatmaps.

All emitters are pure string builders with fixed float formatting, so the
same inputs produce byte-identical documents.
"""

from __future__ import annotations

from .geometry import Rect
from .mazes import EnvConfig

SCALE = 20.0  # pixels per goal-space unit
MARGIN = 10.0


def _fmt(x: float) -> str:
    return f"{x:.3f}"


class SvgCanvas:
    """Collects SVG elements in goal-space coordinates (y flipped)."""

    def __init__(self, bounds: Rect):
        self.bounds = bounds
        self.parts: list[str] = []
        self.w = bounds.width * SCALE + 2 * MARGIN
        self.h = bounds.height * SCALE + 2 * MARGIN

    def x(self, v: float) -> float:
        return MARGIN + (v - self.bounds.x0) * SCALE

    def y(self, v: float) -> float:
        return MARGIN + (self.bounds.y1 - v) * SCALE

    def rect(self, r: Rect, fill: str, opacity: float = 1.0, stroke: str = "none") -> None:
        self.parts.append(
            f'<rect x="{_fmt(self.x(r.x0))}" y="{_fmt(self.y(r.y1))}" '
            f'width="{_fmt(r.width * SCALE)}" height="{_fmt(r.height * SCALE)}" '
            f'fill="{fill}" fill-opacity="{_fmt(opacity)}" stroke="{stroke}"/>'
        )

    def line(self, a, b, color: str, width: float = 1.0, opacity: float = 1.0) -> None:
        self.parts.append(
            f'<line x1="{_fmt(self.x(a[0]))}" y1="{_fmt(self.y(a[1]))}" '
            f'x2="{_fmt(self.x(b[0]))}" y2="{_fmt(self.y(b[1]))}" '
            f'stroke="{color}" stroke-width="{_fmt(width)}" stroke-opacity="{_fmt(opacity)}"/>'
        )

    def circle(self, c, radius: float, fill: str, opacity: float = 1.0) -> None:
        self.parts.append(
            f'<circle cx="{_fmt(self.x(c[0]))}" cy="{_fmt(self.y(c[1]))}" '
            f'r="{_fmt(radius)}" fill="{fill}" fill-opacity="{_fmt(opacity)}"/>'
        )

    def polyline(self, points, color: str, width: float = 1.5, opacity: float = 1.0) -> None:
        if not points:
            return
        coords = " ".join(f"{_fmt(self.x(p[0]))},{_fmt(self.y(p[1]))}" for p in points)
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="{_fmt(width)}" stroke-opacity="{_fmt(opacity)}"/>'
        )

    def document(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(self.w)}" '
            f'height="{_fmt(self.h)}" viewBox="0 0 {_fmt(self.w)} {_fmt(self.h)}">'
        )
        return "\n".join([head, *self.parts, "</svg>"]) + "\n"


def _cost_color(value: float, lo: float, hi: float) -> str:
    """Green (cheap) to red (expensive) ramp."""
    if hi <= lo:
        t = 0.0
    else:
        t = min(1.0, max(0.0, (value - lo) / (hi - lo)))
    r = int(40 + 215 * t)
    g = int(200 - 160 * t)
    return f"rgb({r},{g},60)"


def _base_canvas(env: EnvConfig) -> SvgCanvas:
    c = SvgCanvas(env.bounds)
    c.rect(env.bounds, fill="#f8f8f5", stroke="#444444")
    for zone, _p in env.slip_zones:
        c.rect(zone, fill="#e8a33d", opacity=0.45)
    for w in env.walls:
        c.rect(w, fill="#555555")
    for i, p in enumerate(env.task.points):
        last = i == len(env.task.points) - 1
        c.circle(p, 6.0, "#2a9d2a" if last else "#caa002")
        c.circle(p, 2.4, "#ffffff")
    c.circle(env.start, 5.0, "#3366cc")
    return c


def render_maze(env: EnvConfig) -> str:
    """Walls, slip zones, start, and task points."""
    return _base_canvas(env).document()


def render_graph(env: EnvConfig, node_rows: list[tuple], edge_rows: list[tuple]) -> str:
    """Graph edges colored by refined cost, nodes as dots."""
    c = _base_canvas(env)
    nodes = {int(i): (x, y) for i, x, y in node_rows}
    if edge_rows:
        costs = [r[3] for r in edge_rows]
        lo, hi = min(costs), max(costs)
        for src, dst, _raw, refined in edge_rows:
            c.line(nodes[int(src)], nodes[int(dst)], _cost_color(refined, lo, hi), width=1.0, opacity=0.7)
    for i in sorted(nodes):
        c.circle(nodes[i], 2.0, "#222233")
    return c.document()


def render_trajectory(env: EnvConfig, trajectory_rows: list[tuple], planned_path: list | None = None) -> str:
    """Trajectory polyline over the maze, optionally with the planned path."""
    c = _base_canvas(env)
    if planned_path:
        c.polyline(planned_path, "#118833", width=2.5, opacity=0.9)
    pts = [(row[1], row[2]) for row in trajectory_rows]
    c.polyline(pts, "#2244bb", width=1.8, opacity=0.9)
    if pts:
        c.circle(pts[-1], 3.5, "#cc2222")
    return c.document()


def render_heatmap(env: EnvConfig, visitation_rows: list[tuple], cell_size: float) -> str:
    """Per-cell visit shading with a failure-ratio overlay."""
    c = SvgCanvas(env.bounds)
    c.rect(env.bounds, fill="#f8f8f5", stroke="#444444")
    max_visits = max((r[3] for r in visitation_rows), default=0)
    for _m, x0, y0, visits, _fails, ratio in visitation_rows:
        box = Rect(x0, y0, min(x0 + cell_size, env.bounds.x1), min(y0 + cell_size, env.bounds.y1))
        if max_visits > 0 and visits > 0:
            c.rect(box, fill="#3a6fb0", opacity=0.15 + 0.65 * (visits / max_visits))
        if ratio > 0.0:
            c.rect(box, fill="#cc3322", opacity=min(0.8, 0.8 * ratio))
    for w in env.walls:
        c.rect(w, fill="#555555")
    return c.document()
