"""Deterministic SVG renderings of forests, aggregates and coupled pairs.

Same input, identical bytes: colors are a fixed palette indexed by a hash
of each tree's root coordinates, floats are formatted with two decimals,
and all element orders follow insertion order.  Forest drawings are d=2
only; d=3 snapshots render as site-cube projections.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import UnsupportedDimension
from .snapshot import SnapshotState
from .streams import mix64

# Palette for tree colors (hash of root coordinates picks the entry).
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#4b0082", "#b8860b",
)

GREEN = "#2ca02c"
BLUE = "#1f4fff"
RED = "#d62728"
GRAY = "#c8c8c8"
CUBE_BLUE = "#4477cc"


@dataclass
class FigureScene:
    """Colored site rectangles and edge segments with a legend."""

    d: int
    title: str
    rects: list = field(default_factory=list)     # (x, y, size, color)
    segments: list = field(default_factory=list)  # (x1, y1, x2, y2, color)
    legend: list = field(default_factory=list)    # (color, label)


def _root_color(root) -> str:
    h = 0xCBF29CE484222325
    for c in root:
        h = mix64(h ^ (c & 0xFFFFFFFFFFFFFFFF))
    return PALETTE[h % len(PALETTE)]


def _plane(site):
    """Map a d=2 site to drawing coordinates: hyperplane axis rightward,
    positive first coordinate upward."""
    return float(site[1]), float(-site[0])


def _cube(site):
    """Oblique projection of a d=3 site."""
    x = site[1] + 0.35 * site[2]
    y = -site[0] - 0.35 * site[2]
    return float(x), float(y)


def scene_from_snapshot(state: SnapshotState) -> FigureScene:
    d = int(state.config["d"])
    title = ", ".join(f"{k}={state.config[k]}" for k in sorted(state.config))
    scene = FigureScene(d, title)
    if d == 2:
        roots = {}

        def root_of(idx: int):
            seen = []
            while state.parents[idx] >= 0 and idx not in roots:
                seen.append(idx)
                idx = state.parents[idx]
            r = roots.get(idx, state.sites[idx])
            for k in seen:
                roots[k] = r
            roots[idx] = r
            return r

        for i, site in enumerate(state.sites):
            x, y = _plane(site)
            scene.rects.append((x, y, 1.0, _root_color(root_of(i))))
        for i, site in enumerate(state.sites):
            p = state.parents[i]
            if p >= 0:
                x1, y1 = _plane(state.sites[p])
                x2, y2 = _plane(site)
                scene.segments.append((x1, y1, x2, y2, "#333333"))
        scene.legend.append(("#333333", "parent edge"))
        scene.legend.append((PALETTE[0], "tree (color per root)"))
    elif d == 3:
        for site in sorted(state.sites, key=lambda s: (s[2], s[1], s[0])):
            x, y = _cube(site)
            scene.rects.append((x, y, 1.0, CUBE_BLUE))
        scene.legend.append((CUBE_BLUE, "settled site (cube projection)"))
    else:
        raise UnsupportedDimension(f"figures support d=2 and d=3, not d={d}")
    return scene


def scene_from_coupling(small_pair, large_pair, report, title: str = "") -> FigureScene:
    """Fig.-2 style scene: green common edges, blue and red sites."""
    small_agg, small_forest = small_pair
    large_agg, large_forest = large_pair
    if small_agg.d != 2:
        raise UnsupportedDimension("coupling figures are d=2 only")
    scene = FigureScene(2, title or "coupled forests")
    common = set(report.green_edges)
    for site in large_agg.sites:
        x, y = _plane(site)
        if site in report.red:
            color = RED
        elif site in report.blue:
            color = BLUE
        else:
            color = GRAY
        scene.rects.append((x, y, 1.0, color))
    for forest in (large_forest, small_forest):
        for edge in sorted(forest.edges()):
            if edge in common:
                continue
            x1, y1 = _plane(edge[0])
            x2, y2 = _plane(edge[1])
            scene.segments.append((x1, y1, x2, y2, "#888888"))
    for edge in sorted(common):
        x1, y1 = _plane(edge[0])
        x2, y2 = _plane(edge[1])
        scene.segments.append((x1, y1, x2, y2, GREEN))
    scene.legend.append((GREEN, "edge common to both forests"))
    scene.legend.append((BLUE, "common site, different particle or edge"))
    scene.legend.append((RED, "site of the larger aggregate only"))
    scene.legend.append((GRAY, "site common to both aggregates"))
    return scene


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def emit_figure(scene: FigureScene) -> str:
    """Render a scene to an SVG 1.1 document (deterministic bytes)."""
    xs = [r[0] for r in scene.rects] + [s[0] for s in scene.segments] \
        + [s[2] for s in scene.segments]
    ys = [r[1] for r in scene.rects] + [s[1] for s in scene.segments] \
        + [s[3] for s in scene.segments]
    if xs:
        lo_x, hi_x = min(xs) - 2, max(xs) + 2
        lo_y, hi_y = min(ys) - 2, max(ys) + 2
    else:
        lo_x, hi_x, lo_y, hi_y = -10, 10, -10, 10
    legend_h = 1.6 * (len(scene.legend) + 1)
    out = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="{_fmt(lo_x)} {_fmt(lo_y - legend_h - 1)} '
        f'{_fmt(hi_x - lo_x)} {_fmt(hi_y - lo_y + legend_h + 2)}">')
    out.append(f'<title>{scene.title}</title>')
    # axes: hyperplane (horizontal) and the growth axis (vertical)
    out.append(
        f'<line class="axis" x1="{_fmt(lo_x)}" y1="0.00" x2="{_fmt(hi_x)}" '
        f'y2="0.00" stroke="#aaaaaa" stroke-width="0.05"/>')
    out.append(
        f'<line class="axis" x1="0.00" y1="{_fmt(lo_y)}" x2="0.00" '
        f'y2="{_fmt(hi_y)}" stroke="#aaaaaa" stroke-width="0.05"/>')
    for x, y, size, color in scene.rects:
        out.append(
            f'<rect class="site" x="{_fmt(x - size / 2)}" '
            f'y="{_fmt(y - size / 2)}" width="{_fmt(size)}" '
            f'height="{_fmt(size)}" fill="{color}"/>')
    for x1, y1, x2, y2, color in scene.segments:
        out.append(
            f'<line class="edge" x1="{_fmt(x1)}" y1="{_fmt(y1)}" '
            f'x2="{_fmt(x2)}" y2="{_fmt(y2)}" stroke="{color}" '
            f'stroke-width="0.15"/>')
    ly = lo_y - legend_h
    for color, label in scene.legend:
        out.append(
            f'<rect class="legend" x="{_fmt(lo_x + 0.5)}" y="{_fmt(ly)}" '
            f'width="1.00" height="1.00" fill="{color}"/>')
        out.append(
            f'<text class="legend-label" x="{_fmt(lo_x + 2.0)}" '
            f'y="{_fmt(ly + 0.8)}" font-size="1.0" '
            f'fill="#000000">{label}</text>')
        ly += 1.5
    out.append("</svg>")
    return "\n".join(out) + "\n"
