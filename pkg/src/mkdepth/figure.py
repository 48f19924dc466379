"""Static SVG figures: sample scatter with depth contours.

The alpha-shape smoothing here is a display-only transform of the
region point sets; depth values and contours served elsewhere never
depend on it.  Alpha is an absolute circumradius threshold in data
units: a Delaunay triangle survives when its circumradius is at most
alpha, and the drawn outline is the longest boundary loop of the
surviving triangulation.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay

from .depth import FittedTransport, depth_region, quantile_contour
from .errors import InvalidTauError, UnsupportedDimensionError

__all__ = ["alpha_shape_boundary", "default_taus", "render_figure"]

_FORMAT_COMMENT = "mkdepth figure format 1"


def default_taus(count: int = 11) -> list[float]:
    """count values evenly spaced in the open interval (0, 1)."""
    return [k / (count + 1) for k in range(1, count + 1)]


def _circumradii(points: np.ndarray, tris: np.ndarray) -> np.ndarray:
    a = points[tris[:, 0]]
    b = points[tris[:, 1]]
    c = points[tris[:, 2]]
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(a - c, axis=1)
    lc = np.linalg.norm(a - b, axis=1)
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
        c[:, 0] - a[:, 0]
    )
    area2 = np.abs(cross)  # twice the area
    with np.errstate(divide="ignore"):
        r = la * lb * lc / np.where(area2 > 0, 2.0 * area2, np.inf)
    return np.where(area2 > 0, r, np.inf)


def alpha_shape_boundary(points: np.ndarray, alpha: float) -> list[np.ndarray]:
    """Boundary loops of the alpha shape of a 2-d point set.

    Returns a list of closed loops (arrays of vertex indices into
    ``points``), longest first.  Empty when the filtered triangulation
    has no boundary (fewer than 3 distinct points, or alpha too small).
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        return []
    try:
        tri = Delaunay(pts)
    except Exception:
        return []  # degenerate input (collinear points)
    keep = tri.simplices[_circumradii(pts, tri.simplices) <= alpha]
    if len(keep) == 0:
        return []
    # boundary edges appear in exactly one surviving triangle
    edges = np.concatenate([keep[:, [0, 1]], keep[:, [1, 2]], keep[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    boundary = uniq[counts == 1]
    if len(boundary) == 0:
        return []
    adj: dict[int, list[int]] = {}
    for u, v in boundary:
        adj.setdefault(int(u), []).append(int(v))
        adj.setdefault(int(v), []).append(int(u))
    unused = {(int(u), int(v)) for u, v in boundary}
    unused |= {(int(v), int(u)) for u, v in boundary}
    loops = []
    for start in sorted(adj):
        for first in sorted(adj[start]):
            if (start, first) not in unused:
                continue
            loop = [start]
            prev, cur = start, first
            unused.discard((start, first))
            unused.discard((first, start))
            while cur != start:
                loop.append(cur)
                nxt = None
                for cand in sorted(adj.get(cur, [])):
                    if (cur, cand) in unused:
                        nxt = cand
                        break
                if nxt is None:
                    break  # open chain; drop it
                unused.discard((cur, nxt))
                unused.discard((nxt, cur))
                prev, cur = cur, nxt
            else:
                loops.append(np.asarray(loop, dtype=int))

    def perimeter(loop):
        p = pts[loop]
        return float(np.linalg.norm(np.diff(np.vstack([p, p[:1]]), axis=0), axis=1).sum())

    loops.sort(key=perimeter, reverse=True)
    return loops


def _contour_polyline(fit, tau, alpha, spokes):
    """Closed polyline for one tau, smoothed when alpha > 0."""
    if alpha > 0:
        region = depth_region(fit, tau)
        loops = alpha_shape_boundary(region, alpha)
        if loops:
            loop = loops[0]
            return np.vstack([region[loop], region[loop[:1]]])
    contour = quantile_contour(fit, tau, spokes=spokes)
    return np.vstack([contour, contour[:1]])


def render_figure(
    fit: FittedTransport,
    taus=None,
    alpha: float = 0.3,
    spokes: int = 181,
    width: int = 640,
    height: int = 640,
    version: str = "dev",
) -> str:
    """SVG figure of the sample and its tau-contours (dimension two only).

    Identical inputs render byte-identical SVG, except for the version
    comment line.
    """
    if fit.target.dim != 2:
        raise UnsupportedDimensionError("figures require two-dimensional data")
    if taus is None:
        taus = default_taus()
    taus = [float(t) for t in taus]
    for t in taus:
        if not (0.0 < t <= 1.0):
            raise InvalidTauError(f"tau must lie in (0, 1], got {t}")
    if alpha < 0:
        raise InvalidTauError(f"alpha must be nonnegative, got {alpha}")

    sample = fit.target.points
    polys = [(t, _contour_polyline(fit, t, alpha, spokes)) for t in sorted(taus)]

    all_pts = np.vstack([sample] + [p for _, p in polys])
    lo = all_pts.min(axis=0)
    hi = all_pts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    pad = 0.05 * span
    lo, hi = lo - pad, hi + pad
    span = hi - lo
    scale = min(width / span[0], height / span[1])
    offset = np.array(
        [
            (width - scale * span[0]) / 2.0 - scale * lo[0],
            (height - scale * span[1]) / 2.0 + scale * hi[1],
        ]
    )

    def to_px(p):
        return offset[0] + scale * p[0], offset[1] - scale * p[1]

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<!-- {_FORMAT_COMMENT}; version {version} -->",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        '<g class="sample" fill="#60606080" stroke="none">',
    ]
    for p in sample:
        x, y = to_px(p)
        lines.append(f'<circle class="pt" cx="{x:.2f}" cy="{y:.2f}" r="1.5"/>')
    lines.append("</g>")
    lines.append('<g class="contours" fill="none" stroke-width="1.5">')
    n_taus = max(len(polys), 1)
    for rank, (t, poly) in enumerate(polys):
        frac = rank / max(n_taus - 1, 1)
        color = f"#{int(40 + 180 * frac):02x}30{int(220 - 180 * frac):02x}"
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in (to_px(p) for p in poly))
        lines.append(
            f'<polyline class="contour" data-tau="{t!r}" stroke="{color}" points="{coords}"/>'
        )
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
