"""Tests for the SVG contour figure and the alpha-shape smoother."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest
from scipy.spatial import Delaunay

from mkdepth.depth import fit_transport, quantile_contour
from mkdepth.errors import InvalidTauError, UnsupportedDimensionError
from mkdepth.figure import alpha_shape_boundary, default_taus, render_figure
from mkdepth.measures import make_reference_grid, segment_grid

SVG = "{http://www.w3.org/2000/svg}"


def _svg_root(text):
    return ET.fromstring(text)


def _polylines(root):
    return root.findall(f".//{SVG}polyline")


def _parse_points(attr):
    return np.array([[float(c) for c in pair.split(",")] for pair in attr.split()])


# ---------------------------------------------------------------------------
# default taus


def test_default_taus():
    taus = default_taus()
    assert taus == [k / 12 for k in range(1, 12)]
    assert default_taus(3) == [0.25, 0.5, 0.75]
    assert all(0.0 < t < 1.0 for t in taus)


# ---------------------------------------------------------------------------
# alpha shapes


def test_alpha_shape_square():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    loops = alpha_shape_boundary(square, alpha=2.0)
    assert len(loops) == 1
    assert sorted(loops[0]) == [0, 1, 2, 3]


def test_alpha_shape_splits_distant_clusters():
    ang = 2.0 * np.pi * np.arange(12) / 12
    ring = np.column_stack([2.0 * np.cos(ang), 2.0 * np.sin(ang)])
    pts = np.vstack([ring, [[0.0, 0.0]],
                     [[10.0, 0.0], [10.3, 0.0], [10.15, 0.25]]])
    loops = alpha_shape_boundary(pts, alpha=1.5)
    assert len(loops) == 2
    assert len(loops[0]) == 12  # longest loop first
    assert len(loops[1]) == 3
    assert all(0 <= i < len(pts) for loop in loops for i in loop)


def test_alpha_shape_degenerate_inputs():
    assert alpha_shape_boundary(np.array([[0.0, 0.0], [1.0, 1.0]]), 1.0) == []
    collinear = np.column_stack([np.arange(5.0), np.zeros(5)])
    assert alpha_shape_boundary(collinear, 1.0) == []
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    assert alpha_shape_boundary(square, alpha=1e-9) == []


# ---------------------------------------------------------------------------
# figure rendering


def test_figure_parses_with_expected_elements(banana999):
    svg = render_figure(banana999)
    root = _svg_root(svg)
    assert root.tag == f"{SVG}svg"
    assert "mkdepth figure format 1" in svg
    circles = root.findall(f".//{SVG}circle")
    assert len(circles) == banana999.target.size
    polys = _polylines(root)
    assert len(polys) == 11
    taus = [float(p.get("data-tau")) for p in polys]
    assert taus == sorted(default_taus())


def test_figure_innermost_contour_sits_inside_sample(banana999):
    root = _svg_root(render_figure(banana999))
    circles = root.findall(f".//{SVG}circle")
    sample_px = np.array([[float(c.get("cx")), float(c.get("cy"))] for c in circles])
    inner = _parse_points(_polylines(root)[0].get("points"))
    centroid = inner[:-1].mean(axis=0)
    hull = Delaunay(sample_px)
    assert hull.find_simplex(centroid) >= 0


def test_figure_polylines_are_closed(banana999):
    root = _svg_root(render_figure(banana999, taus=[0.3, 0.7]))
    for poly in _polylines(root):
        pts = _parse_points(poly.get("points"))
        assert np.array_equal(pts[0], pts[-1])


def test_figure_alpha_zero_uses_raw_contour():
    grid = make_reference_grid(12, 24).measure
    ft = fit_transport(grid, grid, mode="assignment")
    root = _svg_root(render_figure(ft, taus=[0.5], alpha=0.0, spokes=60))
    pts = _parse_points(_polylines(root)[0].get("points"))
    assert len(pts) == len(quantile_contour(ft, 0.5, spokes=60)) + 1


def test_figure_rejects_bad_inputs(banana999):
    for bad in (1.5, 0.0, -0.2):
        with pytest.raises(InvalidTauError):
            render_figure(banana999, taus=[bad])
    with pytest.raises(InvalidTauError):
        render_figure(banana999, alpha=-1.0)
    seg = segment_grid(9)
    univariate = fit_transport(seg, seg, mode="assignment")
    with pytest.raises(UnsupportedDimensionError):
        render_figure(univariate)


def test_figure_deterministic_modulo_version(banana999):
    one = render_figure(banana999, taus=[0.25, 0.75], version="1.0")
    two = render_figure(banana999, taus=[0.25, 0.75], version="2.0")
    strip = lambda s: [ln for ln in s.splitlines() if not ln.startswith("<!--")]
    assert strip(one) == strip(two)
    assert one != two
    assert one == render_figure(banana999, taus=[0.25, 0.75], version="1.0")
