"""Discrete measures, reference grids, synthetic families and file IO.

A discrete measure is a finite weighted point cloud.  All solvers in
this package operate on pairs of such measures: a data sample and a
discretization of the spherical-uniform reference distribution.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptySupportError,
    InconsistentArityError,
    InvalidDimensionError,
    NonpositiveWeightError,
    NonuniformWeightsError,
    NoOracleError,
    ParseError,
    UnsupportedDimensionError,
)

__all__ = [
    "DiscreteMeasure",
    "ReferenceGrid",
    "SyntheticFamily",
    "make_family",
    "make_reference_grid",
    "make_reference_mc",
    "make_cube_mc",
    "segment_grid",
    "sample_spherical_uniform",
    "load_csv",
    "save_csv",
    "measure_to_json",
    "measure_from_json",
]


def _merge_duplicate_atoms(points: np.ndarray, weights: np.ndarray):
    """Merge atoms with identical coordinates, summing their weights.

    First-occurrence order of the surviving atoms is preserved.
    """
    _, first_idx, inverse = np.unique(points, axis=0, return_index=True, return_inverse=True)
    if len(first_idx) == len(points):
        return points, weights
    # np.unique sorts lexicographically; re-rank groups by first occurrence
    order = np.argsort(first_idx, kind="stable")
    rank = np.empty(len(order), dtype=np.intp)
    rank[order] = np.arange(len(order))
    new_index = rank[inverse.ravel()]
    merged_w = np.zeros(len(first_idx))
    np.add.at(merged_w, new_index, weights)
    merged_p = points[np.sort(first_idx)]
    return merged_p, merged_w


@dataclass
class DiscreteMeasure:
    """A finitely supported probability measure.

    Parameters
    ----------
    points : ndarray of shape (n, d)
        Atom locations.  Must be finite.
    weights : ndarray of shape (n,), optional
        Nonnegative masses.  Defaults to uniform.  Normalized to sum
        to one on construction; zero-weight atoms are dropped and
        coordinate-identical atoms are merged.
    """

    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise InvalidDimensionError("points must be a 2d array of shape (n, d)")
        if pts.shape[0] == 0:
            raise EmptySupportError("a measure needs at least one atom")
        if pts.shape[1] < 1:
            raise InvalidDimensionError("atoms need at least one coordinate")
        if not np.all(np.isfinite(pts)):
            raise ParseError("atom coordinates must be finite")
        if self.weights is None:
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape[0] != pts.shape[0]:
                raise InconsistentArityError(
                    f"{pts.shape[0]} atoms but {w.shape[0]} weights"
                )
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise NonpositiveWeightError("weights must be finite and nonnegative")
            keep = w > 0
            if not np.any(keep):
                raise EmptySupportError("all atoms have zero weight")
            pts, w = pts[keep], w[keep]
        pts, w = _merge_duplicate_atoms(pts, w)
        w = w / w.sum()
        self.points = pts
        self.weights = w

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def is_uniform(self, rtol: float = 1e-12) -> bool:
        return bool(np.allclose(self.weights, 1.0 / self.size, rtol=rtol, atol=rtol))


@dataclass
class ReferenceGrid:
    """Deterministic polar discretization of the spherical uniform on the disk.

    Ring ``j`` (0-based) sits at radius ``(j + 1) / rings``; within it the
    ``spokes`` angles are offset by ``pi * j / spokes`` so consecutive
    rings interleave.  All atoms carry equal weight, which makes every
    centered ball of radius r carry mass approximately r: the grid is a
    quadrature of the distribution whose radius is uniform on [0, 1].
    """

    rings: int
    spokes: int
    radii: np.ndarray = field(init=False)
    measure: DiscreteMeasure = field(init=False)

    def __post_init__(self):
        if self.rings < 1 or self.spokes < 1:
            raise InvalidDimensionError("rings and spokes must be positive")
        j = np.arange(self.rings)
        self.radii = (j + 1) / self.rings
        k = np.arange(self.spokes)
        theta = 2.0 * np.pi * k[None, :] / self.spokes + np.pi * j[:, None] / self.spokes
        r = self.radii[:, None]
        x = (r * np.cos(theta)).ravel()
        y = (r * np.sin(theta)).ravel()
        self.measure = DiscreteMeasure(np.column_stack([x, y]))


def make_reference_grid(rings: int, spokes: int) -> ReferenceGrid:
    """Build the deterministic two-dimensional reference grid."""
    return ReferenceGrid(rings=rings, spokes=spokes)


def sample_spherical_uniform(n: int, dim: int, seed: int) -> DiscreteMeasure:
    """Draw n points from the spherical uniform distribution in R^dim.

    The spherical uniform is the law of R * Phi with R uniform on [0, 1]
    and Phi uniform on the unit sphere, independent.  In dimension one it
    reduces to the uniform distribution on [-1, 1].
    """
    if n < 1:
        raise EmptySupportError("need at least one sample point")
    if dim < 1:
        raise InvalidDimensionError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, dim))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    # resample the (measure-zero) degenerate rows rather than dividing by zero
    while np.any(norms == 0):
        bad = norms[:, 0] == 0
        g[bad] = rng.standard_normal((bad.sum(), dim))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
    phi = g / norms
    r = rng.random((n, 1))
    return DiscreteMeasure(r * phi)


def make_reference_mc(n: int, dim: int, seed: int = 0) -> DiscreteMeasure:
    """Monte-Carlo reference: n spherical-uniform draws, uniform weights."""
    return sample_spherical_uniform(n, dim, seed)


def make_cube_mc(n: int, dim: int, seed: int = 0) -> DiscreteMeasure:
    """Monte-Carlo discretization of the uniform distribution on [0, 1]^dim."""
    if n < 1:
        raise EmptySupportError("need at least one sample point")
    if dim < 1:
        raise InvalidDimensionError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    return DiscreteMeasure(rng.random((n, dim)))


def segment_grid(n: int) -> DiscreteMeasure:
    """Deterministic n-point midpoint discretization of U[-1, 1].

    This is the one-dimensional spherical uniform; with it the fitted
    rank map reduces to the classical centered rank 2 F(x) - 1.
    """
    if n < 1:
        raise EmptySupportError("need at least one atom")
    mid = (2.0 * np.arange(1, n + 1) - 1.0) / n - 1.0
    return DiscreteMeasure(mid.reshape(-1, 1))


# ---------------------------------------------------------------------------
# synthetic families

_FAMILY_KINDS = ("banana", "uniform-ball", "elliptical-spherical", "univariate-uniform")


@dataclass
class SyntheticFamily:
    """A named distribution with a sampler and, when known, closed-form maps.

    Kinds
    -----
    banana
        The bent two-dimensional cloud (X + R cos Phi, X^2 + R sin Phi)
        with X uniform on [-1, 1], Phi uniform on [0, 2 pi] and
        R = 0.2 Z (1 + (1 - |X|) / 2), Z uniform on [0, 1].  No
        closed-form quantile map.
    uniform-ball
        Uniform on the unit ball in R^dim.  Spherically symmetric with
        radial CDF G(r) = r^dim, so the population quantile map is
        u -> (u / |u|) G^{-1}(|u|).
    elliptical-spherical
        Spherically symmetric with power radial CDF G(r) = r^k on
        [0, 1], k = parameters["exponent"].  Generalizes uniform-ball
        (k = dim).
    univariate-uniform
        Uniform on [low, high] in dimension one; rank map 2 F(x) - 1.
    """

    kind: str
    dim: int
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _FAMILY_KINDS:
            raise ParseError(f"unknown family {self.kind!r}; pick one of {_FAMILY_KINDS}")
        if self.dim < 1:
            raise InvalidDimensionError("dim must be >= 1")
        if self.kind == "banana" and self.dim != 2:
            raise UnsupportedDimensionError("banana is two-dimensional")
        if self.kind == "univariate-uniform" and self.dim != 1:
            raise UnsupportedDimensionError("univariate-uniform needs dim == 1")
        if self.kind == "elliptical-spherical":
            k = float(self.parameters.get("exponent", self.dim))
            if k <= 0:
                raise ParseError("exponent must be positive")
            self.parameters = {**self.parameters, "exponent": k}

    @property
    def has_oracle(self) -> bool:
        return self.kind != "banana"

    def _exponent(self) -> float:
        if self.kind == "uniform-ball":
            return float(self.dim)
        return float(self.parameters["exponent"])

    def sample(self, n: int, seed: int) -> DiscreteMeasure:
        if n < 1:
            raise EmptySupportError("need at least one sample point")
        rng = np.random.default_rng(seed)
        if self.kind == "banana":
            x = rng.uniform(-1.0, 1.0, n)
            phi = rng.uniform(0.0, 2.0 * np.pi, n)
            z = rng.random(n)
            r = 0.2 * z * (1.0 + (1.0 - np.abs(x)) / 2.0)
            pts = np.column_stack([x + r * np.cos(phi), x**2 + r * np.sin(phi)])
            return DiscreteMeasure(pts)
        if self.kind == "univariate-uniform":
            low = float(self.parameters.get("low", 0.0))
            high = float(self.parameters.get("high", 1.0))
            return DiscreteMeasure(rng.uniform(low, high, n).reshape(-1, 1))
        # spherically symmetric power families: |Y| = U^{1/k}, direction uniform
        k = self._exponent()
        g = rng.standard_normal((n, self.dim))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        while np.any(norms == 0):
            bad = norms[:, 0] == 0
            g[bad] = rng.standard_normal((bad.sum(), self.dim))
            norms = np.linalg.norm(g, axis=1, keepdims=True)
        radius = rng.random((n, 1)) ** (1.0 / k)
        return DiscreteMeasure(radius * g / norms)

    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Population quantile map evaluated at reference points u."""
        if not self.has_oracle:
            raise NoOracleError(f"family {self.kind!r} has no closed-form quantile map")
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[1] != self.dim:
            raise DimensionMismatchError(f"expected dim {self.dim}, got {u.shape[1]}")
        if self.kind == "univariate-uniform":
            low = float(self.parameters.get("low", 0.0))
            high = float(self.parameters.get("high", 1.0))
            return low + (high - low) * (u + 1.0) / 2.0
        k = self._exponent()
        norms = np.linalg.norm(u, axis=1, keepdims=True)
        out = np.zeros_like(u)
        nz = norms[:, 0] > 0
        out[nz] = u[nz] / norms[nz] * norms[nz] ** (1.0 / k)
        return out

    def rank(self, y: np.ndarray) -> np.ndarray:
        """Population rank map (inverse of the quantile map)."""
        if not self.has_oracle:
            raise NoOracleError(f"family {self.kind!r} has no closed-form rank map")
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if y.shape[1] != self.dim:
            raise DimensionMismatchError(f"expected dim {self.dim}, got {y.shape[1]}")
        if self.kind == "univariate-uniform":
            low = float(self.parameters.get("low", 0.0))
            high = float(self.parameters.get("high", 1.0))
            return 2.0 * (y - low) / (high - low) - 1.0
        k = self._exponent()
        norms = np.linalg.norm(y, axis=1, keepdims=True)
        out = np.zeros_like(y)
        nz = norms[:, 0] > 0
        out[nz] = y[nz] / norms[nz] * norms[nz] ** k
        return out


def make_family(kind: str, dim: int | None = None, **parameters) -> SyntheticFamily:
    """Convenience constructor with per-family default dimensions."""
    if dim is None:
        dim = 1 if kind == "univariate-uniform" else 2
    return SyntheticFamily(kind=kind, dim=dim, parameters=parameters)


# ---------------------------------------------------------------------------
# file formats

def load_csv(path, weights_column: bool = False) -> DiscreteMeasure:
    """Read a point cloud from CSV.

    One row per atom, comma separated, '.' decimal marker.  Lines whose
    first nonblank character is '#' are comments.  When
    ``weights_column`` is set the last column holds strictly positive
    weights; otherwise every column is a coordinate and weights are
    uniform.  Duplicate atoms are merged with summed weights.
    """
    rows = []
    arity = None
    with open(path, newline="") as fh:
        for lineno, line in enumerate(csv.reader(fh), start=1):
            if not line or (line[0].lstrip().startswith("#")):
                continue
            cells = [c.strip() for c in line]
            if arity is None:
                arity = len(cells)
                min_cols = 2 if weights_column else 1
                if arity < min_cols:
                    raise InconsistentArityError(
                        f"row {lineno}: need at least {min_cols} columns, got {arity}"
                    )
            elif len(cells) != arity:
                raise InconsistentArityError(
                    f"row {lineno}: expected {arity} columns, got {len(cells)}"
                )
            parsed = []
            for col, cell in enumerate(cells, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"row {lineno}, column {col}: cannot parse {cell!r} as a number",
                        row=lineno,
                        column=col,
                    ) from None
            if not all(math.isfinite(v) for v in parsed):
                raise ParseError(f"row {lineno}: non-finite value", row=lineno)
            rows.append(parsed)
    if not rows:
        raise EmptySupportError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    if weights_column:
        pts, w = data[:, :-1], data[:, -1]
        if np.any(w <= 0):
            bad = int(np.argmax(w <= 0)) + 1
            raise NonpositiveWeightError(f"data row {bad}: weight must be positive")
        return DiscreteMeasure(pts, w)
    return DiscreteMeasure(data)


def save_csv(measure: DiscreteMeasure, path, weights_column: bool = False) -> None:
    """Write a point cloud to CSV (see load_csv for the format)."""
    if not weights_column and not measure.is_uniform(rtol=1e-9):
        raise NonuniformWeightsError(
            "weights are not uniform; pass weights_column=True to keep them"
        )
    header = [f"x{i + 1}" for i in range(measure.dim)]
    if weights_column:
        header.append("weight")
    with open(path, "w", newline="") as fh:
        fh.write("# " + ",".join(header) + "\n")
        writer = csv.writer(fh)
        for i in range(measure.size):
            row = [repr(float(v)) for v in measure.points[i]]
            if weights_column:
                row.append(repr(float(measure.weights[i])))
            writer.writerow(row)


def measure_to_json(measure: DiscreteMeasure) -> dict:
    """JSON-ready dict with exact float round-trip via repr-compatible values."""
    return {
        "dim": measure.dim,
        "points": [[float(v) for v in row] for row in measure.points],
        "weights": [float(v) for v in measure.weights],
    }


def measure_from_json(obj: dict) -> DiscreteMeasure:
    try:
        dim = int(obj["dim"])
        pts = np.asarray(obj["points"], dtype=float)
        w = np.asarray(obj["weights"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed measure object: {exc}") from None
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise DimensionMismatchError(
            f"points have shape {pts.shape}, inconsistent with dim={dim}"
        )
    return DiscreteMeasure(pts, w)


def measure_dumps(measure: DiscreteMeasure) -> str:
    return json.dumps(measure_to_json(measure))


def measure_loads(text: str) -> DiscreteMeasure:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    return measure_from_json(obj)
