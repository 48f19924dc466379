"""Vector quantiles, ranks, signs, depth values, contours and regions.

A fitted transport bundles the dual potentials between a reference
discretization and the data sample.  Evaluation is pure argmax algebra:

    quantile(u) = argmax over target atoms y of (u . y - psi*(y))
    rank(y)     = argmax over reference atoms u of (y . u - psi(u))

Depth of a query point is the reference distribution's halfspace depth
evaluated at the query's scalar rank.  Two reference profiles are
supported: the spherical uniform on the unit ball (default) and the
uniform distribution on the unit cube.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidTauError,
    ParseError,
    TauOutOfRangeError,
    UnfittedError,
)
from .measures import DiscreteMeasure, measure_from_json, measure_to_json
from .otcore import solve_assignment
from .potentials import (
    PotentialPair,
    conjugate,
    pair_from_json,
    pair_to_json,
    recover_potentials,
)
from .semidiscrete import assign_cells, solve_semidiscrete

__all__ = [
    "FittedTransport",
    "DepthReport",
    "fit_transport",
    "eval_quantile",
    "eval_rank",
    "rank_reports",
    "quantile_contour",
    "depth_region",
    "tukey_depth_spherical",
    "cube_depth",
    "save_model",
    "load_model",
    "model_to_json",
    "model_from_json",
    "reports_to_csv",
]

_SIGN_EPS = 1e-12
_PROFILES = ("ball", "cube")


def tukey_depth_spherical(tau, d: int = 2):
    """Halfspace depth of the spherical uniform at scalar rank tau.

    In dimension one this is (1 - tau) / 2.  For d >= 2 it is
    (theta - cos(theta) * log|sec(theta) + tan(theta)|) / pi with
    theta = arccos(tau): the mass of the halfspace tangent to the sphere
    of radius tau.  Decreasing in tau, 1/2 at the center, 0 on the
    boundary.
    """
    arr = np.asarray(tau, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1) or not np.all(np.isfinite(arr)):
        raise TauOutOfRangeError("tau must lie in [0, 1]")
    if d < 1:
        raise DimensionMismatchError("d must be >= 1")
    if d == 1:
        out = (1.0 - arr) / 2.0
    else:
        theta = np.arccos(arr)
        with np.errstate(divide="ignore", invalid="ignore"):
            sec_tan = (1.0 + np.sin(theta)) / np.where(arr > 0, arr, 1.0)
            term = np.where(arr > 0, arr * np.log(sec_tan), 0.0)
        out = (theta - term) / np.pi
        out = np.clip(out, 0.0, 0.5)
    return float(out) if np.isscalar(tau) else out


def cube_depth(points, d: int):
    """Halfspace depth of the uniform cube law: 1/2 - |u - 1/2|_inf."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != d:
        raise DimensionMismatchError(f"expected dim {d}, got {pts.shape[1]}")
    return 0.5 - np.abs(pts - 0.5).max(axis=1)


class _BallProfile:
    """Spherical-uniform reference on the unit ball."""

    kind = "ball"

    @staticmethod
    def scalar_rank(vector_rank: np.ndarray) -> np.ndarray:
        return np.linalg.norm(vector_rank, axis=-1)

    @staticmethod
    def sign(vector_rank: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(vector_rank, axis=-1, keepdims=True)
        return np.where(r > _SIGN_EPS, vector_rank / np.where(r > 0, r, 1.0), 0.0)

    @staticmethod
    def depth(scalar_rank, d: int):
        return tukey_depth_spherical(np.clip(scalar_rank, 0.0, 1.0), d)

    @staticmethod
    def region_mask(ref_points: np.ndarray, tau: float) -> np.ndarray:
        return np.linalg.norm(ref_points, axis=1) <= tau + 1e-12

    @staticmethod
    def contour_points(tau: float, spokes: int, d: int) -> np.ndarray:
        if d == 1:
            return np.array([[-tau], [tau]])
        if d == 2:
            ang = 2.0 * np.pi * np.arange(spokes) / spokes
            return tau * np.column_stack([np.cos(ang), np.sin(ang)])
        # deterministic sphere covering for d >= 3 (fixed-seed draws)
        rng = np.random.default_rng(12345)
        g = rng.standard_normal((spokes, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return tau * g


class _CubeProfile:
    """Uniform reference on the unit cube [0, 1]^d.

    The scalar rank of a vector rank R is 2 |R - 1/2|_inf, which carries
    probability content rank^d; the depth-region of content tau is the
    centered subcube of side tau^(1/d).
    """

    kind = "cube"

    @staticmethod
    def scalar_rank(vector_rank: np.ndarray) -> np.ndarray:
        return np.clip(2.0 * np.abs(vector_rank - 0.5).max(axis=-1), 0.0, 1.0)

    @staticmethod
    def sign(vector_rank: np.ndarray) -> np.ndarray:
        c = vector_rank - 0.5
        r = np.abs(c).max(axis=-1, keepdims=True)
        return np.where(r > _SIGN_EPS, c / np.where(r > 0, r, 1.0), 0.0)

    @staticmethod
    def depth(scalar_rank, d: int):
        return 0.5 - np.asarray(scalar_rank) / 2.0

    @staticmethod
    def region_mask(ref_points: np.ndarray, tau: float) -> np.ndarray:
        d = ref_points.shape[1]
        side = tau ** (1.0 / d)
        return 2.0 * np.abs(ref_points - 0.5).max(axis=1) <= side + 1e-12

    @staticmethod
    def contour_points(tau: float, spokes: int, d: int) -> np.ndarray:
        side = tau ** (1.0 / d)
        if d == 1:
            return np.array([[0.5 - side / 2.0], [0.5 + side / 2.0]])
        if d == 2:
            ang = 2.0 * np.pi * np.arange(spokes) / spokes
            dirs = np.column_stack([np.cos(ang), np.sin(ang)])
            sup = np.abs(dirs).max(axis=1, keepdims=True)
            return 0.5 + (side / 2.0) * dirs / sup
        rng = np.random.default_rng(12345)
        g = rng.standard_normal((spokes, d))
        sup = np.abs(g).max(axis=1, keepdims=True)
        return 0.5 + (side / 2.0) * g / sup


def _profile(name: str):
    if name == "ball":
        return _BallProfile
    if name == "cube":
        return _CubeProfile
    raise ParseError(f"unknown profile {name!r}; pick one of {_PROFILES}")


def _row_table(points: np.ndarray) -> dict:
    """Map each point's byte pattern to its first row index."""
    table = {}
    for i, row in enumerate(points):
        key = row.tobytes()
        if key not in table:
            table[key] = i
    return table


def _table_rows(table: dict, pts: np.ndarray) -> np.ndarray:
    """Row indices of exact matches in a point table, -1 where absent."""
    out = np.empty(len(pts), dtype=np.int64)
    for i, row in enumerate(pts):
        out[i] = table.get(row.tobytes(), -1)
    return out


@dataclass
class FittedTransport:
    """Dual potentials plus everything needed to evaluate the maps.

    ``images`` records the target atom index assigned to each reference
    atom by the solver.  On the fitted support the maps use it directly,
    so ties in the argmax (the dual constraints are tight along the whole
    optimal plan) cannot scramble the matching; off the support the maps
    fall back to the argmax formulas.
    """

    pair: PotentialPair
    mode: str
    profile: str = "ball"
    metadata: dict = field(default_factory=dict)
    images: np.ndarray | None = None

    def __post_init__(self):
        self._ref_table = None
        self._target_table = None
        self._inverse = None

    @property
    def ref(self) -> DiscreteMeasure:
        return self.pair.ref

    @property
    def target(self) -> DiscreteMeasure:
        return self.pair.target

    def ref_rows(self, pts: np.ndarray) -> np.ndarray:
        """Indices of query rows that coincide with reference atoms."""
        if self._ref_table is None:
            self._ref_table = _row_table(self.ref.points)
        return _table_rows(self._ref_table, pts)

    def target_rows(self, pts: np.ndarray) -> np.ndarray:
        """Indices of query rows that coincide with target atoms."""
        if self._target_table is None:
            self._target_table = _row_table(self.target.points)
        return _table_rows(self._target_table, pts)

    def inverse_images(self):
        """Reference atom matched to each target atom, when one-to-one."""
        if self.images is None or self.mode != "assignment":
            return None
        if self._inverse is None:
            if self.ref.size != self.target.size:
                return None
            inv = np.full(self.target.size, -1, dtype=np.int64)
            inv[self.images] = np.arange(self.ref.size)
            if np.any(inv < 0):
                return None
            self._inverse = inv
        return self._inverse

    def inflated_box(self):
        """Target bounding box inflated by 10% about its center."""
        lo = self.target.points.min(axis=0)
        hi = self.target.points.max(axis=0)
        center = (lo + hi) / 2.0
        half = 1.1 * (hi - lo) / 2.0
        return center - half, center + half


@dataclass
class DepthReport:
    """Rank, sign and depth of one query point."""

    query: np.ndarray
    vector_rank: np.ndarray
    scalar_rank: float
    sign: np.ndarray
    depth: float
    extrapolated: bool


def fit_transport(
    data: DiscreteMeasure,
    reference: DiscreteMeasure,
    mode: str = "assignment",
    profile: str = "ball",
    tol_mass: float = 1e-3,
    max_iters: int = 5000,
) -> FittedTransport:
    """Fit the empirical transport between a reference and a sample.

    assignment mode matches reference and data one-to-one (both must be
    uniform with equal atom counts); semidiscrete mode solves for
    power-diagram weights with the reference as quadrature, which
    allows weighted data and unequal sizes.
    """
    _profile(profile)
    if data.dim != reference.dim:
        raise DimensionMismatchError(
            f"data dim {data.dim} != reference dim {reference.dim}"
        )
    if mode == "assignment":
        coupling = solve_assignment(reference, data)
        pair = recover_potentials(coupling)
        images = coupling.cols[np.argsort(coupling.rows)].astype(np.int64)
        meta = {
            "solver": "assignment",
            "objective": coupling.objective,
            "dual_value": coupling.dual_value,
            "support_size": int(coupling.support_size),
        }
    elif mode == "semidiscrete":
        sol = solve_semidiscrete(data, reference, tol_mass=tol_mass, max_iters=max_iters)
        psi = sol.psi_on_quadrature()
        from .potentials import default_base_index

        base = default_base_index(reference)
        shift = psi[base]
        pair = PotentialPair(
            ref=reference,
            target=data,
            psi=psi - shift,
            psi_star=sol.v + shift,
            base_index=base,
        )
        images, _ = assign_cells(sol.v, reference, data)
        images = images.astype(np.int64)
        meta = {
            "solver": "semidiscrete",
            "objective": sol.objective,
            "mass_residual": sol.residual,
            "iterations": int(sol.iterations),
        }
    else:
        raise ParseError(f"unknown mode {mode!r}; pick assignment or semidiscrete")
    return FittedTransport(
        pair=pair, mode=mode, profile=profile, metadata=meta, images=images
    )


def _require_fitted(fit) -> FittedTransport:
    if fit is None or getattr(fit, "pair", None) is None:
        raise UnfittedError("no fitted transport available")
    return fit


def eval_quantile(fit: FittedTransport, u) -> np.ndarray:
    """Empirical vector quantile at reference point(s) u.

    Returns the target atom maximizing y . u - psi*(y).  Queries that
    coincide with a reference atom return the atom the solver matched to
    it (one of the maximizers, by complementary slackness); elsewhere the
    argmax takes the lowest index on ties, making the map piecewise
    constant and deterministic.
    """
    fit = _require_fitted(fit)
    u_arr = np.atleast_2d(np.asarray(u, dtype=float))
    if u_arr.shape[1] != fit.ref.dim:
        raise DimensionMismatchError(
            f"query dim {u_arr.shape[1]} != fitted dim {fit.ref.dim}"
        )
    out = fit.target.points[quantile_indices(fit, u_arr)]
    return out[0] if np.asarray(u).ndim == 1 else out


def quantile_indices(fit: FittedTransport, u) -> np.ndarray:
    """Target atom indices backing eval_quantile (for push-forward checks)."""
    fit = _require_fitted(fit)
    u_arr = np.atleast_2d(np.asarray(u, dtype=float))
    idx = np.empty(len(u_arr), dtype=np.int64)
    miss = np.ones(len(u_arr), dtype=bool)
    if fit.images is not None:
        rows = fit.ref_rows(u_arr)
        hit = rows >= 0
        idx[hit] = fit.images[rows[hit]]
        miss = ~hit
    if miss.any():
        _, cidx = conjugate(fit.target.points, fit.pair.psi_star, u_arr[miss])
        idx[miss] = cidx
    return idx


def rank_reports(fit: FittedTransport, queries) -> list[DepthReport]:
    """Vectorized eval_rank over a batch of query points."""
    fit = _require_fitted(fit)
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    if q.shape[1] != fit.target.dim:
        raise DimensionMismatchError(
            f"query dim {q.shape[1]} != fitted dim {fit.target.dim}"
        )
    if not np.all(np.isfinite(q)):
        raise ParseError("query points must be finite")
    prof = _profile(fit.profile)
    idx = np.empty(len(q), dtype=np.int64)
    miss = np.ones(len(q), dtype=bool)
    inv = fit.inverse_images()
    if inv is not None:
        rows = fit.target_rows(q)
        hit = rows >= 0
        idx[hit] = inv[rows[hit]]
        miss = ~hit
    if miss.any():
        _, cidx = conjugate(fit.ref.points, fit.pair.psi, q[miss])
        idx[miss] = cidx
    ranks = fit.ref.points[idx]
    scalar = np.atleast_1d(prof.scalar_rank(ranks))
    signs = prof.sign(ranks)
    depths = np.atleast_1d(prof.depth(scalar, fit.ref.dim))
    lo, hi = fit.inflated_box()
    outside = np.any((q < lo) | (q > hi), axis=1)
    return [
        DepthReport(
            query=q[i],
            vector_rank=ranks[i],
            scalar_rank=float(scalar[i]),
            sign=np.atleast_2d(signs)[i] if signs.ndim > 1 else signs,
            depth=float(depths[i]),
            extrapolated=bool(outside[i]),
        )
        for i in range(len(q))
    ]


def eval_rank(fit: FittedTransport, y) -> DepthReport:
    """Empirical vector rank, scalar rank, sign and depth at one point."""
    return rank_reports(fit, np.atleast_2d(np.asarray(y, dtype=float)))[0]


def _check_tau(tau: float) -> float:
    t = float(tau)
    if not (0.0 < t <= 1.0) or not np.isfinite(t):
        raise InvalidTauError(f"tau must lie in (0, 1], got {tau}")
    return t


def quantile_contour(fit: FittedTransport, tau: float, spokes: int = 128) -> np.ndarray:
    """Images of the tau-sphere of the reference: the empirical contour.

    For d = 2 the points come back in the angular order of the probed
    directions, ready to be drawn as a closed polyline.
    """
    fit = _require_fitted(fit)
    t = _check_tau(tau)
    if spokes < 1:
        raise ParseError("spokes must be positive")
    prof = _profile(fit.profile)
    dirs = prof.contour_points(t, spokes, fit.ref.dim)
    return np.atleast_2d(eval_quantile(fit, dirs))


def depth_region(fit: FittedTransport, tau: float) -> np.ndarray:
    """Images of all reference atoms with probability content up to tau.

    Returns the deduplicated point set Q(tau-ball); its hull sketches
    the depth region with reference probability content tau.
    """
    fit = _require_fitted(fit)
    t = _check_tau(tau)
    prof = _profile(fit.profile)
    mask = prof.region_mask(fit.ref.points, t)
    if fit.images is not None:
        images = fit.target.points[fit.images[mask]]
    else:
        images = np.atleast_2d(eval_quantile(fit, fit.ref.points[mask]))
    return np.unique(images, axis=0)


# ---------------------------------------------------------------------------
# model files

_MODEL_FORMAT = "mkdepth-model"
_MODEL_VERSION = 1


def model_to_json(fit: FittedTransport) -> dict:
    fit = _require_fitted(fit)
    obj = {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "mode": fit.mode,
        "profile": fit.profile,
        "reference": measure_to_json(fit.ref),
        "data": measure_to_json(fit.target),
        "potentials": pair_to_json(fit.pair),
        "metadata": fit.metadata,
    }
    if fit.images is not None:
        obj["images"] = [int(i) for i in fit.images]
    return obj


def model_from_json(obj: dict) -> FittedTransport:
    if not isinstance(obj, dict) or obj.get("format") != _MODEL_FORMAT:
        raise ParseError("not a fitted-model object")
    try:
        ref = measure_from_json(obj["reference"])
        target = measure_from_json(obj["data"])
        pair = pair_from_json(obj["potentials"], ref, target)
        mode = str(obj["mode"])
        profile = str(obj.get("profile", "ball"))
        metadata = dict(obj.get("metadata", {}))
        images = obj.get("images")
    except KeyError as exc:
        raise ParseError(f"fitted model is missing field {exc}") from None
    if images is not None:
        images = np.asarray(images, dtype=np.int64)
        if images.shape != (ref.size,):
            raise ParseError("images must list one target index per reference atom")
        if images.size and (images.min() < 0 or images.max() >= target.size):
            raise ParseError("images contain out-of-range target indices")
    return FittedTransport(
        pair=pair, mode=mode, profile=profile, metadata=metadata, images=images
    )


def save_model(fit: FittedTransport, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_json(fit), fh)
        fh.write("\n")


def load_model(path) -> FittedTransport:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    return model_from_json(obj)


def reports_to_csv(reports: list[DepthReport], path) -> None:
    """Batch depth output: query coords, rank coords, scalar rank, depth, flag."""
    if not reports:
        raise ParseError("no reports to write")
    d = len(reports[0].query)
    header = (
        [f"x{i + 1}" for i in range(d)]
        + [f"rank{i + 1}" for i in range(d)]
        + ["scalar_rank", "depth", "extrapolated"]
    )
    with open(path, "w", newline="") as fh:
        fh.write("# " + ",".join(header) + "\n")
        writer = csv.writer(fh)
        for r in reports:
            writer.writerow(
                [repr(float(v)) for v in r.query]
                + [repr(float(v)) for v in r.vector_rank]
                + [repr(float(r.scalar_rank)), repr(float(r.depth)), int(r.extrapolated)]
            )
