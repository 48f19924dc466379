"""Distances and convergence experiments for fitted transports.

These utilities quantify how fast the empirical quantile map and its
contours approach their population counterparts on compact bands inside
the reference ball, for synthetic families with closed-form maps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .depth import eval_quantile, fit_transport
from .errors import EmptySetError, InvalidTauError, NoOracleError, ParseError
from .measures import DiscreteMeasure, SyntheticFamily, make_reference_grid, make_reference_mc

__all__ = [
    "ConvergenceRun",
    "hausdorff",
    "probe_band_grid",
    "sup_error_on_band",
    "contour_hausdorff",
    "contour_hausdorff_curve",
    "reference_for_size",
    "run_convergence",
    "convergence_to_csv",
]


def hausdorff(a, b) -> float:
    """Hausdorff distance between two finite point sets.

    max( sup_{x in A} inf_{y in B} |x - y|, sup_{y in B} inf_{x in A} |x - y| ).
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptySetError("hausdorff needs two non-empty point sets")
    d = cdist(a, b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def _check_band(band) -> tuple[float, float]:
    try:
        r_lo, r_hi = float(band[0]), float(band[1])
    except (TypeError, ValueError, IndexError):
        raise ParseError(f"band must be a pair (r_lo, r_hi), got {band!r}") from None
    if not (0.0 < r_lo < r_hi < 1.0):
        raise ParseError(
            f"band must satisfy 0 < r_lo < r_hi < 1 (compact inside the open ball), got {band}"
        )
    return r_lo, r_hi


def probe_band_grid(band, count: int, dim: int = 2) -> np.ndarray:
    """Deterministic probe points in the annulus r_lo <= |u| <= r_hi.

    d=1 uses two symmetric segments, d=2 interleaved polar rings, d>=3 a
    fixed-seed direction set crossed with evenly spaced radii.
    """
    r_lo, r_hi = _check_band(band)
    if count < 1:
        raise ParseError("probe count must be positive")
    if dim == 1:
        half = (count + 1) // 2
        right = np.linspace(r_lo, r_hi, half)
        left = -np.linspace(r_lo, r_hi, count - half) if count > half else np.empty(0)
        return np.concatenate([left, right]).reshape(-1, 1)
    if dim == 2:
        rings = max(1, int(round(np.sqrt(count / 6.0))))
        radii = np.linspace(r_lo, r_hi, rings)
        base = count // rings
        extra = count % rings
        pts = []
        for j, r in enumerate(radii):
            spokes = base + (1 if j < extra else 0)
            if spokes == 0:
                continue
            ang = 2.0 * np.pi * np.arange(spokes) / spokes + np.pi * j / max(spokes, 1)
            pts.append(np.column_stack([r * np.cos(ang), r * np.sin(ang)]))
        return np.concatenate(pts)
    rng = np.random.default_rng(2718281828)
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = np.linspace(r_lo, r_hi, count)
    return g * radii[:, None]


def sup_error_on_band(fit, oracle_map, band, probe_count: int = 400) -> float:
    """Worst-case quantile error sup_K |Q_hat(u) - Q(u)| on a probe grid.

    ``oracle_map`` is either a SyntheticFamily with a closed-form
    quantile map or a callable mapping reference points to targets.
    """
    if isinstance(oracle_map, SyntheticFamily):
        if not oracle_map.has_oracle:
            raise NoOracleError(f"family {oracle_map.kind!r} has no closed-form maps")
        oracle = oracle_map.quantile
    elif callable(oracle_map):
        oracle = oracle_map
    else:
        raise ParseError("oracle_map must be a SyntheticFamily or a callable")
    probes = probe_band_grid(band, probe_count, fit.ref.dim)
    predicted = np.atleast_2d(eval_quantile(fit, probes))
    truth = np.atleast_2d(oracle(probes))
    return float(np.linalg.norm(predicted - truth, axis=1).max())


def contour_hausdorff(
    fit, family: SyntheticFamily, tau: float, spokes: int = 256, oracle_samples: int = 720
) -> float:
    """Hausdorff distance between an empirical contour and the true one."""
    from .depth import quantile_contour

    empirical = quantile_contour(fit, tau, spokes=spokes)
    dim = fit.ref.dim
    if not family.has_oracle:
        raise NoOracleError(f"family {family.kind!r} has no closed-form maps")
    if dim == 2:
        ang = 2.0 * np.pi * np.arange(oracle_samples) / oracle_samples
        dirs = tau * np.column_stack([np.cos(ang), np.sin(ang)])
    elif dim == 1:
        dirs = np.array([[-tau], [tau]])
    else:
        rng = np.random.default_rng(31415926)
        g = rng.standard_normal((oracle_samples, dim))
        dirs = tau * g / np.linalg.norm(g, axis=1, keepdims=True)
    truth = np.atleast_2d(family.quantile(dirs))
    return hausdorff(empirical, truth)


def contour_hausdorff_curve(
    fit_series,
    tau_list,
    family: SyntheticFamily,
    tau_band=(0.1, 0.9),
    spokes: int = 256,
) -> list[dict]:
    """Contour-convergence table over a series of fits and tau values.

    ``fit_series`` is an iterable of fitted transports (typically one
    per sample size); tau values must stay inside ``tau_band``, a band
    bounded away from 0 and 1 where contour convergence holds.
    """
    lo, hi = float(tau_band[0]), float(tau_band[1])
    taus = [float(t) for t in tau_list]
    for t in taus:
        if not (lo <= t <= hi):
            raise InvalidTauError(
                f"tau={t} outside the allowed band [{lo}, {hi}]"
            )
    rows = []
    for fit in fit_series:
        for t in taus:
            rows.append(
                {
                    "n": fit.target.size,
                    "tau": t,
                    "hausdorff": contour_hausdorff(fit, family, t, spokes=spokes),
                }
            )
    return rows


@dataclass
class ConvergenceRun:
    """Per-(size, seed) error statistics for one synthetic family."""

    family: SyntheticFamily
    sizes: list[int]
    seeds: list[int]
    band: tuple[float, float]
    taus: list[float] = field(default_factory=lambda: [0.5])
    probe_count: int = 400
    rows: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self.band = _check_band(self.band)

    def median_sup_error(self, n: int) -> float:
        vals = [r["sup_error"] for r in self.rows if r["n"] == n]
        if not vals:
            raise EmptySetError(f"no rows for n={n}")
        return float(np.median(vals))


def reference_for_size(n: int, dim: int = 2, seed: int = 9999) -> DiscreteMeasure:
    """A reference discretization with exactly n atoms.

    In dimension two, uses the deterministic ring grid when n factors
    into a balanced (rings, spokes) pair, otherwise falls back to a
    fixed-seed Monte-Carlo reference.  Other dimensions always use the
    Monte-Carlo reference.
    """
    if dim == 2 and n >= 4:
        target_rings = max(1, int(round(np.sqrt(n / 2.0))))
        best = None
        for r in range(1, n + 1):
            if n % r:
                continue
            s = n // r
            if s < r or s > 16 * r:
                continue
            score = abs(r - target_rings)
            if best is None or score < best[0]:
                best = (score, r, s)
        if best is not None:
            return make_reference_grid(best[1], best[2]).measure
    return make_reference_mc(n, dim, seed=seed + n)


def run_convergence(
    family: SyntheticFamily,
    sizes,
    seeds,
    band,
    taus=(0.5,),
    probe_count: int = 400,
    spokes: int = 256,
) -> ConvergenceRun:
    """Fit the family at each (size, seed) and record sup and contour errors."""
    run = ConvergenceRun(
        family=family,
        sizes=[int(n) for n in sizes],
        seeds=[int(s) for s in seeds],
        band=band,
        taus=[float(t) for t in taus],
        probe_count=probe_count,
    )
    if not family.has_oracle:
        raise NoOracleError(f"family {family.kind!r} has no closed-form maps")
    for n in run.sizes:
        reference = reference_for_size(n, family.dim)
        for seed in run.seeds:
            data = family.sample(n, seed)
            fit = fit_transport(data, reference, mode="assignment")
            sup = sup_error_on_band(fit, family, run.band, probe_count)
            for t in run.taus:
                hd = contour_hausdorff(fit, family, t, spokes=spokes)
                run.rows.append(
                    {
                        "family": family.kind,
                        "n": n,
                        "seed": seed,
                        "tau": t,
                        "sup_error": sup,
                        "hausdorff": hd,
                    }
                )
    return run


def convergence_to_csv(run: ConvergenceRun, path) -> None:
    """Write the results table; probe density is recorded in the header."""
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# band={run.band[0]!r},{run.band[1]!r} probes={run.probe_count}\n"
        )
        fh.write("# family,n,seed,tau,sup_error,hausdorff\n")
        writer = csv.writer(fh)
        for r in run.rows:
            writer.writerow(
                [
                    r["family"],
                    r["n"],
                    r["seed"],
                    repr(float(r["tau"])),
                    repr(float(r["sup_error"])),
                    repr(float(r["hausdorff"])),
                ]
            )
