"""Semi-discrete optimal transport on a quadrature of the reference.

Finds weights v such that the max-affine potential
psi(u) = max_k (u . y_k - v_k) partitions the reference domain into
power-diagram cells whose masses match the target weights p_k.  The
weights minimize the convex objective

    F(v) = integral of max_k (u . y_k - v_k) dF + sum_k p_k v_k,

whose subgradient in v_k is p_k - (mass of cell k).  With the reference
given by a finite quadrature the objective is piecewise linear, so the
solver uses subgradient steps with a Polyak-style length plus a periodic
exact line search along the descent direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyCellError,
    MaxItersExceededError,
    ParseError,
    SizeMismatchError,
)
from .measures import DiscreteMeasure, measure_from_json, measure_to_json

__all__ = [
    "SemiDiscreteSolution",
    "assign_cells",
    "sd_objective",
    "solve_semidiscrete",
    "solution_to_json",
    "solution_from_json",
]


@dataclass
class SemiDiscreteSolution:
    """Converged weights and the induced cell decomposition."""

    targets: DiscreteMeasure
    quadrature: DiscreteMeasure
    v: np.ndarray
    cell_masses: np.ndarray
    objective: float
    residual: float
    iterations: int

    def psi_on_quadrature(self) -> np.ndarray:
        """Values of the max-affine potential on the quadrature atoms."""
        s = self.quadrature.points @ self.targets.points.T - self.v[None, :]
        return np.max(s, axis=1)


def assign_cells(v: np.ndarray, quadrature: DiscreteMeasure, targets: DiscreteMeasure):
    """Power-diagram cell of each quadrature atom, and the cell masses.

    Atom u belongs to cell argmax_k (u . y_k - v_k), lowest index on
    ties.
    """
    v = np.asarray(v, dtype=float)
    if len(v) != targets.size:
        raise SizeMismatchError(f"{targets.size} targets but {len(v)} weights")
    s = quadrature.points @ targets.points.T - v[None, :]
    idx = np.argmax(s, axis=1)
    masses = np.bincount(idx, weights=quadrature.weights, minlength=targets.size)
    return idx, masses


def sd_objective(v: np.ndarray, quadrature: DiscreteMeasure, targets: DiscreteMeasure) -> float:
    """The convex objective F(v) evaluated on the quadrature."""
    v = np.asarray(v, dtype=float)
    s = quadrature.points @ targets.points.T - v[None, :]
    return float(
        np.dot(quadrature.weights, np.max(s, axis=1)) + np.dot(targets.weights, v)
    )


def _line_search(surplus, q_w, p, v, direction, t_hi):
    """Exact-ish minimization of the convex t -> F(v + t*direction).

    Expands the bracket until the function turns upward, then ternary
    search; cheap because one evaluation is a single (N, K) pass.
    """

    def f(t):
        vv = v + t * direction
        return float(np.dot(q_w, np.max(surplus - vv[None, :], axis=1)) + np.dot(p, vv))

    lo, hi = 0.0, max(t_hi, 1e-12)
    f_hi = f(hi)
    for _ in range(40):
        f_2hi = f(2.0 * hi)
        if f_2hi >= f_hi:
            break
        hi *= 2.0
        f_hi = f_2hi
    else:
        return hi  # descent direction looks unbounded; let the caller iterate
    hi *= 2.0
    for _ in range(60):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) <= f(m2):
            hi = m2
        else:
            lo = m1
    return (lo + hi) / 2.0


def solve_semidiscrete(
    targets: DiscreteMeasure,
    quadrature: DiscreteMeasure,
    tol_mass: float = 1e-6,
    max_iters: int = 5000,
) -> SemiDiscreteSolution:
    """Minimize F(v) until every cell mass matches its target weight.

    The stopping rule is max_k |cell_mass_k - p_k| <= tol_mass, with
    tol_mass floored at one quadrature atom's weight (a finite
    quadrature cannot resolve masses more finely).  v[0] is pinned to 0;
    the objective is invariant under adding a constant to all v_k.
    """
    if targets.dim != quadrature.dim:
        raise SizeMismatchError(
            f"targets dim {targets.dim} != quadrature dim {quadrature.dim}"
        )
    if quadrature.size < targets.size:
        raise SizeMismatchError(
            f"quadrature has {quadrature.size} atoms, fewer than {targets.size} targets"
        )
    if tol_mass <= 0:
        raise ParseError("tol_mass must be positive")
    k_targets = targets.size
    p = targets.weights
    q_w = quadrature.weights
    tol = max(tol_mass, 1.0 / quadrature.size)
    surplus = quadrature.points @ targets.points.T  # (N, K), reused every iteration

    def masses_of(v):
        idx = np.argmax(surplus - v[None, :], axis=1)
        return idx, np.bincount(idx, weights=q_w, minlength=k_targets)

    def objective_of(v):
        return float(
            np.dot(q_w, np.max(surplus - v[None, :], axis=1)) + np.dot(p, v)
        )

    scale = max(float(np.abs(surplus).max()), 1e-12)
    eps = 1e-9 * scale

    def rescue(v):
        """Hand every empty positive-mass cell one atom, never draining a donor.

        Sequential minimal captures: cell k takes the atom it can reach
        with the smallest decrease of v_k among atoms whose current
        owner keeps at least one other atom.
        """
        idx, masses = masses_of(v)
        counts = np.bincount(idx, minlength=k_targets)
        winner = np.max(surplus - v[None, :], axis=1)
        for k in np.flatnonzero((masses == 0.0) & (p > 0.0)):
            slack = surplus[:, k] - v[k] - winner
            slack[counts[idx] <= 1] = -np.inf  # protect single-atom cells
            j = int(np.argmax(slack))
            if not np.isfinite(slack[j]):
                return None  # nothing capturable without draining a donor
            v[k] += slack[j] - eps
            # bookkeeping for subsequent cells in this pass
            col = surplus[:, k] - v[k]
            moved = col > winner
            counts[k] += int(np.sum(moved))
            counts_dec = np.bincount(idx[moved], minlength=k_targets)
            counts -= counts_dec
            idx[moved] = k
            winner[moved] = col[moved]
        return v

    line_every = 1 if k_targets <= 64 else 5
    v = np.zeros(k_targets)
    best_v = v.copy()
    best_res = np.inf
    f_best = np.inf

    it = 0
    while it < max_iters:
        it += 1
        idx, masses = masses_of(v)

        if np.any((masses == 0.0) & (p > 0.0)):
            # a rescue consumes an iteration, so a rescue/step ping-pong
            # that makes no progress ends as max-iters with the best
            # iterate attached rather than spinning forever
            rescued = rescue(v)
            if rescued is None:
                raise EmptyCellError(
                    "cells with positive target mass cannot capture any atom",
                    empty_cells=[int(k) for k in np.flatnonzero(masses == 0.0)],
                )
            v = rescued
            continue

        g = p - masses
        res = float(np.abs(g).max())
        if res < best_res:
            best_res = res
            best_v = v.copy()
        if res <= tol:
            return _finish(targets, quadrature, v, it)

        f_now = objective_of(v)
        f_best = min(f_best, f_now)
        g_norm2 = float(g @ g)
        # Polyak-style step toward the best value seen, with a vanishing margin
        margin = 0.1 * scale * res / np.sqrt(it)
        step = (f_now - (f_best - margin)) / g_norm2
        if it % line_every == 0:
            step = _line_search(surplus, q_w, p, v, -g, step)
        v = v - step * g

    idx, masses = masses_of(best_v)
    raise MaxItersExceededError(
        f"no convergence in {max_iters} iterations; best residual {best_res:.3g} > tol {tol:.3g}",
        residual=best_res,
        iterations=max_iters,
        best_v=[float(x) for x in best_v],
    )


def _finish(targets, quadrature, v, iterations) -> SemiDiscreteSolution:
    v = v - v[0]
    _, masses = assign_cells(v, quadrature, targets)
    residual = float(np.abs(masses - targets.weights).max())
    return SemiDiscreteSolution(
        targets=targets,
        quadrature=quadrature,
        v=v,
        cell_masses=masses,
        objective=sd_objective(v, quadrature, targets),
        residual=residual,
        iterations=iterations,
    )


def solution_to_json(sol: SemiDiscreteSolution) -> dict:
    return {
        "targets": measure_to_json(sol.targets),
        "quadrature": measure_to_json(sol.quadrature),
        "v": [float(x) for x in sol.v],
        "cell_masses": [float(x) for x in sol.cell_masses],
        "objective": float(sol.objective),
        "residual": float(sol.residual),
        "iterations": int(sol.iterations),
    }


def solution_from_json(obj: dict) -> SemiDiscreteSolution:
    try:
        return SemiDiscreteSolution(
            targets=measure_from_json(obj["targets"]),
            quadrature=measure_from_json(obj["quadrature"]),
            v=np.asarray(obj["v"], dtype=float),
            cell_masses=np.asarray(obj["cell_masses"], dtype=float),
            objective=float(obj["objective"]),
            residual=float(obj["residual"]),
            iterations=int(obj["iterations"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed semidiscrete solution: {exc}") from None
