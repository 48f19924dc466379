"""Recovery, normalization and conjugation of dual transport potentials.

A potential pair (psi on the reference support, psi_star on the target
support) is kept in surplus form: feasibility means
psi(u) + psi*(y) >= u.y for every pair of atoms, with equality on the
support of an optimal plan.  The pair is pinned by psi[base_index] = 0.

Recovery from an optimal plan works on the difference-constraint system
implied by complementary slackness.  Writing h = -psi*, every support
pair (i, k) imposes h_j - h_k <= u_i . (y_k - y_j) for all columns j,
i.e. an edge k -> j in a shortest-path problem that has no negative
cycle exactly because the plan is cyclically monotone.  The solver
relaxes a sparse candidate edge set to a fixed point, then verifies
feasibility against all pairs and adds violated constraints until the
check passes (constraint generation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DisconnectedSlacknessGraphError,
    EmptySupportError,
    NumericalFailureError,
    ParseError,
)
from .measures import DiscreteMeasure

__all__ = [
    "PotentialPair",
    "recover_potentials",
    "conjugate",
    "centered_duals_from_plan",
    "duals_from_matching",
    "duals_from_plan",
    "dual_value",
    "feasibility_residual",
    "slackness_residual",
    "pair_to_json",
    "pair_from_json",
]

_FEAS_TOL = 1e-9
_ADD_TOL = 1e-12


@dataclass
class PotentialPair:
    """Normalized dual potentials on the two supports.

    psi lives on the reference atoms, psi_star on the target atoms,
    and psi[base_index] == 0.
    """

    ref: DiscreteMeasure
    target: DiscreteMeasure
    psi: np.ndarray
    psi_star: np.ndarray
    base_index: int


def _minplus_fixpoint(n_nodes, edge_from, edge_to, edge_w, h, max_passes=20000):
    """Relax h[to] <= h[from] + w over an edge list until nothing moves.

    Vectorized Bellman-Ford sweep: edges are grouped by target node so a
    whole pass is one reduceat.  Tolerates the exactly-zero cycles that
    optimal matchings produce (float noise cannot loop forever because
    the pass cap bounds the work and the caller re-checks feasibility).
    """
    if len(edge_to) == 0:
        return h, 0
    order = np.argsort(edge_to, kind="stable")
    ef, et, ew = edge_from[order], edge_to[order], edge_w[order]
    heads = np.searchsorted(et, np.arange(n_nodes))
    bounds = np.append(heads, len(et))
    empty = bounds[:-1] == bounds[1:]
    safe_heads = np.minimum(heads, len(et) - 1)
    passes = 0
    for passes in range(1, max_passes + 1):
        cand = np.minimum.reduceat(h[ef] + ew, safe_heads)
        cand[empty] = np.inf
        h2 = np.minimum(h, cand)
        if np.array_equal(h2, h):
            break
        h = h2
    return h, passes


def _feasibility_sweep(U, Y, psi, psi_star, block=2048):
    """Worst violation per column of psi_i + psi*_j >= u_i.y_j.

    Returns (gap, argmax_row) where gap[j] = max_i (u_i.y_j - psi_i) - psi*_j;
    positive entries are infeasible columns.
    """
    n = len(U)
    m = len(Y)
    best = np.full(m, -np.inf)
    best_row = np.zeros(m, dtype=np.intp)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        s = U[lo:hi] @ Y.T
        s -= psi[lo:hi, None]
        idx = np.argmax(s, axis=0)
        vals = s[idx, np.arange(m)]
        upd = vals > best
        best[upd] = vals[upd]
        best_row[upd] = idx[upd] + lo
    return best - psi_star, best_row


def duals_from_plan(
    U: np.ndarray,
    Y: np.ndarray,
    rows: np.ndarray,
    cols: np.ndarray,
    knn: int = 24,
    max_rounds: int = 120,
):
    """Exact surplus duals from the support of an optimal plan.

    Parameters
    ----------
    U, Y : ndarray
        Reference and target atom coordinates.
    rows, cols : ndarray
        Support pairs (i, k) of the optimal plan; every row index must
        appear at least once.
    knn : int
        Number of nearest-neighbor candidate edges per support column.
    max_rounds : int
        Constraint-generation rounds before giving up.

    Returns
    -------
    psi, psi_star : ndarray
        Feasible duals with exact complementary slackness on the
        supplied support pairs (before any normalization).
    """
    n, m = len(U), len(Y)
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    row_seen = np.zeros(n, dtype=bool)
    row_seen[rows] = True
    if not row_seen.all():
        raise NumericalFailureError("plan support misses some source atoms")
    # one representative support column per row, for slackness and edge growth
    rep_col = np.full(n, -1, dtype=np.intp)
    rep_col[rows[::-1]] = cols[::-1]  # keep the first occurrence

    su = U[rows]  # u_i per support pair
    sy = Y[cols]  # y_k per support pair

    # candidate edges k -> j from each support pair to nearby columns
    k_eff = min(knn, m)
    neigh = cKDTree(Y).query(sy, k=k_eff)[1]
    if k_eff == 1:
        neigh = neigh.reshape(-1, 1)
    ef = np.repeat(cols, k_eff)
    et = neigh.ravel()
    # weight of edge k -> j is u_i.(y_k - y_j)
    ew = np.einsum(
        "ij,ij->i", np.repeat(su, k_eff, axis=0), np.repeat(sy, k_eff, axis=0) - Y[et]
    )

    # equality closure between columns sharing a row: chain consecutive
    # support pairs of the same row in both directions
    order = np.argsort(rows, kind="stable")
    r_s, c_s = rows[order], cols[order]
    same = r_s[1:] == r_s[:-1]
    if np.any(same):
        a, b = c_s[:-1][same], c_s[1:][same]
        ui = U[r_s[1:][same]]
        w_ab = np.einsum("ij,ij->i", ui, Y[a] - Y[b])
        ef = np.concatenate([ef, a, b])
        et = np.concatenate([et, b, a])
        ew = np.concatenate([ew, w_ab, -w_ab])

    # fan-out from one source column keeps every node reachable
    src = int(cols[0])
    src_u = U[rows[0]]
    all_j = np.arange(m)
    ef = np.concatenate([ef, np.full(m, src)])
    et = np.concatenate([et, all_j])
    ew = np.concatenate([ew, np.einsum("j,ij->i", src_u, Y[src][None, :] - Y)])

    h = np.full(m, np.inf)
    h[src] = 0.0
    for _ in range(max_rounds):
        h, _passes = _minplus_fixpoint(m, ef, et, ew, h)
        psi_star = -h
        psi = np.einsum("ij,ij->i", U, Y[rep_col]) - psi_star[rep_col]
        gap, gap_row = _feasibility_sweep(U, Y, psi, psi_star)
        bad = np.flatnonzero(gap > _ADD_TOL)
        if len(bad) == 0:
            return psi, psi_star
        # add the violated constraints as new edges k(i*) -> j
        bi = gap_row[bad]
        bk = rep_col[bi]
        ef = np.concatenate([ef, bk])
        et = np.concatenate([et, bad])
        ew = np.concatenate([ew, np.einsum("ij,ij->i", U[bi], Y[bk] - Y[bad])])
    raise NumericalFailureError(
        "dual recovery did not reach feasibility",
        worst_violation=float(gap.max()),
    )


def centered_duals_from_plan(U: np.ndarray, Y: np.ndarray, rows, cols, **kw):
    """Average of the two one-sided dual reconstructions.

    ``duals_from_plan`` pins the target-side potential at its shortest-path
    extreme; the mirrored call pins the source side.  Both pairs are
    optimal, so their average (after aligning the free additive constant)
    is optimal too, and its argmax crossings sit midway between
    neighboring atoms instead of on them.  In dimension one that is the
    classical quantile-function convention.
    """
    psi_a, star_a = duals_from_plan(U, Y, rows, cols, **kw)
    star_b, psi_b = duals_from_plan(Y, U, cols, rows, **kw)
    shift = psi_b[0] - psi_a[0]
    return (psi_a + psi_b - shift) / 2.0, (star_a + star_b + shift) / 2.0


def duals_from_matching(U: np.ndarray, Y: np.ndarray, matching: np.ndarray, **kw):
    """Surplus duals for a one-to-one optimal matching."""
    n = len(U)
    return centered_duals_from_plan(U, Y, np.arange(n), np.asarray(matching), **kw)


def feasibility_residual(U, Y, psi, psi_star) -> float:
    """Most negative slack of psi_i + psi*_j - u_i.y_j (>= -1e-9 when feasible)."""
    gap, _ = _feasibility_sweep(np.asarray(U, float), np.asarray(Y, float), psi, psi_star)
    return float(-gap.max())


def slackness_residual(U, Y, rows, cols, psi, psi_star) -> float:
    """Largest |psi_i + psi*_j - u_i.y_j| over the plan support."""
    u = np.asarray(U, float)[rows]
    y = np.asarray(Y, float)[cols]
    s = np.einsum("ij,ij->i", u, y)
    return float(np.abs(psi[rows] + psi_star[cols] - s).max()) if len(s) else 0.0


def dual_value(pair_or_psi, psi_star=None, ref_weights=None, target_weights=None) -> float:
    """Surplus-form dual objective: integral of psi dF + integral of psi* dP."""
    if isinstance(pair_or_psi, PotentialPair):
        p = pair_or_psi
        return float(
            np.dot(p.ref.weights, p.psi) + np.dot(p.target.weights, p.psi_star)
        )
    return float(np.dot(ref_weights, pair_or_psi) + np.dot(target_weights, psi_star))


def default_base_index(ref: DiscreteMeasure) -> int:
    """The reference atom closest to the origin (lowest index on ties)."""
    return int(np.argmin(np.einsum("ij,ij->i", ref.points, ref.points)))


def recover_potentials(coupling, base_index: int | None = None) -> PotentialPair:
    """Normalized potential pair for an optimal coupling.

    Uses the duals attached by the solver when they verify; otherwise
    reconstructs them by shortest paths on the complementary-slackness
    graph of the plan.  The result is shifted so psi[base_index] = 0,
    with psi_star compensated by the opposite shift.
    """
    ref: DiscreteMeasure = coupling.source
    target: DiscreteMeasure = coupling.target
    if base_index is None:
        base_index = default_base_index(ref)
    if not 0 <= base_index < ref.size:
        raise ParseError(f"base_index {base_index} out of range [0, {ref.size})")

    candidates = []
    if coupling.psi is not None and coupling.psi_star is not None:
        candidates.append((coupling.psi, coupling.psi_star))

    psi = psi_star = None
    for cand_psi, cand_star in candidates:
        feas = feasibility_residual(ref.points, target.points, cand_psi, cand_star)
        slack = slackness_residual(
            ref.points, target.points, coupling.rows, coupling.cols, cand_psi, cand_star
        )
        if feas >= -_FEAS_TOL and slack <= _FEAS_TOL:
            psi, psi_star = cand_psi, cand_star
            break
    if psi is None:
        try:
            psi, psi_star = centered_duals_from_plan(
                ref.points, target.points, coupling.rows, coupling.cols
            )
        except NumericalFailureError:
            try:
                psi, psi_star = duals_from_plan(
                    ref.points, target.points, coupling.rows, coupling.cols
                )
            except NumericalFailureError as exc:
                if candidates:
                    # keep the solver duals rather than fail outright
                    psi, psi_star = candidates[0]
                else:
                    raise DisconnectedSlacknessGraphError(
                        "cannot reconstruct duals from the plan support"
                    ) from exc

    shift = psi[base_index]
    return PotentialPair(
        ref=ref,
        target=target,
        psi=psi - shift,
        psi_star=psi_star + shift,
        base_index=base_index,
    )


def conjugate(support_points, values, query_points, block: int = 4096):
    """Discrete Legendre transform of a potential sampled on atoms.

    For each query y returns max_u (u.y - psi(u)) over the support atoms
    together with the argmax index (lowest index on exact ties).
    """
    pts = np.asarray(support_points, dtype=float)
    vals = np.asarray(values, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise EmptySupportError("conjugate needs a non-empty support")
    if not np.all(np.isfinite(vals)):
        raise ParseError("potential values must be finite")
    q = np.atleast_2d(np.asarray(query_points, dtype=float))
    out_v = np.empty(len(q))
    out_i = np.empty(len(q), dtype=np.intp)
    for lo in range(0, len(q), block):
        hi = min(lo + block, len(q))
        s = q[lo:hi] @ pts.T
        s -= vals[None, :]
        idx = np.argmax(s, axis=1)
        out_i[lo:hi] = idx
        out_v[lo:hi] = s[np.arange(hi - lo), idx]
    return out_v, out_i


def pair_to_json(pair: PotentialPair) -> dict:
    return {
        "psi": [float(v) for v in pair.psi],
        "psi_star": [float(v) for v in pair.psi_star],
        "base_index": int(pair.base_index),
    }


def pair_from_json(obj: dict, ref: DiscreteMeasure, target: DiscreteMeasure) -> PotentialPair:
    try:
        psi = np.asarray(obj["psi"], dtype=float)
        psi_star = np.asarray(obj["psi_star"], dtype=float)
        base_index = int(obj["base_index"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed potential pair: {exc}") from None
    if len(psi) != ref.size or len(psi_star) != target.size:
        raise ParseError(
            f"potential lengths ({len(psi)}, {len(psi_star)}) do not match "
            f"supports ({ref.size}, {target.size})"
        )
    return PotentialPair(ref=ref, target=target, psi=psi, psi_star=psi_star, base_index=base_index)
