"""Exact discrete-discrete optimal transport with quadratic cost.

Three solvers share one result type:

* ``solve_assignment`` for the equal-size uniform case (optimal
  assignment via shortest augmenting paths),
* ``solve_discrete_ot`` for general weights (transportation linear
  program solved by dual simplex),
* ``brute_force_ot`` as an exhaustive oracle for tiny instances.

All dual potentials are kept in surplus form (values psi, psi_star with
psi(u) + psi*(y) >= u.y); see the potentials module for recovery and
normalization.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.optimize as spopt
import scipy.sparse as sp

from .errors import (
    DimensionMismatchError,
    InstanceTooLargeError,
    MaxItersExceededError,
    NonuniformWeightsError,
    NumericalFailureError,
    SizeMismatchError,
)
from .measures import DiscreteMeasure

__all__ = [
    "Coupling",
    "cost_matrix",
    "surplus_matrix",
    "solve_assignment",
    "solve_discrete_ot",
    "brute_force_ot",
]

# solve_assignment materializes the full n x n cost matrix; past this
# size that alone exceeds a sane memory budget
_MAX_ASSIGNMENT_SIZE = 12000


def cost_matrix(source_points: np.ndarray, target_points: np.ndarray) -> np.ndarray:
    """Squared Euclidean costs c[i][j] = |u_i - y_j|^2, clipped at zero."""
    u = np.asarray(source_points, dtype=float)
    y = np.asarray(target_points, dtype=float)
    if u.shape[1] != y.shape[1]:
        raise DimensionMismatchError(
            f"source dim {u.shape[1]} != target dim {y.shape[1]}"
        )
    sq_u = np.einsum("ij,ij->i", u, u)
    sq_y = np.einsum("ij,ij->i", y, y)
    c = sq_u[:, None] + sq_y[None, :] - 2.0 * (u @ y.T)
    np.maximum(c, 0.0, out=c)
    return c


def surplus_matrix(source_points: np.ndarray, target_points: np.ndarray) -> np.ndarray:
    """Inner-product surpluses w[i][j] = u_i . y_j."""
    u = np.asarray(source_points, dtype=float)
    y = np.asarray(target_points, dtype=float)
    if u.shape[1] != y.shape[1]:
        raise DimensionMismatchError(
            f"source dim {u.shape[1]} != target dim {y.shape[1]}"
        )
    return u @ y.T


@dataclass
class Coupling:
    """An optimal transport plan between two discrete measures.

    The plan is stored sparsely as parallel arrays (rows, cols, masses).
    ``objective`` is the total quadratic cost; ``dual_value`` is the
    matching value of the dual program in the same cost units, so strong
    duality reads |objective - dual_value| ~ 0.

    ``matching`` holds the permutation (target index per source atom)
    when the plan is one-to-one.  ``psi``/``psi_star`` hold surplus-form
    dual potentials when the solver produced them.
    """

    source: DiscreteMeasure
    target: DiscreteMeasure
    rows: np.ndarray
    cols: np.ndarray
    masses: np.ndarray
    objective: float
    dual_value: float
    matching: np.ndarray | None = None
    psi: np.ndarray | None = None
    psi_star: np.ndarray | None = None

    @property
    def support_size(self) -> int:
        return len(self.masses)

    def primal_surplus(self) -> float:
        """Plan value in surplus form: sum of mass * (u_i . y_j)."""
        u = self.source.points[self.rows]
        y = self.target.points[self.cols]
        return float(np.sum(self.masses * np.einsum("ij,ij->i", u, y)))

    def marginal_residual(self) -> float:
        """Largest deviation of the plan's marginals from the measure weights."""
        row_mass = np.zeros(self.source.size)
        col_mass = np.zeros(self.target.size)
        np.add.at(row_mass, self.rows, self.masses)
        np.add.at(col_mass, self.cols, self.masses)
        return float(
            max(
                np.abs(row_mass - self.source.weights).max(),
                np.abs(col_mass - self.target.weights).max(),
            )
        )


def _surplus_dual_to_cost_value(
    source: DiscreteMeasure, target: DiscreteMeasure, psi: np.ndarray, psi_star: np.ndarray
) -> float:
    """Convert a surplus-form dual value to quadratic-cost units.

    With alpha_i = |u_i|^2 - 2 psi_i and beta_j = |y_j|^2 - 2 psi*_j the
    cost-form dual objective is sum f alpha + sum p beta.
    """
    e_uu = float(np.dot(source.weights, np.einsum("ij,ij->i", source.points, source.points)))
    e_yy = float(np.dot(target.weights, np.einsum("ij,ij->i", target.points, target.points)))
    dual_surplus = float(np.dot(source.weights, psi) + np.dot(target.weights, psi_star))
    return e_uu + e_yy - 2.0 * dual_surplus


def solve_assignment(source: DiscreteMeasure, target: DiscreteMeasure) -> Coupling:
    """Optimal assignment between two uniform measures of equal size.

    Returns the permutation minimizing the mean squared distance, along
    with exact surplus-form dual potentials recovered from the matching.
    The underlying solver is deterministic, so reruns on identical input
    reproduce the same matching; among cost ties the tie is broken by
    the solver's fixed internal ordering.
    """
    if source.size != target.size:
        raise SizeMismatchError(
            f"assignment needs equal sizes, got {source.size} and {target.size}"
        )
    if not (source.is_uniform(rtol=1e-9) and target.is_uniform(rtol=1e-9)):
        raise NonuniformWeightsError(
            "assignment needs uniform weights on both sides; use solve_discrete_ot"
        )
    if source.size > _MAX_ASSIGNMENT_SIZE:
        raise InstanceTooLargeError(
            f"{source.size} atoms exceeds the assignment size cap {_MAX_ASSIGNMENT_SIZE}"
        )
    n = source.size
    c = cost_matrix(source.points, target.points)
    # scale to [0, 1] for solver conditioning; the optimal permutation is
    # scale-invariant and the objective is recomputed in original units
    max_c = c.max()
    if max_c > 0:
        c /= max_c
    _, sigma = spopt.linear_sum_assignment(c)
    del c
    diffs = source.points - target.points[sigma]
    objective = float(np.einsum("ij,ij->", diffs, diffs) / n)

    from .potentials import duals_from_matching

    psi, psi_star = duals_from_matching(source.points, target.points, sigma)
    dual_value = _surplus_dual_to_cost_value(source, target, psi, psi_star)
    return Coupling(
        source=source,
        target=target,
        rows=np.arange(n),
        cols=sigma.copy(),
        masses=np.full(n, 1.0 / n),
        objective=objective,
        dual_value=dual_value,
        matching=sigma,
        psi=psi,
        psi_star=psi_star,
    )


def solve_discrete_ot(source: DiscreteMeasure, target: DiscreteMeasure) -> Coupling:
    """Exact transportation LP between arbitrarily weighted measures.

    Solved with dual simplex, so the returned plan is an extreme point
    with at most n + m - 1 strictly positive entries, and exact dual
    potentials come out of the solve.
    """
    if source.dim != target.dim:
        raise DimensionMismatchError(
            f"source dim {source.dim} != target dim {target.dim}"
        )
    n, m = source.size, target.size
    c = cost_matrix(source.points, target.points)
    max_c = c.max()
    scale = max_c if max_c > 0 else 1.0

    # equality constraints: row sums = source weights, column sums = target weights
    row_idx = np.repeat(np.arange(n), m)
    col_idx = np.tile(np.arange(m), n)
    var_idx = np.arange(n * m)
    a_rows = sp.csr_matrix(
        (np.ones(n * m), (row_idx, var_idx)), shape=(n, n * m)
    )
    a_cols = sp.csr_matrix(
        (np.ones(n * m), (col_idx, var_idx)), shape=(m, n * m)
    )
    a_eq = sp.vstack([a_rows, a_cols], format="csr")
    b_eq = np.concatenate([source.weights, target.weights])

    maxiter = 50 * (n + m)
    res = spopt.linprog(
        (c / scale).ravel(),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs-ds",
        options={"maxiter": maxiter},
    )
    if res.status == 1:
        raise MaxItersExceededError(
            f"transportation LP hit the pivot budget {maxiter}",
            iterations=int(res.nit),
        )
    if not res.success:
        raise NumericalFailureError(
            f"transportation LP failed: {res.message}", status=int(res.status)
        )

    x = res.x.reshape(n, m)
    rows, cols = np.nonzero(x > 1e-14)
    masses = x[rows, cols]
    objective = float(np.sum(masses * c[rows, cols]))

    # HiGHS equality marginals are the transportation duals up to sign;
    # pick the orientation whose dual objective matches the primal
    marg = np.asarray(res.eqlin.marginals) * scale
    alpha, beta = marg[:n], marg[n:]
    dual_value = float(np.dot(source.weights, alpha) + np.dot(target.weights, beta))
    if abs(-dual_value - objective) < abs(dual_value - objective):
        alpha, beta, dual_value = -alpha, -beta, -dual_value

    psi = (np.einsum("ij,ij->i", source.points, source.points) - alpha) / 2.0
    psi_star = (np.einsum("ij,ij->i", target.points, target.points) - beta) / 2.0
    matching = None
    if n == m and len(masses) == n and np.array_equal(np.sort(cols), np.arange(m)):
        order = np.argsort(rows)
        matching = cols[order]
    return Coupling(
        source=source,
        target=target,
        rows=rows,
        cols=cols,
        masses=masses,
        objective=objective,
        dual_value=dual_value,
        matching=matching,
        psi=psi,
        psi_star=psi_star,
    )


def _forest_flow(n: int, m: int, edges: list, source_w: np.ndarray, target_w: np.ndarray):
    """Solve the unique flow on a spanning forest of the bipartite graph.

    Nodes 0..n-1 are sources, n..n+m-1 targets.  Returns the flow per
    edge or None when some flow is negative (not a feasible vertex).
    """
    supply = np.concatenate([source_w, -target_w])
    adj = {v: [] for v in range(n + m)}
    for e, (i, j) in enumerate(edges):
        adj[i].append((n + j, e))
        adj[n + j].append((i, e))
    flow = np.zeros(len(edges))
    seen = [False] * (n + m)
    for root in range(n + m):
        if seen[root]:
            continue
        # peel leaves of this tree component to fix flows bottom-up
        order = []
        stack = [(root, -1)]
        seen[root] = True
        parent_edge = {root: None}
        while stack:
            v, pe = stack.pop()
            order.append(v)
            for w, e in adj[v]:
                if e != pe and not seen[w]:
                    seen[w] = True
                    parent_edge[w] = e
                    stack.append((w, e))
        residual = supply.astype(float).copy()
        for v in reversed(order[1:]):
            e = parent_edge[v]
            i, j = edges[e]
            other = n + j if v == i else i
            flow[e] = residual[v] if v < n else -residual[v]
            residual[other] += residual[v]
            residual[v] = 0.0
        if abs(residual[root]) > 1e-12:
            return None  # component supplies do not balance
    if np.any(flow < -1e-15):
        return None
    return np.maximum(flow, 0.0)


def _forest_duals(n: int, m: int, edges: list, w: np.ndarray):
    """Surplus duals with psi_i + psi*_j = w[i][j] on forest edges."""
    psi = np.zeros(n)
    psi_star = np.zeros(m)
    adj = {v: [] for v in range(n + m)}
    for i, j in edges:
        adj[i].append(n + j)
        adj[n + j].append(i)
    seen = [False] * (n + m)
    for root in range(n + m):
        if seen[root]:
            continue
        seen[root] = True
        if root < n:
            psi[root] = 0.0
        else:
            psi_star[root - n] = 0.0
        stack = [root]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if seen[u]:
                    continue
                seen[u] = True
                if v < n:
                    psi_star[u - n] = w[v, u - n] - psi[v]
                else:
                    psi[u] = w[u, v - n] - psi_star[v - n]
                stack.append(u)
    return psi, psi_star


def brute_force_ot(source: DiscreteMeasure, target: DiscreteMeasure) -> Coupling:
    """Exhaustive-search oracle for tiny transport instances.

    Uniform equal-size inputs are solved by scanning every permutation
    (n <= 8).  General weights are solved by enumerating all spanning
    forests of the bipartite support graph (n + m <= 8), which visits
    every vertex of the transportation polytope.
    """
    if source.dim != target.dim:
        raise DimensionMismatchError(
            f"source dim {source.dim} != target dim {target.dim}"
        )
    n, m = source.size, target.size
    uniform_case = n == m and source.is_uniform() and target.is_uniform()
    if uniform_case:
        if n > 8:
            raise InstanceTooLargeError(f"permutation oracle capped at n=8, got {n}")
        return _brute_force_assignment(source, target)
    if n + m > 8:
        raise InstanceTooLargeError(f"vertex oracle capped at n+m=8, got {n + m}")
    return _brute_force_vertices(source, target)


def _brute_force_assignment(source: DiscreteMeasure, target: DiscreteMeasure) -> Coupling:
    n = source.size
    c = cost_matrix(source.points, target.points)
    best_sigma = None
    best_cost = np.inf
    idx = np.arange(n)
    for perm in itertools.permutations(range(n)):
        cost = c[idx, list(perm)].sum() / n
        if cost < best_cost:
            best_cost = cost
            best_sigma = np.asarray(perm)
    w = surplus_matrix(source.points, target.points)
    psi, psi_star = _exact_duals_small(w, best_sigma)
    dual_value = _surplus_dual_to_cost_value(source, target, psi, psi_star)
    return Coupling(
        source=source,
        target=target,
        rows=idx,
        cols=best_sigma,
        masses=np.full(n, 1.0 / n),
        objective=float(best_cost),
        dual_value=dual_value,
        matching=best_sigma,
        psi=psi,
        psi_star=psi_star,
    )


def _exact_duals_small(w: np.ndarray, sigma: np.ndarray):
    """Duals for a matched instance via all-pairs shortest paths.

    With h = -psi*, feasibility is the difference-constraint system
    h_j - h_k <= w[inv[k], k] - w[inv[k], j] (an edge k -> j), which has
    no negative cycles at an optimal matching.  Small enough here for
    Floyd-Warshall.
    """
    n = len(sigma)
    inv = np.empty(n, dtype=int)
    inv[sigma] = np.arange(n)
    matched = w[inv, np.arange(n)]
    dist = matched[:, None] - w[inv, :]  # dist[k][j] = edge weight k -> j
    for mid in range(n):
        dist = np.minimum(dist, dist[:, mid : mid + 1] + dist[mid : mid + 1, :])
    psi_star = -dist[0]  # shortest paths out of column 0
    psi = w[np.arange(n), sigma] - psi_star[sigma]
    return psi, psi_star


def _brute_force_vertices(source: DiscreteMeasure, target: DiscreteMeasure) -> Coupling:
    n, m = source.size, target.size
    c = cost_matrix(source.points, target.points)
    w = surplus_matrix(source.points, target.points)
    all_edges = [(i, j) for i in range(n) for j in range(m)]
    best = None
    best_cost = np.inf
    best_candidates = []
    for edge_set in itertools.combinations(all_edges, n + m - 1):
        if not _is_forest(n, m, edge_set):
            continue
        flow = _forest_flow(n, m, list(edge_set), source.weights, target.weights)
        if flow is None:
            continue
        cost = float(sum(f * c[i, j] for f, (i, j) in zip(flow, edge_set)))
        if cost < best_cost - 1e-15:
            best_cost = cost
            best_candidates = [(edge_set, flow)]
        elif cost <= best_cost + 1e-15:
            best_candidates.append((edge_set, flow))
    # among optimal bases pick one whose tree duals are globally feasible
    # (one must exist: simplex terminates at a primal and dual feasible basis)
    for edge_set, flow in best_candidates:
        psi, psi_star = _forest_duals(n, m, list(edge_set), w)
        if np.min(psi[:, None] + psi_star[None, :] - w) >= -1e-9:
            best = (edge_set, flow, psi, psi_star)
            break
    if best is None:
        raise NumericalFailureError("no optimal basis with feasible duals found")
    edge_set, flow, psi, psi_star = best
    keep = flow > 1e-15
    rows = np.asarray([i for (i, _) in edge_set])[keep]
    cols = np.asarray([j for (_, j) in edge_set])[keep]
    masses = np.asarray(flow)[keep]
    objective = float(np.sum(masses * c[rows, cols]))
    dual_value = _surplus_dual_to_cost_value(source, target, psi, psi_star)
    return Coupling(
        source=source,
        target=target,
        rows=rows,
        cols=cols,
        masses=masses,
        objective=objective,
        dual_value=dual_value,
        matching=None,
        psi=psi,
        psi_star=psi_star,
    )


def _is_forest(n: int, m: int, edges) -> bool:
    parent = list(range(n + m))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for i, j in edges:
        a, b = find(i), find(n + j)
        if a == b:
            return False
        parent[a] = b
    return True
