"""Learning a graph Laplacian from one spatio-temporal observation.

The Laplacian is parameterized by non-negative edge weights,
L(w) = sum_e w_e (delta_i - delta_j)(delta_i - delta_j)^T, which makes
symmetry, the zero row sum, and the off-diagonal sign constraint
structural. The smoothness-plus-Frobenius objective then reduces to a
small quadratic program over a scaled simplex,

    minimize   w . d + beta * w^T Q w
    subject to w >= 0,  sum_e w_e = trace_target / 2,

with d_e the squared distance between the endpoint signals and
Q = B^T B + 2 I for the unsigned incidence matrix B (the expansion of
||L(w)||_F^2 = sum_i (sum_{e ni i} w_e)^2 + 2 sum_e w_e^2). Solved by
projected gradient with an exact sort-and-threshold simplex projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .graphs import Graph, Laplacian, laplacian_from_adjacency
from .linalg import spectral_radius_symmetric

__all__ = [
    "COMPLETE",
    "RegressionProblem",
    "RegressionSolution",
    "CommonGraphStats",
    "EdgeStrength",
    "build_problem",
    "solve",
    "solution_to_laplacian",
    "aggregate_common",
    "classify_by_quantiles",
    "project_simplex",
]

# Sentinel template: all vertex pairs are admissible.
COMPLETE = "complete"

WEIGHT_CLAMP = 1e-12


@dataclass
class RegressionProblem:
    """One observation of the graph-learning problem.

    ``num_vertices`` is the spatio-temporal frame size (three stacked
    skeleton frames); ``trace_target`` equals it, pinning the overall
    edge-weight scale.
    """

    num_vertices: int
    candidate_edges: list[tuple[int, int]]
    distances: np.ndarray
    beta: float
    trace_target: float

    def __post_init__(self):
        if not self.candidate_edges:
            raise ConfigError("candidate edge set is empty")
        seen = set()
        for (i, j) in self.candidate_edges:
            if not (0 <= i < j < self.num_vertices):
                raise ConfigError(f"candidate edge ({i}, {j}) violates 0 <= i < j < n")
            if (i, j) in seen:
                raise ConfigError(f"duplicate candidate edge ({i}, {j})")
            seen.add((i, j))
        self.distances = np.asarray(self.distances, dtype=np.float64)
        if self.distances.shape != (len(self.candidate_edges),):
            raise ConfigError("distances must align with candidate edges")
        if np.any(self.distances < 0) or not np.all(np.isfinite(self.distances)):
            raise ConfigError("distances must be finite and non-negative")
        if self.beta < 0:
            raise ConfigError("beta must be >= 0")

    def incidence(self) -> np.ndarray:
        """Unsigned incidence matrix B (vertices x edges)."""
        b = np.zeros((self.num_vertices, len(self.candidate_edges)))
        for e, (i, j) in enumerate(self.candidate_edges):
            b[i, e] = 1.0
            b[j, e] = 1.0
        return b

    def objective(self, w: np.ndarray) -> float:
        bw = self.incidence() @ w
        return float(w @ self.distances + self.beta * (bw @ bw + 2.0 * (w @ w)))


@dataclass
class RegressionSolution:
    weights: np.ndarray
    objective: float
    iterations: int
    converged: bool


@dataclass
class CommonGraphStats:
    """Per-edge statistics of the solutions for multiple observations."""

    mean_weights: np.ndarray
    observation_count: int
    strong_quantile: float
    weak_quantile: float


class EdgeStrength:
    """Edge classification after aggregation (kind-agnostic)."""

    STRONG = "strong"
    WEAK = "weak"
    PRUNED = "pruned"


def build_problem(frame, template, beta: float) -> RegressionProblem:
    """Set up the regression problem for one spatio-temporal frame.

    ``frame`` is anything with a ``coordinates`` attribute (rows are
    vertices, columns are channels) or a coordinate array itself.
    ``template`` is a list of candidate edges or COMPLETE.
    """
    coords = np.asarray(getattr(frame, "coordinates", frame), dtype=np.float64)
    if coords.ndim != 2:
        raise ConfigError(f"frame coordinates must be 2-D, got shape {coords.shape}")
    if not np.all(np.isfinite(coords)):
        raise ConfigError("frame coordinates contain non-finite values")
    n = coords.shape[0]
    if template == COMPLETE:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    else:
        edges = [(int(i), int(j)) for (i, j) in template]
    if not edges:
        raise ConfigError("candidate edge set is empty")
    diffs = np.array([coords[i] - coords[j] for (i, j) in edges])
    distances = np.sum(diffs * diffs, axis=1)
    return RegressionProblem(
        num_vertices=n,
        candidate_edges=edges,
        distances=distances,
        beta=float(beta),
        trace_target=float(n),
    )


def project_simplex(v: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = total}.

    Sort-and-threshold: O(E log E), deterministic.
    """
    if total <= 0:
        raise ConfigError("simplex total must be positive")
    u = np.sort(v)[::-1]
    cumulative = (np.cumsum(u) - total) / np.arange(1, v.shape[0] + 1)
    k = np.nonzero(u > cumulative)[0][-1]
    return np.maximum(v - cumulative[k], 0.0)


def solve(problem: RegressionProblem, tol: float = 1e-9, max_iter: int = 20_000,
          check_monotone: bool = False) -> RegressionSolution:
    """Projected-gradient solve of the edge-weight QP.

    Step size 1 / (2 beta rho(Q) + eps) with rho estimated by power
    iteration; at beta = 0 the objective is linear and a large trial step
    with backtracking halving is used instead. Every accepted step is
    non-increasing in the objective (safeguarded by backtracking).
    """
    if tol <= 0:
        raise ConfigError("tol must be positive")
    if problem.trace_target <= 0:
        raise ConfigError("trace_target must be positive")

    d = problem.distances
    beta = problem.beta
    total = problem.trace_target / 2.0
    n_edges = len(problem.candidate_edges)
    b = problem.incidence()

    def objective(w):
        bw = b @ w
        return float(w @ d + beta * (bw @ bw + 2.0 * (w @ w)))

    def gradient(w):
        return d + 2.0 * beta * (b.T @ (b @ w) + 2.0 * w)

    if beta > 0:
        q = b.T @ b + 2.0 * np.eye(n_edges)
        rho = spectral_radius_symmetric(q, tol=1e-8, max_iter=10_000)
        step = 1.0 / (2.0 * beta * rho + 1e-12)
    else:
        # LP limit: one large step lands on a vertex of the simplex.
        step = 1e6 * (total + 1.0) / (float(np.max(np.abs(d))) + 1.0)

    w = np.full(n_edges, total / n_edges)
    f = objective(w)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g = gradient(w)
        t = step
        while True:
            w_try = project_simplex(w - t * g, total)
            f_try = objective(w_try)
            if f_try <= f + 1e-12 * (1.0 + abs(f)):
                break
            t *= 0.5
            if t < 1e-18:
                w_try, f_try = w, f
                break
        if check_monotone and f_try > f + 1e-10 * (1.0 + abs(f)):
            raise NumericalError(f"objective increased at iteration {iterations}")
        decrease = f - f_try
        w, f = w_try, f_try
        if decrease <= tol * (1.0 + abs(f)):
            converged = True
            break
    return RegressionSolution(weights=w, objective=f, iterations=iterations, converged=converged)


def solution_to_laplacian(problem: RegressionProblem, sol: RegressionSolution) -> Laplacian:
    """Reconstruct L from the solved edge weights and validate it."""
    w = np.array(sol.weights, dtype=np.float64)
    if np.any(w < -WEIGHT_CLAMP):
        worst = float(np.min(w))
        raise NumericalError(f"solution weight {worst:.3g} below -{WEIGHT_CLAMP:.0e}")
    w = np.maximum(w, 0.0)
    adjacency = np.zeros((problem.num_vertices, problem.num_vertices))
    for e, (i, j) in enumerate(problem.candidate_edges):
        adjacency[i, j] = w[e]
        adjacency[j, i] = w[e]
    lap = laplacian_from_adjacency(Graph(n=problem.num_vertices, adjacency=adjacency))
    tr = float(np.trace(lap.combinatorial))
    if abs(tr - problem.trace_target) > 1e-8:
        raise NumericalError(
            f"trace {tr:.12g} misses target {problem.trace_target:.12g} by more than 1e-8"
        )
    return lap


def classify_by_quantiles(values: np.ndarray, strong_q: float, weak_q: float) -> list[str]:
    """Classify per-edge values as strong / weak / pruned by quantile.

    Edges at or above the strong_q quantile are strong, edges between the
    weak_q and strong_q quantiles are weak, the rest are pruned. With
    all-equal values every edge is strong (tie rule).
    """
    if not (0.0 < weak_q < strong_q <= 1.0):
        raise ConfigError("quantiles must satisfy 0 < weak_q < strong_q <= 1")
    values = np.asarray(values, dtype=np.float64)
    strong_thr = float(np.quantile(values, strong_q))
    weak_thr = float(np.quantile(values, weak_q))
    out = []
    for v in values:
        if v >= strong_thr:
            out.append(EdgeStrength.STRONG)
        elif v >= weak_thr:
            out.append(EdgeStrength.WEAK)
        else:
            out.append(EdgeStrength.PRUNED)
    return out


def aggregate_common(solutions: list[RegressionSolution], strong_q: float = 0.8,
                     weak_q: float = 0.4) -> tuple[CommonGraphStats, list[str]]:
    """Aggregate solutions for a shared candidate template into a common graph.

    Returns per-edge arithmetic means (reduction in ascending observation
    order) plus a strong/weak/pruned label per candidate edge.
    """
    if not solutions:
        raise ConfigError("no solutions to aggregate")
    n_edges = solutions[0].weights.shape[0]
    for sol in solutions:
        if sol.weights.shape[0] != n_edges:
            raise ConfigError("solutions do not share one candidate template")
    mean = np.zeros(n_edges)
    for sol in solutions:
        mean += sol.weights
    mean /= len(solutions)
    stats = CommonGraphStats(
        mean_weights=mean,
        observation_count=len(solutions),
        strong_quantile=strong_q,
        weak_quantile=weak_q,
    )
    return stats, classify_by_quantiles(mean, strong_q, weak_q)
