"""Graph data model and Laplacian algebra.

A graph is a symmetric non-negative weighted adjacency matrix with an
optional per-edge class annotation. From it we derive the combinatorial
Laplacian L = D - A and the symmetric normalized Laplacian
D^{-1/2} L D^{-1/2}, plus the quadratic-form smoothness measures the
regression solver and the spectral filters are built on.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .linalg import as_matrix

__all__ = [
    "EdgeClass",
    "Graph",
    "Laplacian",
    "laplacian_from_adjacency",
    "normalize_laplacian",
    "total_variation",
    "variation_operator",
    "save_graph",
    "load_graph",
]

# Symmetry tolerance for constructed graphs. Graphs loaded from the edge-list
# file format are symmetric by construction; a looser LOADED_SYM_TOL applies
# when validating full matrices that went through a text round-trip.
CONSTRUCTED_SYM_TOL = 1e-12
LOADED_SYM_TOL = 1e-10


class EdgeClass(enum.Enum):
    """Edge roles in the sparsified spatio-temporal graph."""

    STRONG_SPATIAL = "Es"
    WEAK_SPATIAL = "Ew"
    CORRESPONDING_TEMPORAL = "Ec"
    NEIGHBOR_TEMPORAL = "En"

    @classmethod
    def from_code(cls, code: str) -> "EdgeClass":
        for member in cls:
            if member.value == code:
                return member
        raise DataError(f"unknown edge class code {code!r}")


@dataclass
class Graph:
    """Undirected weighted graph on ``n`` vertices.

    adjacency must be symmetric with non-negative weights and a zero
    diagonal; ``edge_classes`` maps (i, j) with i < j to an EdgeClass.
    """

    n: int
    adjacency: np.ndarray
    edge_classes: dict | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.adjacency = as_matrix(self.adjacency, "adjacency")
        validate_adjacency(self.adjacency)
        if self.adjacency.shape[0] != self.n:
            raise ValueError(
                f"vertex count {self.n} does not match adjacency shape {self.adjacency.shape}"
            )
        if self.edge_classes is not None:
            for (i, j) in self.edge_classes:
                if not (0 <= i < j < self.n):
                    raise ValueError(f"edge class key ({i}, {j}) out of range for n={self.n}")

    def edges(self) -> list[tuple[int, int]]:
        """Edges (i, j) with i < j and positive weight, in index order."""
        ii, jj = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(ii.tolist(), jj.tolist()))


def validate_adjacency(a: np.ndarray, sym_tol: float = CONSTRUCTED_SYM_TOL) -> None:
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    asym = np.abs(a - a.T)
    if a.size and float(np.max(asym)) > sym_tol:
        bad = np.argwhere(asym > sym_tol)[:5]
        raise ValueError(f"adjacency not symmetric at entries {bad.tolist()}")
    if np.any(a < 0):
        bad = np.argwhere(a < 0)[:5]
        raise ValueError(f"adjacency has negative weights at entries {bad.tolist()}")
    if a.size and float(np.max(np.abs(np.diag(a)))) > 0:
        bad = [int(i) for i in np.nonzero(np.diag(a))[0][:5]]
        raise ValueError(f"adjacency has self-loops at vertices {bad}")


@dataclass
class Laplacian:
    """Combinatorial and symmetric normalized Laplacian of a graph."""

    combinatorial: np.ndarray
    normalized: np.ndarray
    degrees: np.ndarray

    @property
    def n(self) -> int:
        return self.combinatorial.shape[0]


def laplacian_from_adjacency(g: Graph) -> Laplacian:
    """Combinatorial Laplacian L = D - A with D = diag(row sums)."""
    a = g.adjacency
    degrees = a.sum(axis=1)
    comb = np.diag(degrees) - a
    lap = Laplacian(combinatorial=comb, normalized=np.empty_like(comb), degrees=degrees)
    lap.normalized = normalize_laplacian(lap)
    return lap


def normalize_laplacian(l: Laplacian) -> np.ndarray:
    """Symmetric normalized Laplacian D^{-1/2} L D^{-1/2}.

    Isolated vertices (degree 0) get a zero row and column, keeping the
    spectral filters well defined.
    """
    inv_sqrt = np.zeros_like(l.degrees)
    positive = l.degrees > 0
    inv_sqrt[positive] = 1.0 / np.sqrt(l.degrees[positive])
    return inv_sqrt[:, None] * l.combinatorial * inv_sqrt[None, :]


def total_variation(l: Laplacian, x) -> float:
    """Quadratic form tr(x^T L x) summed over signal channels.

    Equals sum_{i~j} a_{i,j} ||x_i - x_j||^2, the total variation of the
    signal over the graph edges.
    """
    x = as_matrix(x, "signal")
    if x.shape[0] != l.n:
        raise ValueError(f"signal has {x.shape[0]} rows, graph has {l.n} vertices")
    return float(np.sum(x * (l.combinatorial @ x)))


def variation_operator(l: Laplacian, x) -> np.ndarray:
    """Apply L to a signal: component i is sum_j a_{i,j} (x_i - x_j).

    A high-pass operator: constant signals map to zero.
    """
    x = as_matrix(x, "signal")
    if x.shape[0] != l.n:
        raise ValueError(f"signal has {x.shape[0]} rows, graph has {l.n} vertices")
    return l.combinatorial @ x


# ---------------------------------------------------------------------------
# Graph file format (shared with the CLI): JSON object
#   {"n": int, "edges": [[i, j, weight, class?] ...], "meta": {...}}
# with 0-based vertex indices, i < j, class in {"Es","Ew","Ec","En"}.
# ---------------------------------------------------------------------------

def graph_to_dict(g: Graph) -> dict:
    edges = []
    for (i, j) in g.edges():
        entry = [i, j, float(g.adjacency[i, j])]
        if g.edge_classes is not None and (i, j) in g.edge_classes:
            entry.append(g.edge_classes[(i, j)].value)
        edges.append(entry)
    return {"n": g.n, "edges": edges, "meta": g.meta}


def graph_from_dict(obj: dict, path=None) -> Graph:
    try:
        n = int(obj["n"])
        raw_edges = obj["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed graph object: {exc}", path=path) from exc
    adjacency = np.zeros((n, n))
    classes: dict = {}
    for entry in raw_edges:
        if len(entry) not in (3, 4):
            raise DataError(f"edge entry {entry!r} must be [i, j, weight, class?]", path=path)
        i, j, w = int(entry[0]), int(entry[1]), float(entry[2])
        if not (0 <= i < j < n):
            raise DataError(f"edge ({i}, {j}) violates 0 <= i < j < n={n}", path=path)
        adjacency[i, j] = w
        adjacency[j, i] = w
        if len(entry) == 4:
            classes[(i, j)] = EdgeClass.from_code(entry[3])
    meta = dict(obj.get("meta", {}))
    return Graph(n=n, adjacency=adjacency, edge_classes=classes or None, meta=meta)


def dump_json(obj, path) -> None:
    """Canonical JSON serialization: sorted keys, fixed separators.

    Used for every artifact so identical configs reproduce identical bytes.
    """
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1, separators=(",", ": "))
        fh.write("\n")


def save_graph(g: Graph, path) -> None:
    dump_json(graph_to_dict(g), path)


def load_graph(path) -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON: {exc}", path=path) from exc
    return graph_from_dict(obj, path=path)
