"""Sparsified spatio-temporal graph construction.

Three consecutive skeleton frames form one 3n-vertex graph: identical
intra-frame blocks (strong edges for bones and salient non-physical
pairs, weak edges for latent pairs), inter-frame blocks linking each
joint to its correspondent (strong) and to the correspondent's bone
neighbors (weak "potential" edges), and zero corner blocks so frames two
steps apart are never linked directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .graphs import CONSTRUCTED_SYM_TOL, EdgeClass, Graph, dump_json

__all__ = [
    "SkeletonTopology",
    "EdgeWeightScheme",
    "StGraph",
    "SpatioTemporalFrame",
    "build_spatial_block",
    "build_temporal_blocks",
    "assemble_st_graph",
    "build_template",
    "concat_frames",
    "sequence_to_tensor",
    "apply_learned_graph",
    "harmonize_edge_values",
    "save_topology",
    "load_topology",
]

FRAME_OFFSETS = (-1, 0, 1)
VARIANTS = ("bone", "intra", "complete")


def _check_pairs(pairs, n, label):
    out = []
    for pair in pairs:
        i, j = int(pair[0]), int(pair[1])
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ConfigError(f"{label} pair ({i}, {j}) invalid for {n} joints")
        out.append((min(i, j), max(i, j)))
    if len(set(out)) != len(out):
        raise ConfigError(f"{label} pairs contain duplicates")
    return out


@dataclass
class SkeletonTopology:
    """Joint count, physical bones, and curated non-physical edge lists."""

    num_joints: int
    bones: list[tuple[int, int]]
    nonphysical_strong: list[tuple[int, int]] = field(default_factory=list)
    nonphysical_weak: list[tuple[int, int]] = field(default_factory=list)
    joint_names: list[str] | None = None

    def __post_init__(self):
        n = self.num_joints
        self.bones = _check_pairs(self.bones, n, "bone")
        self.nonphysical_strong = _check_pairs(self.nonphysical_strong, n, "strong")
        self.nonphysical_weak = _check_pairs(self.nonphysical_weak, n, "weak")
        groups = [set(self.bones), set(self.nonphysical_strong), set(self.nonphysical_weak)]
        for a in range(3):
            for b in range(a + 1, 3):
                overlap = groups[a] & groups[b]
                if overlap:
                    raise ConfigError(f"edge lists overlap on pairs {sorted(overlap)}")
        if self.joint_names is not None and len(self.joint_names) != n:
            raise ConfigError("joint_names length does not match joint count")
        if not self._bones_connected():
            raise ConfigError("bones must form a connected graph over all joints")

    def _bones_connected(self) -> bool:
        if self.num_joints == 1:
            return True
        neighbors: dict[int, list[int]] = {i: [] for i in range(self.num_joints)}
        for (i, j) in self.bones:
            neighbors[i].append(j)
            neighbors[j].append(i)
        seen = {0}
        stack = [0]
        while stack:
            for nb in neighbors[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == self.num_joints

    def bone_neighbors(self, hops: int = 1) -> np.ndarray:
        """Boolean matrix: joints within ``hops`` bone steps (excl. self)."""
        n = self.num_joints
        adj = np.zeros((n, n), dtype=bool)
        for (i, j) in self.bones:
            adj[i, j] = adj[j, i] = True
        reach = adj.copy()
        frontier = adj.astype(int)
        for _ in range(hops - 1):
            frontier = frontier @ adj.astype(int)
            reach |= frontier > 0
        np.fill_diagonal(reach, False)
        return reach


@dataclass
class EdgeWeightScheme:
    """Strong/weak edge weights; the paper-reported ratio is w1/w2 = 5."""

    w1: float = 5.0
    w2: float = 1.0

    def __post_init__(self):
        if not (self.w1 > self.w2 > 0):
            raise ConfigError(f"weights must satisfy w1 > w2 > 0, got w1={self.w1}, w2={self.w2}")

    @property
    def ratio(self) -> float:
        return self.w1 / self.w2


@dataclass
class SpatioTemporalFrame:
    """Signal for one window of three consecutive frames: (3n x channels)."""

    coordinates: np.ndarray
    source_frames: tuple[int, int, int]

    @property
    def num_vertices(self) -> int:
        return self.coordinates.shape[0]


@dataclass
class StGraph:
    """3n-vertex block graph over a window of three frames.

    Vertex (frame_offset f in {0,1,2}, joint j) maps to index f*n + j.
    """

    graph: Graph
    num_joints: int

    def __post_init__(self):
        if self.graph.n != 3 * self.num_joints:
            raise ConfigError(
                f"graph has {self.graph.n} vertices, expected 3 x {self.num_joints}"
            )
        self._validate_blocks()

    def _validate_blocks(self):
        n = self.num_joints
        a = self.graph.adjacency
        if np.any(self.block(0, 2) != 0) or np.any(self.block(2, 0) != 0):
            raise ConfigError("corner blocks linking frames two steps apart must be zero")
        if np.any(self.block(0, 0) != self.block(1, 1)) or np.any(
            self.block(1, 1) != self.block(2, 2)
        ):
            raise ConfigError("intra-frame blocks must be identical across the three frames")
        if float(np.max(np.abs(a - a.T))) > CONSTRUCTED_SYM_TOL:
            raise ConfigError("spatio-temporal adjacency must be symmetric")

    def vertex_index(self, frame: int, joint: int) -> int:
        if not (0 <= frame < 3 and 0 <= joint < self.num_joints):
            raise ConfigError(f"vertex (frame={frame}, joint={joint}) out of range")
        return frame * self.num_joints + joint

    def block(self, fi: int, fj: int) -> np.ndarray:
        n = self.num_joints
        return self.graph.adjacency[fi * n:(fi + 1) * n, fj * n:(fj + 1) * n]

    def edges(self) -> list[tuple[int, int]]:
        return self.graph.edges()

    def edge_kind(self, i: int, j: int) -> str:
        """'spatial' for same-frame pairs, 'temporal' for adjacent frames."""
        return "spatial" if i // self.num_joints == j // self.num_joints else "temporal"


def build_spatial_block(topo: SkeletonTopology, scheme: EdgeWeightScheme) -> np.ndarray:
    """Intra-frame adjacency: w1 on bones and strong pairs, w2 on weak pairs."""
    n = topo.num_joints
    block = np.zeros((n, n))
    for (i, j) in topo.bones + topo.nonphysical_strong:
        block[i, j] = block[j, i] = scheme.w1
    for (i, j) in topo.nonphysical_weak:
        block[i, j] = block[j, i] = scheme.w2
    return block


def build_temporal_blocks(topo: SkeletonTopology, scheme: EdgeWeightScheme,
                          hops: int = 1) -> np.ndarray:
    """Inter-frame adjacency between consecutive frames.

    Diagonal entries (corresponding joints) get w1; entry (i, j) gets w2
    when j is within ``hops`` bone steps of i (potential edges).
    """
    if hops < 1:
        raise ConfigError("temporal neighborhood must be at least one hop")
    n = topo.num_joints
    block = scheme.w1 * np.eye(n)
    block[topo.bone_neighbors(hops)] = scheme.w2
    return block


def assemble_st_graph(spatial: np.ndarray, temporal: np.ndarray,
                      spatial_classes: dict | None = None,
                      temporal_classes: dict | None = None) -> StGraph:
    """Assemble the 3n x 3n block adjacency from per-frame blocks.

    Layout: [[S, T, 0], [T^T, S, T], [0, T^T, S]]. Optional class maps are
    keyed by joint pairs (spatial: i < j; temporal: ordered (i, j) for the
    source -> next-frame direction) and are lifted onto the 3n indexing.
    """
    spatial = np.asarray(spatial, dtype=np.float64)
    temporal = np.asarray(temporal, dtype=np.float64)
    if spatial.shape != temporal.shape or spatial.shape[0] != spatial.shape[1]:
        raise ConfigError(
            f"spatial {spatial.shape} and temporal {temporal.shape} blocks must be square and equal"
        )
    if spatial.size and float(np.max(np.abs(spatial - spatial.T))) > CONSTRUCTED_SYM_TOL:
        raise ConfigError("spatial block must be symmetric")
    n = spatial.shape[0]
    zero = np.zeros((n, n))
    adjacency = np.block([
        [spatial, temporal, zero],
        [temporal.T, spatial, temporal],
        [zero, temporal.T, spatial],
    ])
    classes: dict = {}
    if spatial_classes:
        for (i, j), cls in spatial_classes.items():
            for f in range(3):
                classes[(f * n + i, f * n + j)] = cls
    if temporal_classes:
        for (i, j), cls in temporal_classes.items():
            for f in range(2):
                a, b = f * n + i, (f + 1) * n + j
                classes[(min(a, b), max(a, b))] = cls
    graph = Graph(n=3 * n, adjacency=adjacency, edge_classes=classes or None)
    return StGraph(graph=graph, num_joints=n)


def spatial_edge_classes(topo: SkeletonTopology) -> dict:
    classes = {}
    for (i, j) in topo.bones + topo.nonphysical_strong:
        classes[(i, j)] = EdgeClass.STRONG_SPATIAL
    for (i, j) in topo.nonphysical_weak:
        classes[(i, j)] = EdgeClass.WEAK_SPATIAL
    return classes


def temporal_edge_classes(topo: SkeletonTopology, hops: int = 1) -> dict:
    classes = {}
    for i in range(topo.num_joints):
        classes[(i, i)] = EdgeClass.CORRESPONDING_TEMPORAL
    reach = topo.bone_neighbors(hops)
    for i in range(topo.num_joints):
        for j in range(topo.num_joints):
            if reach[i, j]:
                classes[(i, j)] = EdgeClass.NEIGHBOR_TEMPORAL
    return classes


def build_template(topo: SkeletonTopology, scheme: EdgeWeightScheme | None = None,
                   variant: str = "complete", hops: int = 1) -> StGraph:
    """Template spatio-temporal graph for a topology.

    Variants mirror the ablations: 'bone' keeps physical intra-frame edges
    only, 'intra' adds the non-physical strong/weak intra-frame edges, and
    'complete' adds the inter-frame connectivity as well.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}, got {variant!r}")
    scheme = scheme or EdgeWeightScheme()
    if variant == "bone":
        bare = SkeletonTopology(topo.num_joints, topo.bones, [], [], topo.joint_names)
        spatial = build_spatial_block(bare, scheme)
        spatial_cls = spatial_edge_classes(bare)
    else:
        spatial = build_spatial_block(topo, scheme)
        spatial_cls = spatial_edge_classes(topo)
    if variant == "complete":
        temporal = build_temporal_blocks(topo, scheme, hops)
        temporal_cls = temporal_edge_classes(topo, hops)
    else:
        temporal = np.zeros_like(spatial)
        temporal_cls = None
    return assemble_st_graph(spatial, temporal, spatial_cls, temporal_cls)


def concat_frames(seq, actor: int = 0) -> list[SpatioTemporalFrame]:
    """Sliding windows of three consecutive frames (stride 1).

    A sequence of T0 frames with N0 joints yields T0 - 2 windows of
    3 * N0 vertices each.
    """
    frames = seq.actor_frames(actor) if hasattr(seq, "actor_frames") else np.asarray(seq)
    t0 = frames.shape[0]
    if t0 < 3:
        raise DataError(f"need at least 3 frames to concatenate, got {t0}")
    out = []
    for t in range(1, t0 - 1):
        coords = np.concatenate([frames[t - 1], frames[t], frames[t + 1]], axis=0)
        out.append(SpatioTemporalFrame(coordinates=coords, source_frames=(t - 1, t, t + 1)))
    return out


def sequence_to_tensor(seq) -> np.ndarray:
    """Concatenated network input of shape (P, T0-2, 3*N0, channels)."""
    actors = []
    num_actors = getattr(seq, "num_actors", 1)
    for p in range(num_actors):
        windows = concat_frames(seq, actor=p)
        actors.append(np.stack([w.coordinates for w in windows]))
    return np.stack(actors)


def harmonize_edge_values(template: StGraph, edges: list[tuple[int, int]],
                          values: np.ndarray) -> np.ndarray:
    """Average per-edge values over the block-structure equivalence classes.

    The final graph must carry identical intra-frame blocks and one shared
    inter-frame block, so the three copies of a spatial joint pair (and
    the two copies of a temporal pair) are pooled before classification.
    """
    n = template.num_joints
    values = np.asarray(values, dtype=np.float64)
    groups: dict[tuple, list[int]] = {}
    for e, (i, j) in enumerate(edges):
        fi, ji = divmod(i, n)
        fj, jj = divmod(j, n)
        if fi == fj:
            key = ("s", min(ji, jj), max(ji, jj))
        else:
            # order by frame so (joint in earlier frame, joint in later frame)
            a, b = (ji, jj) if fi < fj else (jj, ji)
            key = ("t", a, b)
        groups.setdefault(key, []).append(e)
    pooled = np.empty_like(values)
    for members in groups.values():
        pooled[members] = float(np.mean(values[members]))
    return pooled


def apply_learned_graph(template: StGraph, classified: dict,
                        scheme: EdgeWeightScheme | None = None) -> StGraph:
    """Re-weight a template according to learned edge strengths.

    ``classified`` maps template edges (i, j), i < j, to
    'strong' / 'weak' / 'pruned'. Strong edges get w1, weak edges w2,
    pruned edges are removed; the block-zero pattern is preserved because
    only template edges may appear.
    """
    scheme = scheme or EdgeWeightScheme()
    template_edges = set(template.edges())
    for edge in classified:
        if edge not in template_edges:
            raise ConfigError(f"classified edge {edge} is not in the template")
    n3 = template.graph.n
    adjacency = np.zeros((n3, n3))
    classes: dict = {}
    for (i, j), strength in classified.items():
        if strength == "pruned":
            continue
        weight = scheme.w1 if strength == "strong" else scheme.w2
        adjacency[i, j] = adjacency[j, i] = weight
        if template.edge_kind(i, j) == "spatial":
            classes[(i, j)] = (
                EdgeClass.STRONG_SPATIAL if strength == "strong" else EdgeClass.WEAK_SPATIAL
            )
        else:
            classes[(i, j)] = (
                EdgeClass.CORRESPONDING_TEMPORAL
                if strength == "strong"
                else EdgeClass.NEIGHBOR_TEMPORAL
            )
    graph = Graph(n=n3, adjacency=adjacency, edge_classes=classes or None,
                  meta=dict(template.graph.meta))
    return StGraph(graph=graph, num_joints=template.num_joints)


# ---------------------------------------------------------------------------
# Topology file format (JSON):
#   {"n": int, "bones": [[i,j]...], "strong": [[i,j]...], "weak": [[i,j]...],
#    "names": [...]}
# ---------------------------------------------------------------------------

def save_topology(topo: SkeletonTopology, path) -> None:
    obj = {
        "n": topo.num_joints,
        "bones": [list(p) for p in topo.bones],
        "strong": [list(p) for p in topo.nonphysical_strong],
        "weak": [list(p) for p in topo.nonphysical_weak],
    }
    if topo.joint_names is not None:
        obj["names"] = list(topo.joint_names)
    dump_json(obj, path)


def load_topology(path) -> SkeletonTopology:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON: {exc}", path=path) from exc
    try:
        return SkeletonTopology(
            num_joints=int(obj["n"]),
            bones=[tuple(p) for p in obj["bones"]],
            nonphysical_strong=[tuple(p) for p in obj.get("strong", [])],
            nonphysical_weak=[tuple(p) for p in obj.get("weak", [])],
            joint_names=obj.get("names"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed topology file: {exc}", path=path) from exc
