"""Region adjacency graphs over superpixel meshes and quadtree-aware pooling.

Nodes are superpixel centroids carrying the mean intensity per channel; edges
are directed between cells sharing a boundary segment of positive length
(4-adjacency) and carry pseudo-coordinates: the centroid offset normalized by
twice the grid side and shifted into [0, 1], so antiparallel edges satisfy
u + u' = v + v' = 1 exactly.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .imageio import Image
from .mesh import SuperpixelMesh

__all__ = ["RagGraph", "PoolAssignment", "build_rag", "wavepool"]


@dataclass(frozen=True)
class RagGraph:
    """Directed region adjacency graph; node ids follow mesh cell order."""

    centroids: np.ndarray  # (n, 2) float64, (cx, cy) in padded-grid pixels
    areas: np.ndarray      # (n,) int64, pixels after crop intersection
    features: np.ndarray   # (n, C) float64
    edges: np.ndarray      # (m, 2) int64, sorted by (src, dst)
    pseudo: np.ndarray     # (m, 2) float64 in [0, 1]

    @property
    def num_nodes(self) -> int:
        return self.centroids.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def to_json_obj(self) -> dict:
        nodes = [
            {
                "id": i,
                "cx": float(self.centroids[i, 0]),
                "cy": float(self.centroids[i, 1]),
                "area": int(self.areas[i]),
                "feat": [float(v) for v in self.features[i]],
            }
            for i in range(self.num_nodes)
        ]
        edges = [
            {
                "src": int(self.edges[j, 0]),
                "dst": int(self.edges[j, 1]),
                "pseudo": [float(self.pseudo[j, 0]), float(self.pseudo[j, 1])],
            }
            for j in range(self.num_edges)
        ]
        return {"nodes": nodes, "edges": edges}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @staticmethod
    def from_json(text: str) -> "RagGraph":
        try:
            obj = json.loads(text)
            nodes = obj["nodes"]
            edges = obj["edges"]
            ids = [int(n["id"]) for n in nodes]
            if ids != list(range(len(nodes))):
                raise ValueError("node ids must be 0..n-1 in order")
            centroids = np.array([[n["cx"], n["cy"]] for n in nodes], dtype=np.float64).reshape(-1, 2)
            areas = np.array([n["area"] for n in nodes], dtype=np.int64)
            features = np.array([n["feat"] for n in nodes], dtype=np.float64).reshape(len(nodes), -1)
            pairs = np.array([[e["src"], e["dst"]] for e in edges], dtype=np.int64).reshape(-1, 2)
            pseudo = np.array([e["pseudo"] for e in edges], dtype=np.float64).reshape(-1, 2)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed graph JSON: {exc}") from exc
        return RagGraph(centroids=centroids, areas=areas, features=features, edges=pairs, pseudo=pseudo)

    def to_csv(self) -> tuple[str, str]:
        """(nodes_csv, edges_csv) with the same columns as the JSON form."""
        nbuf = io.StringIO()
        nw = csv.writer(nbuf, lineterminator="\n")
        width = self.features.shape[1] if self.num_nodes else 0
        nw.writerow(["id", "cx", "cy", "area"] + [f"feat{c}" for c in range(width)])
        for i in range(self.num_nodes):
            nw.writerow(
                [i, repr(float(self.centroids[i, 0])), repr(float(self.centroids[i, 1])), int(self.areas[i])]
                + [repr(float(v)) for v in self.features[i]]
            )
        ebuf = io.StringIO()
        ew = csv.writer(ebuf, lineterminator="\n")
        ew.writerow(["src", "dst", "u", "v"])
        for j in range(self.num_edges):
            ew.writerow(
                [
                    int(self.edges[j, 0]),
                    int(self.edges[j, 1]),
                    repr(float(self.pseudo[j, 0])),
                    repr(float(self.pseudo[j, 1])),
                ]
            )
        return nbuf.getvalue(), ebuf.getvalue()


@dataclass(frozen=True)
class PoolAssignment:
    """Fine-to-coarse node mapping recorded by one pooling step."""

    mapping: np.ndarray  # (n_fine,) int64
    aggregation: str

    def to_json(self) -> str:
        return json.dumps({"aggregation": self.aggregation, "mapping": [int(i) for i in self.mapping]})


def _check_mesh_image(mesh: SuperpixelMesh, image: Image) -> None:
    if not image.is_padded:
        raise InvalidInputError("image must be padded to the mesh grid")
    if mesh.side != image.padded_side or mesh.crop_size != image.crop:
        raise InvalidInputError(
            f"mesh (side {mesh.side}, crop {mesh.crop_size}) does not match "
            f"image (side {image.padded_side}, crop {image.crop})"
        )


def _rag_geometry(mesh: SuperpixelMesh) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Centroids, clipped areas, directed edge list, and pseudo-coordinates."""
    rects = mesh.clipped_cells()
    if len(rects) != mesh.cell_count:
        raise InvalidInputError("mesh contains cells entirely outside its crop")
    centroids = np.array([(x + w / 2.0, y + h / 2.0) for x, y, w, h in rects], dtype=np.float64).reshape(-1, 2)
    areas = np.array([w * h for _, _, w, h in rects], dtype=np.int64)

    labels = mesh.label_map().astype(np.int64)
    n = mesh.cell_count
    codes = []
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        touching = a != b
        lo = np.minimum(a[touching], b[touching])
        hi = np.maximum(a[touching], b[touching])
        codes.append(lo * n + hi)
    undirected = np.unique(np.concatenate(codes))
    pairs = np.stack((undirected // n, undirected % n), axis=1)
    directed = np.concatenate((pairs, pairs[:, ::-1]), axis=0)
    order = np.lexsort((directed[:, 1], directed[:, 0]))
    edges = directed[order]
    if edges.shape[0]:
        delta = centroids[edges[:, 1]] - centroids[edges[:, 0]]
        pseudo = delta / (2.0 * mesh.side) + 0.5
    else:
        pseudo = np.zeros((0, 2), dtype=np.float64)
    return centroids, areas, edges, pseudo


def build_rag(mesh: SuperpixelMesh, image: Image) -> RagGraph:
    """Region adjacency graph with per-channel mean-intensity node features."""
    _check_mesh_image(mesh, image)
    centroids, areas, edges, pseudo = _rag_geometry(mesh)
    features = np.empty((mesh.cell_count, image.channels), dtype=np.float64)
    for i, (x, y, w, h) in enumerate(mesh.clipped_cells()):
        block = image.values[:, y : y + h, x : x + w]
        features[i] = block.mean(axis=(1, 2))
    return RagGraph(centroids=centroids, areas=areas, features=features, edges=edges, pseudo=pseudo)


def wavepool(
    mesh: SuperpixelMesh,
    graph: RagGraph,
    image: Image | None = None,
    agg: str = "max",
) -> tuple[SuperpixelMesh, RagGraph, PoolAssignment]:
    """Merge every complete 2x2 sibling quad of cells into its quadtree parent.

    Cells whose three siblings are not all present pass through unchanged.
    Coarse features aggregate the fine features (elementwise max, or mean
    weighted by clipped area); coarse geometry and edges are rebuilt from the
    coarse mesh.
    """
    if agg not in ("max", "mean"):
        raise InvalidInputError(f"aggregation must be 'max' or 'mean', got {agg!r}")
    if graph.num_nodes != mesh.cell_count:
        raise InvalidInputError(
            f"graph has {graph.num_nodes} nodes but mesh has {mesh.cell_count} cells"
        )
    if image is not None:
        _check_mesh_image(mesh, image)

    groups: dict[tuple[int, int, int], list[int]] = {}
    for i, (x, y, size) in enumerate(mesh.cells):
        groups.setdefault((size, x // (2 * size), y // (2 * size)), []).append(i)

    coarse: list[tuple[tuple[int, int, int], list[int]]] = []
    for (size, px, py), members in groups.items():
        if len(members) == 4:
            coarse.append(((px * 2 * size, py * 2 * size, 2 * size), members))
        else:
            for i in members:
                coarse.append((mesh.cells[i], [i]))
    coarse.sort(key=lambda item: (item[0][1], item[0][0]))

    mapping = np.empty(mesh.cell_count, dtype=np.int64)
    for coarse_id, (_, members) in enumerate(coarse):
        mapping[members] = coarse_id

    coarse_mesh = SuperpixelMesh(
        side=mesh.side, cells=tuple(cell for cell, _ in coarse), crop=mesh.crop
    )
    centroids, areas, edges, pseudo = _rag_geometry(coarse_mesh)

    features = np.empty((len(coarse), graph.features.shape[1]), dtype=np.float64)
    for coarse_id, (_, members) in enumerate(coarse):
        if len(members) == 1:
            features[coarse_id] = graph.features[members[0]]
        elif agg == "max":
            features[coarse_id] = graph.features[members].max(axis=0)
        else:
            weights = graph.areas[members].astype(np.float64)
            features[coarse_id] = weights @ graph.features[members] / weights.sum()

    coarse_graph = RagGraph(
        centroids=centroids, areas=areas, features=features, edges=edges, pseudo=pseudo
    )
    return coarse_mesh, coarse_graph, PoolAssignment(mapping=mapping, aggregation=agg)
