"""Grid partition of impact space.

The bounding box of all impacts gets one edge length per slot group (four
groups of w coordinates each); each group is divided into a configured
number of cells. On top of this live divergence-weighted representative
selection, exact nearest-distance queries, and size-targeted clustering for
the summarizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .embedding import Impact

EPS_BOX = 1e-9


class CubeError(Exception):
    pass


def _group_edges(vectors: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate origin and per-group edge length (floored at EPS_BOX)."""
    lo = vectors.min(axis=0)
    spread = vectors.max(axis=0) - lo
    edges = np.array(
        [max(float(spread[g * dim:(g + 1) * dim].max()), EPS_BOX)
         for g in range(4)]
    )
    return lo, edges


def _coords(
    vectors: np.ndarray,
    lo: np.ndarray,
    edges: np.ndarray,
    divisions: Sequence[int],
    dim: int,
) -> np.ndarray:
    """Half-open cells [lo, hi); the global max folds into the last cell."""
    widths = np.repeat(np.asarray(edges) / np.asarray(divisions), dim)
    caps = np.repeat(np.asarray(divisions, dtype=np.int64) - 1, dim)
    raw = np.floor((vectors - lo) / widths).astype(np.int64)
    return np.clip(raw, 0, caps)


@dataclass
class CubeGrid:
    """Impact-space cube occupancy plus a parallel grid over core space."""

    dim: int
    divisions: tuple[int, int, int, int]
    lo: np.ndarray
    edges: np.ndarray
    cells: dict[tuple[int, ...], list[str]]
    impacts: dict[str, Impact]
    coord_by_text: dict[str, tuple[int, ...]]
    core_lo: np.ndarray | None
    core_edges: np.ndarray | None
    core_coords: dict[str, np.ndarray]
    n_indexed: int

    def occupancy(self) -> dict[tuple[int, ...], int]:
        return {coord: len(members) for coord, members in self.cells.items()}

    def remaining_ids(self) -> list[str]:
        return sorted(tid for members in self.cells.values() for tid in members)

    def remove(self, text_id: str) -> None:
        coord = self.coord_by_text[text_id]
        self.cells[coord].remove(text_id)
        if not self.cells[coord]:
            del self.cells[coord]

    def stats(self, divergences: Mapping[str, float] | None = None) -> dict:
        """Occupancy histogram and divergence quantiles, JSON-friendly."""
        counts = sorted(self.occupancy().values())
        hist: dict[str, int] = {}
        for c in counts:
            hist[str(c)] = hist.get(str(c), 0) + 1
        out = {
            "indexed_impacts": self.n_indexed,
            "occupied_cubes": len(self.cells),
            "divisions": list(self.divisions),
            "occupancy_histogram": hist,
        }
        if divergences:
            vals = np.sort(np.array(list(divergences.values())))
            out["divergence_quantiles"] = {
                q: float(np.quantile(vals, float(q)))
                for q in ("0.0", "0.25", "0.5", "0.75", "1.0")
            }
        return out


_DIVISION_LADDER = (
    (3, 3, 3, 3),
    (3, 3, 3, 2),
    (3, 3, 2, 2),
    (3, 2, 2, 2),
    (2, 2, 2, 2),
    (2, 2, 2, 1),
    (2, 2, 1, 1),
    (2, 1, 1, 1),
    (1, 1, 1, 1),
)


def choose_divisions(
    impacts: Sequence[Impact], q: int
) -> tuple[int, int, int, int]:
    """Finest ladder entry whose mean occupied-cube population stays at or
    above 2q (one cell per coordinate dominates in high dimension, so the
    choice is probed on the data rather than computed from counts)."""
    n = len(impacts)
    target = max(1.0, 2.0 * q)
    for divisions in _DIVISION_LADDER:
        if divisions == (1, 1, 1, 1):
            return divisions
        grid = build_grid(impacts, {}, divisions)
        if n / len(grid.cells) >= target:
            return divisions
    return (1, 1, 1, 1)


def default_divisions(n_impacts: int, q: int) -> tuple[int, int, int, int]:
    """Static fallback when no impact data is at hand."""
    return (1, 1, 1, 1)


def build_grid(
    impacts: Sequence[Impact],
    cores_by_text: Mapping[str, np.ndarray],
    divisions: Sequence[int],
) -> CubeGrid:
    """Index impacts into cubes and core vectors into a parallel grid.

    Occupancy counts always sum to the number of indexed impacts. Texts
    missing from cores_by_text (or with no cores) simply get no core
    coordinates and a divergence of zero.
    """
    if not impacts:
        raise CubeError("cannot build a grid over zero impacts")
    divisions = tuple(int(i) for i in divisions)
    if len(divisions) != 4 or any(i < 1 for i in divisions):
        raise CubeError(f"divisions must be four positive integers: {divisions}")

    vectors = np.stack([imp.v for imp in impacts])
    dim = vectors.shape[1] // 4
    lo, edges = _group_edges(vectors, dim)
    coords = _coords(vectors, lo, edges, divisions, dim)

    cells: dict[tuple[int, ...], list[str]] = {}
    coord_by_text: dict[str, tuple[int, ...]] = {}
    for imp, row in zip(impacts, coords):
        coord = tuple(int(c) for c in row)
        cells.setdefault(coord, []).append(imp.text_id)
        coord_by_text[imp.text_id] = coord

    core_rows = [
        arr for arr in cores_by_text.values() if arr is not None and len(arr)
    ]
    core_coords: dict[str, np.ndarray] = {}
    core_lo = core_edges = None
    if core_rows:
        stacked = np.concatenate(core_rows)
        core_lo, core_edges = _group_edges(stacked, dim)
        for tid, arr in cores_by_text.items():
            if arr is None or not len(arr):
                core_coords[tid] = np.zeros((0, 4 * dim), dtype=np.int64)
            else:
                core_coords[tid] = _coords(
                    arr, core_lo, core_edges, divisions, dim
                )

    return CubeGrid(
        dim=dim,
        divisions=divisions,
        lo=lo,
        edges=edges,
        cells=cells,
        impacts={imp.text_id: imp for imp in impacts},
        coord_by_text=coord_by_text,
        core_lo=core_lo,
        core_edges=core_edges,
        core_coords=core_coords,
        n_indexed=len(impacts),
    )


def divergence(grid: CubeGrid, text_id: str) -> float:
    """Sum of Euclidean distances between cube coordinates over all
    unordered pairs of the text's cores; zero below two cores."""
    coords = grid.core_coords.get(text_id)
    if coords is None or len(coords) < 2:
        return 0.0
    diffs = coords[:, None, :] - coords[None, :, :]
    dists = np.sqrt((diffs.astype(float) ** 2).sum(axis=2))
    return float(np.triu(dists, k=1).sum())


def divergences_for(grid: CubeGrid) -> dict[str, float]:
    return {tid: divergence(grid, tid) for tid in grid.impacts}


@dataclass(frozen=True)
class DivergenceRecord:
    """An impact's spread measure, for export and selection weighting."""

    text_id: str
    div: float

    def __post_init__(self) -> None:
        if self.div < 0:
            raise CubeError("divergence is never negative")


def divergence_records(grid: CubeGrid) -> list[DivergenceRecord]:
    return [
        DivergenceRecord(text_id=tid, div=divergence(grid, tid))
        for tid in sorted(grid.impacts)
    ]


@dataclass(frozen=True)
class Pick:
    """One selected representative; weight is the cube occupancy at
    selection time."""

    text_id: str
    cube: tuple[int, ...]
    weight: int
    divergence: float


def select_representatives(
    grid: CubeGrid,
    divergences: Mapping[str, float],
    mode: str,
    q: int,
    rng: np.random.Generator,
) -> list[Pick]:
    """Sample per cube, without replacement, proportional to divergence.

    "fixed" mode draws min(q, population) per cube; "percentage" draws
    ceil(population / q). Cubes whose remaining divergences are all zero
    fall back to uniform sampling. Selected impacts are removed from the
    grid, so a second call operates on the remainder.
    """
    if mode not in ("fixed", "percentage"):
        raise CubeError(f"unknown selection mode {mode!r}")
    if q < 1:
        raise CubeError("q must be a positive integer")
    picks: list[Pick] = []
    for coord in sorted(grid.cells):
        members = list(grid.cells[coord])
        population = len(members)
        count = min(q, population) if mode == "fixed" else math.ceil(
            population / q
        )
        for _ in range(count):
            weights = np.array([divergences.get(t, 0.0) for t in members])
            total = float(weights.sum())
            if total > 0:
                probs = weights / total
            else:
                probs = np.full(len(members), 1.0 / len(members))
            chosen = members[int(rng.choice(len(members), p=probs))]
            members.remove(chosen)
            grid.remove(chosen)
            picks.append(
                Pick(
                    text_id=chosen,
                    cube=coord,
                    weight=population,
                    divergence=float(divergences.get(chosen, 0.0)),
                )
            )
    return picks


def nearest_distance(
    vectors: np.ndarray | Sequence[np.ndarray],
    point: np.ndarray,
    norm: str = "l1",
) -> float:
    """Exact minimum distance from point to the set (no approximation)."""
    mat = np.asarray(vectors, dtype=float)
    if mat.ndim == 1:
        mat = mat.reshape(1, -1)
    if mat.size == 0 or mat.shape[0] == 0:
        raise CubeError("nearest_distance over an empty set")
    if norm == "l1":
        return float(np.abs(mat - point).sum(axis=1).min())
    return float(np.sqrt(((mat - point) ** 2).sum(axis=1)).min())


@dataclass
class _Cluster:
    ids: list[str]
    total: np.ndarray

    @property
    def centroid(self) -> np.ndarray:
        return self.total / len(self.ids)


def cluster_for_summarization(
    impacts: Sequence[Impact],
    target: int = 120,
    divisions: Sequence[int] | None = None,
) -> list[list[Impact]]:
    """Partition impacts into topic clusters of roughly `target` members.

    Cube-occupancy groups are greedily merged by centroid proximity until no
    cluster is below half the target, then any cluster above 1.5x the target
    is split by farthest-pair bisection (median split, so halves balance).
    """
    impacts = list(impacts)
    if not impacts:
        return []
    by_id = {imp.text_id: imp for imp in impacts}
    if len(impacts) < target:
        return [sorted(impacts, key=lambda i: i.text_id)]

    if divisions is None:
        per_group = max(1, round((4 * len(impacts) / target) ** 0.25))
        divisions = (per_group,) * 4
    grid = build_grid(impacts, {}, divisions)

    clusters = [
        _Cluster(
            ids=sorted(members),
            total=np.sum([by_id[t].v for t in members], axis=0),
        )
        for _, members in sorted(grid.cells.items())
    ]

    while len(clusters) > 1:
        smallest = min(clusters, key=lambda c: (len(c.ids), c.ids[0]))
        if len(smallest.ids) >= target / 2:
            break
        others = [c for c in clusters if c is not smallest]
        nearest = min(
            others,
            key=lambda c: (
                float(np.linalg.norm(c.centroid - smallest.centroid)),
                c.ids[0],
            ),
        )
        nearest.ids = sorted(nearest.ids + smallest.ids)
        nearest.total = nearest.total + smallest.total
        clusters.remove(smallest)

    final: list[_Cluster] = []
    queue = list(clusters)
    while queue:
        cluster = queue.pop(0)
        if len(cluster.ids) <= 1.5 * target:
            final.append(cluster)
            continue
        vecs = np.stack([by_id[t].v for t in cluster.ids])
        centroid = cluster.centroid
        seed_a = int(np.argmax(np.linalg.norm(vecs - centroid, axis=1)))
        seed_b = int(np.argmax(np.linalg.norm(vecs - vecs[seed_a], axis=1)))
        score = np.linalg.norm(vecs - vecs[seed_a], axis=1) - np.linalg.norm(
            vecs - vecs[seed_b], axis=1
        )
        ranked = sorted(zip(score, cluster.ids))
        half = len(ranked) // 2
        for part in (ranked[:half], ranked[half:]):
            ids = sorted(t for _, t in part)
            queue.append(
                _Cluster(ids=ids, total=np.sum([by_id[t].v for t in ids], axis=0))
            )

    final.sort(key=lambda c: c.ids[0])
    return [[by_id[t] for t in c.ids] for c in final]
