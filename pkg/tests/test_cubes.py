from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rhetsum.cubes import (
    CubeError,
    build_grid,
    cluster_for_summarization,
    default_divisions,
    divergence,
    divergences_for,
    nearest_distance,
    select_representatives,
)
from rhetsum.embedding import Impact


def imp(text_id: str, coords, n_cores: int = 1) -> Impact:
    return Impact(text_id=text_id, v=np.asarray(coords, dtype=float),
                  n_cores=n_cores)


def grid_of(impacts, divisions=(2, 2, 2, 2), cores=None):
    return build_grid(impacts, cores or {}, divisions)


# -- build_grid ---------------------------------------------------------------


def test_opposite_corners():
    a = imp("a", [0.0] * 4)
    b = imp("b", [1.0] * 4)
    grid = grid_of([a, b])
    occ = grid.occupancy()
    assert occ == {(0, 0, 0, 0): 1, (1, 1, 1, 1): 1}


def test_single_impact():
    grid = grid_of([imp("a", [3.0, 1.0, 2.0, 4.0])])
    assert sum(grid.occupancy().values()) == 1


def test_occupancy_sums_to_population():
    rng = np.random.default_rng(0)
    impacts = [imp(f"t{i}", rng.normal(size=8)) for i in range(1000)]
    grid = grid_of(impacts, (3, 3, 3, 3))
    assert sum(grid.occupancy().values()) == 1000


def test_empty_errors():
    with pytest.raises(CubeError):
        grid_of([])


def test_degenerate_box_floor():
    impacts = [imp("a", [1.0] * 4), imp("b", [1.0] * 4)]
    grid = grid_of(impacts)
    assert sum(grid.occupancy().values()) == 2
    assert all(edge >= 1e-9 for edge in grid.edges)


# -- divergence ---------------------------------------------------------------


def test_divergence_single_core_zero():
    a = imp("a", [0.0] * 4)
    cores = {"a": np.array([[0.1, 0.0, 0.0, 0.0]])}
    grid = grid_of([a], cores=cores)
    assert divergence(grid, "a") == 0.0


def test_divergence_unit_pair():
    a = imp("a", [0.0] * 4, n_cores=2)
    cores = {"a": np.array([[0.0, 0.0, 0.0, 0.0], [0.9, 0.0, 0.0, 0.0]])}
    grid = grid_of([a], cores=cores)
    assert divergence(grid, "a") == pytest.approx(1.0)


def test_divergence_three_cores_brute_force():
    # cube coords (0,0,0,0), (1,0,0,0), (0,1,0,0): distances 1, 1, sqrt(2)
    a = imp("a", [0.0] * 4, n_cores=3)
    cores = {
        "a": np.array(
            [
                [0.0, 0.0, 0.0, 0.0],
                [0.9, 0.0, 0.0, 0.0],
                [0.0, 0.9, 0.0, 0.0],
            ]
        )
    }
    grid = grid_of([a], cores=cores)
    coords = grid.core_coords["a"]
    brute = 0.0
    for i in range(len(coords)):
        for j in range(i + 1, len(coords)):
            brute += math.dist(coords[i].tolist(), coords[j].tolist())
    assert brute == pytest.approx(2.0 + math.sqrt(2.0))
    assert divergence(grid, "a") == pytest.approx(brute)


def test_divergence_zero_iff_shared_cube():
    a = imp("a", [0.0] * 4, n_cores=3)
    cores = {"a": np.array([[0.05, 0.0, 0.0, 0.0]] * 3)}
    grid = grid_of([a], cores=cores)
    assert divergence(grid, "a") == 0.0


def test_divergence_permutation_invariant():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(5, 8))
    a = imp("a", pts.sum(axis=0), n_cores=5)
    g1 = build_grid([a], {"a": pts}, (2, 2, 2, 2))
    g2 = build_grid([a], {"a": pts[::-1].copy()}, (2, 2, 2, 2))
    assert divergence(g1, "a") == pytest.approx(divergence(g2, "a"))


# -- selection ---------------------------------------------------------------


def test_fixed_mode_takes_all_when_population_short():
    impacts = [imp("a", [0.0] * 4), imp("b", [0.01] * 4)]
    grid = grid_of(impacts, (1, 1, 1, 1))
    picks = select_representatives(
        grid, {"a": 1.0, "b": 1.0}, "fixed", 3, np.random.default_rng(0)
    )
    assert sorted(p.text_id for p in picks) == ["a", "b"]
    assert grid.remaining_ids() == []


def test_percentage_mode_ceiling():
    impacts = [imp(f"t{i}", [float(i) / 100] * 4) for i in range(7)]
    grid = grid_of(impacts, (1, 1, 1, 1))
    picks = select_representatives(
        grid, {p.text_id: 1.0 for p in impacts}, "percentage", 3,
        np.random.default_rng(0),
    )
    assert len(picks) == math.ceil(7 / 3)


def test_selection_probability_proportional_to_divergence():
    rng = np.random.default_rng(123)
    first = {"a": 0, "b": 0}
    trials = 100_000
    for _ in range(trials):
        impacts = [imp("a", [0.0] * 4), imp("b", [0.01] * 4)]
        grid = grid_of(impacts, (1, 1, 1, 1))
        picks = select_representatives(
            grid, {"a": 3.0, "b": 1.0}, "fixed", 2, rng
        )
        first[picks[0].text_id] += 1
    assert abs(first["a"] / trials - 0.75) < 0.01
    assert abs(first["b"] / trials - 0.25) < 0.01


def test_zero_divergences_fall_back_to_uniform():
    rng = np.random.default_rng(9)
    counts = {"a": 0, "b": 0}
    for _ in range(4000):
        impacts = [imp("a", [0.0] * 4), imp("b", [0.01] * 4)]
        grid = grid_of(impacts, (1, 1, 1, 1))
        picks = select_representatives(grid, {}, "fixed", 1, rng)
        counts[picks[0].text_id] += 1
    assert abs(counts["a"] / 4000 - 0.5) < 0.05


def test_selection_weight_is_cube_occupancy():
    impacts = [imp(f"t{i}", [float(i) / 100] * 4) for i in range(5)]
    grid = grid_of(impacts, (1, 1, 1, 1))
    picks = select_representatives(
        grid, {p.text_id: 1.0 for p in impacts}, "fixed", 1,
        np.random.default_rng(0),
    )
    assert len(picks) == 1
    assert picks[0].weight == 5


def test_selection_partitions_population():
    rng = np.random.default_rng(2)
    impacts = [imp(f"t{i}", rng.normal(size=8)) for i in range(40)]
    grid = grid_of(impacts, (2, 2, 2, 2))
    before = set(grid.remaining_ids())
    picks = select_representatives(
        grid, {i.text_id: 1.0 for i in impacts}, "fixed", 2,
        np.random.default_rng(3),
    )
    selected = {p.text_id for p in picks}
    remaining = set(grid.remaining_ids())
    assert selected | remaining == before
    assert selected & remaining == set()
    # never more than the per-cube population
    assert all(p.weight >= 1 for p in picks)


# -- nearest distance ------------------------------------------------------


def test_nearest_distance_l1():
    s1 = np.zeros((1, 8))
    e = np.zeros(8)
    e[0], e[1] = 3.0, 4.0
    assert nearest_distance(s1, e, "l1") == pytest.approx(7.0)


def test_nearest_distance_member_zero():
    s1 = np.array([[1.0, 2.0, 0.0, 0.0]])
    assert nearest_distance(s1, s1[0]) == 0.0


def test_nearest_distance_empty_errors():
    with pytest.raises(CubeError):
        nearest_distance(np.zeros((0, 4)), np.zeros(4))


@pytest.mark.parametrize("norm", ["l1", "l2"])
def test_nearest_distance_matches_linear_scan(norm):
    rng = np.random.default_rng(11)
    points = rng.normal(size=(50, 8))
    for _ in range(50):
        e = rng.normal(size=8)
        if norm == "l1":
            brute = min(float(np.abs(p - e).sum()) for p in points)
        else:
            brute = min(float(np.sqrt(((p - e) ** 2).sum())) for p in points)
        assert nearest_distance(points, e, norm) == pytest.approx(brute)


# -- clustering ---------------------------------------------------------------


def test_two_blobs_two_clusters():
    rng = np.random.default_rng(0)
    blob_a = [imp(f"a{i}", rng.normal(0.0, 0.5, size=8)) for i in range(120)]
    blob_b = [imp(f"b{i}", rng.normal(50.0, 0.5, size=8)) for i in range(120)]
    clusters = cluster_for_summarization(blob_a + blob_b, target=120)
    assert len(clusters) == 2
    sizes = sorted(len(c) for c in clusters)
    assert sizes == [120, 120]
    members = {i.text_id for c in clusters for i in c}
    assert all(
        {m[0] for m in (i.text_id for i in c)} in ({"a"}, {"b"})
        for c in clusters
    )
    assert len(members) == 240


def test_fewer_than_target_single_cluster():
    rng = np.random.default_rng(1)
    impacts = [imp(f"t{i}", rng.normal(size=8)) for i in range(50)]
    clusters = cluster_for_summarization(impacts, target=120)
    assert len(clusters) == 1
    assert len(clusters[0]) == 50


@settings(max_examples=20, deadline=None)
@given(n=st.integers(min_value=1, max_value=300), seed=st.integers(0, 50))
def test_clustering_partitions(n, seed):
    rng = np.random.default_rng(seed)
    impacts = [imp(f"t{i:03d}", rng.normal(size=8)) for i in range(n)]
    clusters = cluster_for_summarization(impacts, target=40)
    ids = [i.text_id for c in clusters for i in c]
    assert sorted(ids) == sorted(i.text_id for i in impacts)
    assert len(set(ids)) == n
    if len(clusters) > 1:
        small = [c for c in clusters if len(c) < 20]
        assert len(small) <= 1
        assert all(len(c) <= 60 for c in clusters)


def test_default_divisions_positive():
    assert default_divisions(0, 3) == (1, 1, 1, 1)
    assert all(d >= 1 for d in default_divisions(5000, 3))


def test_grid_stats_shape():
    rng = np.random.default_rng(4)
    impacts = [imp(f"t{i}", rng.normal(size=8)) for i in range(30)]
    grid = grid_of(impacts, (2, 2, 2, 2))
    stats = grid.stats(divergences_for(grid))
    assert stats["indexed_impacts"] == 30
    assert sum(
        int(k) * v for k, v in stats["occupancy_histogram"].items()
    ) == 30
    assert "divergence_quantiles" in stats


def test_divergence_records_sorted_and_nonnegative():
    from rhetsum.cubes import divergence_records

    rng = np.random.default_rng(6)
    impacts = [imp(f"t{i}", rng.normal(size=8), n_cores=3) for i in range(6)]
    cores = {i.text_id: rng.normal(size=(3, 8)) for i in impacts}
    grid = build_grid(impacts, cores, (2, 2, 2, 2))
    records = divergence_records(grid)
    assert [r.text_id for r in records] == sorted(i.text_id for i in impacts)
    assert all(r.div >= 0 for r in records)
    assert records[0].div == divergence(grid, records[0].text_id)
