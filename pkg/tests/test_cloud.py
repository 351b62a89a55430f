import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_voxel_groups, same_partition
from superseg import PointCloud, VoxelGridSpec, voxel_partition_baseline, \
    voxel_subsample


def make_cloud(positions, **kwargs):
    return PointCloud(positions=np.asarray(positions, dtype=np.float64),
                      **kwargs)


class TestPointCloud:
    def test_basic_fields(self):
        cloud = make_cloud([[0, 0, 0], [1, 0, 0]],
                           labels=np.array([0, 1]))
        assert cloud.n_points == 2
        assert cloud.n_classes == 2

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            make_cloud([[0, 0], [1, 0]])
        with pytest.raises(ValueError):
            make_cloud([[0, 0, 0]], colors=np.zeros((2, 3)))
        with pytest.raises(ValueError):
            make_cloud([[0, 0, 0]], intensity=np.zeros(3))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            make_cloud([[0, 0, np.nan]])
        with pytest.raises(ValueError):
            make_cloud([[0, 0, np.inf]])

    def test_labels_must_fit_declared_classes(self):
        with pytest.raises(ValueError):
            PointCloud(positions=np.zeros((2, 3)),
                       labels=np.array([0, 5]), n_classes=3)


class TestVoxelSubsample:
    def test_two_cells_on_a_line(self):
        # cell size 1, points at x = 0.1, 0.2 and 1.5: two voxels
        cloud = make_cloud([[0.1, 0, 0], [0.2, 0, 0], [1.5, 0, 0]])
        sub, inverse = voxel_subsample(cloud, VoxelGridSpec(1.0))
        assert sub.n_points == 2
        assert same_partition(inverse, [0, 0, 1])
        np.testing.assert_allclose(sub.positions[inverse[0]],
                                   [0.15, 0, 0], atol=1e-12)

    def test_matches_hash_grid_oracle(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 120))
            positions = rng.uniform(-3, 3, size=(n, 3))
            cell = float(rng.uniform(0.3, 2.0))
            cloud = make_cloud(positions)
            sub, inverse = voxel_subsample(cloud, VoxelGridSpec(cell))
            oracle = brute_voxel_groups(positions, cell)
            assert sub.n_points == len(oracle)
            # identical grouping
            oracle_labels = np.empty(n, dtype=np.int64)
            for gid, members in enumerate(oracle.values()):
                oracle_labels[members] = gid
            assert same_partition(inverse, oracle_labels)
            # centroids exact per group
            for gid in range(sub.n_points):
                members = np.flatnonzero(inverse == gid)
                np.testing.assert_allclose(
                    sub.positions[gid], positions[members].mean(axis=0),
                    atol=1e-12)

    def test_majority_labels_tie_breaks_to_smaller_class(self):
        cloud = make_cloud([[0, 0, 0], [0.1, 0, 0], [0.2, 0, 0],
                            [0.3, 0, 0]],
                           labels=np.array([2, 2, 1, 1]))
        sub, _ = voxel_subsample(cloud, VoxelGridSpec(10.0))
        assert sub.labels.tolist() == [1]

    def test_color_and_intensity_means(self):
        cloud = make_cloud([[0, 0, 0], [0.2, 0, 0]],
                           colors=np.array([[0.0, 0.0, 0.0],
                                            [1.0, 1.0, 1.0]]),
                           intensity=np.array([0.0, 0.5]))
        sub, _ = voxel_subsample(cloud, VoxelGridSpec(1.0))
        np.testing.assert_allclose(sub.colors, [[0.5, 0.5, 0.5]])
        np.testing.assert_allclose(sub.intensity, [0.25])

    def test_cell_size_must_be_positive(self):
        with pytest.raises(ValueError):
            VoxelGridSpec(0.0)
        with pytest.raises(ValueError):
            VoxelGridSpec(-1.0)

    def test_idempotent_on_lattice_cloud(self):
        # integer lattice with cell 1: each centroid is alone in its cell
        # and re-gridding cannot move any centroid across a boundary
        xs = np.arange(5, dtype=np.float64) + 0.5
        grid = np.array([[x, y, 0.0] for x in xs for y in xs])
        cloud = make_cloud(grid)
        sub, _ = voxel_subsample(cloud, VoxelGridSpec(1.0))
        again, inverse = voxel_subsample(sub, VoxelGridSpec(1.0))
        assert again.n_points == sub.n_points
        assert same_partition(inverse, np.arange(sub.n_points))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_every_point_maps_into_its_voxel(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 60))
        positions = rng.uniform(-2, 2, size=(n, 3))
        cell = float(rng.uniform(0.2, 1.5))
        cloud = make_cloud(positions)
        sub, inverse = voxel_subsample(cloud, VoxelGridSpec(cell))
        assert inverse.shape == (n,)
        assert inverse.min() >= 0 and inverse.max() == sub.n_points - 1
        # a voxel's members all share the grid key of the original cloud
        keys = np.floor((positions - positions.min(axis=0)) / cell)
        for gid in range(sub.n_points):
            member_keys = keys[inverse == gid]
            assert (member_keys == member_keys[0]).all()


class TestVoxelBaseline:
    def test_baseline_is_voxel_grouping(self, rng):
        positions = rng.uniform(0, 4, size=(80, 3))
        cloud = make_cloud(positions)
        assignment = voxel_partition_baseline(cloud, VoxelGridSpec(0.8))
        _, inverse = voxel_subsample(cloud, VoxelGridSpec(0.8))
        assert same_partition(assignment, inverse)
        assert assignment.min() == 0
        assert len(np.unique(assignment)) == assignment.max() + 1
