import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import fd_gradient, naive_transition_loss
from superseg import (SampledEdges, TransitionConfig, affinity,
                      sample_edges, transition_loss)

# frozen by hand: -log(1 - exp(-1))
INTER_UNIT_LOSS = 0.45867514538708193


class TestAffinity:
    def test_identical_vectors(self):
        assert affinity(np.ones(3), np.ones(3)) == 1.0

    def test_unit_distance(self):
        a = affinity(np.zeros(2), np.array([1.0, 0.0]), tau=1.0)
        assert a == pytest.approx(np.exp(-1), rel=1e-12)
        assert a == pytest.approx(0.367879, abs=1e-6)

    def test_tau_scaling_identity(self):
        a2 = affinity(np.array([0.0]), np.array([2.0]), tau=2.0)
        a1 = affinity(np.array([0.0]), np.array([1.0]), tau=1.0)
        assert a2 == pytest.approx(a1, rel=1e-12)

    def test_symmetry_and_monotonicity(self, rng):
        p, q = rng.normal(size=(2, 4))
        assert affinity(p, q) == pytest.approx(affinity(q, p), rel=1e-15)
        far = q + 3 * (q - p)
        assert affinity(p, far) < affinity(p, q)

    def test_batched(self, rng):
        P, Q = rng.normal(size=(2, 10, 3))
        batch = affinity(P, Q)
        singles = [affinity(p, q) for p, q in zip(P, Q)]
        np.testing.assert_allclose(batch, singles, rtol=1e-15)


class TestSampleEdges:
    def test_quota_formula(self, rng):
        intra = rng.integers(0, 50, size=(1000, 2))
        inter = rng.integers(0, 50, size=(100, 2))
        cfg = TransitionConfig(rho_intra=0.1, seed=0)
        sampled = sample_edges(intra, inter, cfg)
        assert len(sampled.intra) == 11  # floor(0.1 * 100 / 0.9)
        assert len(sampled.inter) == 100
        np.testing.assert_array_equal(sampled.inter, inter)

    def test_rho_one_keeps_everything(self, rng):
        intra = rng.integers(0, 9, size=(40, 2))
        inter = rng.integers(0, 9, size=(5, 2))
        sampled = sample_edges(intra, inter,
                               TransitionConfig(rho_intra=1.0))
        assert len(sampled.intra) == 40

    def test_small_intra_clamped(self, rng):
        intra = rng.integers(0, 9, size=(5, 2))
        inter = rng.integers(0, 9, size=(1000, 2))
        sampled = sample_edges(intra, inter,
                               TransitionConfig(rho_intra=0.1))
        assert len(sampled.intra) == 5

    def test_no_inter_edges_keeps_all_intra(self, rng):
        intra = rng.integers(0, 9, size=(30, 2))
        inter = np.empty((0, 2), dtype=np.int64)
        sampled = sample_edges(intra, inter,
                               TransitionConfig(rho_intra=0.1))
        assert len(sampled.intra) == 30

    def test_kept_fraction_bound(self, rng):
        for _ in range(20):
            ni = int(rng.integers(1, 500))
            ne = int(rng.integers(1, 500))
            rho = float(rng.uniform(0.05, 0.95))
            sampled = sample_edges(rng.integers(0, 5, size=(ni, 2)),
                                   rng.integers(0, 5, size=(ne, 2)),
                                   TransitionConfig(rho_intra=rho))
            kept = len(sampled.intra)
            assert kept <= rho * (kept + ne) + 1e-9
            assert kept == min(ni, int(np.floor(rho * ne / (1 - rho))))

    def test_deterministic_per_seed(self, rng):
        intra = rng.integers(0, 50, size=(200, 2))
        inter = rng.integers(0, 50, size=(50, 2))
        a = sample_edges(intra, inter, TransitionConfig(seed=9))
        b = sample_edges(intra, inter, TransitionConfig(seed=9))
        np.testing.assert_array_equal(a.intra, b.intra)

    def test_subsample_is_subset_without_replacement(self, rng):
        intra = np.column_stack([np.arange(300), np.arange(300) + 1])
        inter = rng.integers(0, 5, size=(30, 2))
        sampled = sample_edges(intra, inter, TransitionConfig(seed=3))
        rows = {tuple(r) for r in sampled.intra.tolist()}
        assert len(rows) == len(sampled.intra)
        all_rows = {tuple(r) for r in intra.tolist()}
        assert rows <= all_rows

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TransitionConfig(tau=0.0)
        with pytest.raises(ValueError):
            TransitionConfig(rho_intra=0.0)
        with pytest.raises(ValueError):
            TransitionConfig(rho_intra=1.5)


def loss_of(F, intra=(), inter=(), tau=1.0):
    sampled = SampledEdges(
        intra=np.asarray(intra, dtype=np.int64).reshape(-1, 2),
        inter=np.asarray(inter, dtype=np.int64).reshape(-1, 2))
    return transition_loss(np.asarray(F, dtype=np.float64), sampled,
                           TransitionConfig(tau=tau))


class TestTransitionLoss:
    def test_identical_intra_pair_costs_nothing(self):
        out = loss_of([[1.0, 2.0], [1.0, 2.0]], intra=[[0, 1]])
        assert out.loss == 0.0
        np.testing.assert_array_equal(out.grad, np.zeros((2, 2)))

    def test_unit_inter_pair(self):
        out = loss_of([[0.0], [1.0]], inter=[[0, 1]])
        assert out.loss == pytest.approx(INTER_UNIT_LOSS, rel=1e-12)
        assert out.loss == pytest.approx(0.45868, abs=1e-5)

    def test_matches_naive_loss(self, rng):
        for _ in range(10):
            F = rng.normal(size=(12, 3))
            intra = rng.integers(0, 12, size=(8, 2))
            inter = rng.integers(0, 12, size=(6, 2))
            inter = inter[inter[:, 0] != inter[:, 1]]  # clamp path tested below
            out = loss_of(F, intra, inter)
            ref = naive_transition_loss(F, intra, inter, tau=1.0)
            assert out.loss == pytest.approx(ref, rel=1e-12)

    def test_gradient_matches_finite_differences(self, rng):
        cfg = TransitionConfig(tau=1.3)
        F = rng.normal(size=(20, 4))
        intra = rng.integers(0, 20, size=(15, 2))
        inter = rng.integers(0, 20, size=(10, 2))
        intra = intra[intra[:, 0] != intra[:, 1]]
        inter = inter[inter[:, 0] != inter[:, 1]]
        sampled = SampledEdges(intra=intra, inter=inter)
        out = transition_loss(F, sampled, cfg)
        fd = fd_gradient(lambda X: transition_loss(X, sampled, cfg).loss, F)
        err = np.abs(out.grad - fd).max() / max(1.0, np.abs(out.grad).max())
        assert err < 1e-5

    def test_clamp_counter_on_identical_inter_pair(self):
        out = loss_of([[1.0], [1.0]], inter=[[0, 1]])
        assert out.n_clamped == 1
        assert np.isfinite(out.loss)
        assert np.isfinite(out.grad).all()

    def test_no_clamping_on_healthy_data(self, rng):
        F = rng.normal(size=(10, 2))
        out = loss_of(F, inter=[[0, 1], [2, 3]])
        assert out.n_clamped == 0

    def test_zero_distance_intra_gradient_is_zero(self):
        # limit case: the direction singularity is removable
        F = [[2.0, 0.0], [2.0, 0.0], [0.0, 1.0]]
        out = loss_of(F, intra=[[0, 1], [1, 2]])
        fd_rows = transition_loss(
            np.asarray(F), SampledEdges(
                intra=np.array([[1, 2]]),
                inter=np.empty((0, 2), dtype=np.int64)),
            TransitionConfig()).grad
        np.testing.assert_allclose(out.grad, fd_rows, atol=1e-12)

    def test_loss_nonnegative_and_positive_with_inter(self, rng):
        F = rng.normal(size=(8, 3))
        out = loss_of(F, intra=rng.integers(0, 8, size=(5, 2)),
                      inter=[[0, 1]])
        assert out.loss > 0

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_gradient_property(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 10))
        F = rng.normal(size=(n, 2))
        pairs = rng.integers(0, n, size=(4, 2))
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        if len(pairs) < 2:
            return
        sampled = SampledEdges(intra=pairs[:1], inter=pairs[1:])
        # keep away from the clamp and the zero-distance corner
        d = np.linalg.norm(F[pairs[:, 0]] - F[pairs[:, 1]], axis=1)
        if d.min() < 1e-3:
            return
        cfg = TransitionConfig(tau=1.0)
        out = transition_loss(F, sampled, cfg)
        fd = fd_gradient(lambda X: transition_loss(X, sampled, cfg).loss, F)
        err = np.abs(out.grad - fd).max() / max(1.0, np.abs(out.grad).max())
        assert err < 1e-5
