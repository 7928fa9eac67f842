import numpy as np
import pytest
from oracles import schur_variance_via_inv

from mmidict.errors import NumericalError, ValidationError
from mmidict.gp import (
    KernelMatrix,
    conditional_entropy,
    conditional_variance,
    kernel_from_codes,
    kernel_linear,
    sparse_support_neighbors,
    variances_exclude_self,
    variances_shared_cond,
)
from mmidict.pursuit import SparseCodeTable
from mmidict.synth import random_pd_kernel


def _codes_from_dense(X):
    K, N = X.shape
    supports = []
    coeffs = []
    for j in range(N):
        nz = np.flatnonzero(X[:, j])
        supports.append(nz.astype(np.int64))
        coeffs.append(X[nz, j])
    return SparseCodeTable(n_atoms=K, n_signals=N, sparsity=K, supports=supports, coeffs=coeffs)


class TestKernelFromCodes:
    def test_identical_rows_unit_covariance(self):
        X = np.array([[1.0, -1.0], [1.0, -1.0]])
        kern = kernel_from_codes(_codes_from_dense(X), tau=0.0, jitter=0.0)
        np.testing.assert_allclose(kern.values[0, 1], 1.0)

    def test_sign_flip_negates(self):
        X = np.array([[1.0, -1.0], [-1.0, 1.0]])
        kern = kernel_from_codes(_codes_from_dense(X), tau=0.0, jitter=0.0)
        np.testing.assert_allclose(kern.values[0, 1], -1.0)

    def test_unused_atom_gets_jitter_only(self):
        X = np.array([[1.0, -1.0], [0.0, 0.0]])
        kern = kernel_from_codes(_codes_from_dense(X), tau=0.0, jitter=1e-8)
        np.testing.assert_allclose(kern.values[1, 1], 1e-8)
        np.testing.assert_allclose(kern.values[0, 1], 0.0)

    def test_single_signal_rejected(self):
        X = np.array([[1.0], [2.0]])
        with pytest.raises(ValidationError, match="covariance undefined"):
            kernel_from_codes(_codes_from_dense(X))

    def test_exact_symmetry(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(12, 30))
        kern = kernel_from_codes(_codes_from_dense(X))
        assert np.array_equal(kern.values, kern.values.T)


class TestKernelLinear:
    def test_orthonormal_frames_identity(self):
        kern = kernel_linear(np.eye(3), jitter=1e-8)
        np.testing.assert_allclose(kern.values, np.eye(3) * (1 + 1e-8))

    def test_duplicated_frame_block(self):
        f = np.array([[1.0, 1.0], [0.0, 0.0]])
        kern = kernel_linear(f, jitter=1e-8)
        np.testing.assert_allclose(kern.values[0, 1], 1.0)
        # jitter keeps the rank-deficient block factorizable
        assert conditional_variance(kern, 0, [1]) > 0

    def test_dot_product_entry(self):
        f = np.array([[1.0, 0.6], [0.0, 0.8]])
        kern = kernel_linear(f, jitter=0.0)
        np.testing.assert_allclose(kern.values[0, 1], 0.6)


class TestConditionalVariance:
    def test_empty_cond_is_marginal(self):
        kern = KernelMatrix(values=np.diag([4.0, 1.0]))
        assert conditional_variance(kern, 0, []) == 4.0

    def test_two_by_two_hand_value(self):
        kern = KernelMatrix(values=np.array([[1.0, 0.5], [0.5, 1.0]]))
        np.testing.assert_allclose(conditional_variance(kern, 0, [1]), 0.75)

    def test_identity_independent(self):
        kern = KernelMatrix(values=np.eye(4))
        for cond in ([], [1], [1, 2], [1, 2, 3]):
            np.testing.assert_allclose(conditional_variance(kern, 0, cond), 1.0)

    def test_target_in_cond_rejected(self):
        kern = KernelMatrix(values=np.eye(3))
        with pytest.raises(ValidationError):
            conditional_variance(kern, 1, [1, 2])

    def test_not_pd_raises(self):
        vals = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        kern = KernelMatrix(values=vals)
        with pytest.raises(NumericalError, match="not PD"):
            conditional_variance(kern, 2, [0, 1])

    def test_matches_dense_inverse_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            K = random_pd_kernel(rng, 10)
            kern = KernelMatrix(values=K)
            size = int(rng.integers(1, 9))
            cond = rng.choice(10, size=size, replace=False)
            target = int(rng.choice(list(set(range(10)) - set(cond.tolist()))))
            want = schur_variance_via_inv(K, target, sorted(cond.tolist()))
            got = conditional_variance(kern, target, np.sort(cond))
            np.testing.assert_allclose(got, want, atol=1e-8)

    def test_information_never_hurts(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            K = random_pd_kernel(rng, 8)
            kern = KernelMatrix(values=K)
            small = [1, 3]
            large = [1, 3, 5, 6]
            assert (
                conditional_variance(kern, 0, small)
                >= conditional_variance(kern, 0, large) - 1e-9
            )

    def test_submodular_gains_along_greedy_path(self):
        rng = np.random.default_rng(9)
        K = random_pd_kernel(rng, 8)
        kern = KernelMatrix(values=K)
        chosen = []
        gains = []
        for _ in range(5):
            remaining = [i for i in range(8) if i not in chosen]
            hs = [conditional_entropy(kern, t, chosen) for t in remaining]
            best = remaining[int(np.argmax(hs))]
            gains.append(max(hs))
            chosen.append(best)
        assert np.all(np.diff(gains) <= 1e-9)


class TestConditionalEntropy:
    def test_unit_variance_value(self):
        kern = KernelMatrix(values=np.eye(2))
        want = 0.5 * np.log(2 * np.pi * np.e)
        np.testing.assert_allclose(conditional_entropy(kern, 0, []), want)
        assert abs(want - 1.41894) < 1e-5

    def test_zero_at_inverse_2pie(self):
        v = 1.0 / (2 * np.pi * np.e)
        kern = KernelMatrix(values=np.diag([v, 1.0]))
        np.testing.assert_allclose(conditional_entropy(kern, 0, []), 0.0, atol=1e-15)

    def test_monotone_in_variance(self):
        k1 = KernelMatrix(values=np.diag([2.0, 1.0]))
        k2 = KernelMatrix(values=np.diag([3.0, 1.0]))
        assert conditional_entropy(k2, 0, []) > conditional_entropy(k1, 0, [])


class TestSparseSupport:
    def test_block_diagonal_neighbors_within_block(self):
        vals = np.zeros((4, 4))
        vals[:2, :2] = [[1.0, 0.5], [0.5, 1.0]]
        vals[2:, 2:] = [[1.0, 0.3], [0.3, 1.0]]
        kern = KernelMatrix(values=vals, tau=1e-6)
        assert set(sparse_support_neighbors(kern, 0)) == {0, 1}
        assert set(sparse_support_neighbors(kern, 3)) == {2, 3}

    def test_tau_zero_returns_all(self):
        kern = KernelMatrix(values=np.eye(3), tau=0.0)
        assert len(sparse_support_neighbors(kern, 1)) == 3

    def test_sparse_path_matches_dense_when_dropped_zero(self):
        rng = np.random.default_rng(3)
        from mmidict.synth import block_diag_kernel

        vals = block_diag_kernel(rng, 3, 4)
        kern = KernelMatrix(values=vals, tau=1e-9)
        cond = np.array([1, 2, 5, 9, 10])
        for target in (0, 6, 11):
            nbrs = sparse_support_neighbors(kern, target)
            restricted = np.intersect1d(cond, nbrs)
            dense = conditional_variance(kern, target, cond)
            sparse = conditional_variance(kern, target, restricted)
            np.testing.assert_allclose(sparse, dense, atol=1e-8)

    def test_sparse_path_bound_with_small_entries(self):
        rng = np.random.default_rng(8)
        tau = 1e-4
        for _ in range(10):
            base = random_pd_kernel(rng, 10)
            # shrink random off-diagonal entries below tau
            mask = rng.random((10, 10)) < 0.4
            mask = np.triu(mask, 1)
            damp = np.where(mask | mask.T, tau * 0.1, 1.0)
            vals = base * damp
            vals = np.triu(vals) + np.triu(vals, 1).T
            vals += 10 * np.eye(10)  # keep it comfortably PD
            kern = KernelMatrix(values=vals, tau=tau)
            cond = np.array([1, 3, 4, 7, 8])
            target = 0
            nbrs = sparse_support_neighbors(kern, target)
            restricted = np.intersect1d(cond, nbrs)
            dense = conditional_variance(kern, target, cond)
            sparse = conditional_variance(kern, target, restricted)
            assert abs(sparse - dense) <= 10 * tau * len(cond)


class TestBatchedHelpers:
    def test_shared_cond_matches_per_query(self):
        rng = np.random.default_rng(12)
        K = random_pd_kernel(rng, 9)
        kern = KernelMatrix(values=K)
        cond = np.array([0, 4])
        targets = np.array([1, 2, 3, 5])
        batch = variances_shared_cond(kern, cond, targets)
        for t, v in zip(targets, batch):
            np.testing.assert_allclose(v, conditional_variance(kern, int(t), cond), atol=1e-10)

    def test_exclude_self_matches_per_query(self):
        rng = np.random.default_rng(13)
        K = random_pd_kernel(rng, 9)
        kern = KernelMatrix(values=K)
        closure = np.array([0, 2, 3, 6, 8])
        targets = np.array([2, 6, 8])
        batch = variances_exclude_self(kern, targets, [closure] * 3)
        for t, v in zip(targets, batch):
            cond = closure[closure != t]
            np.testing.assert_allclose(v, conditional_variance(kern, int(t), cond), atol=1e-10)
