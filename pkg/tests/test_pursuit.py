import numpy as np
import pytest

from mmidict import synth
from mmidict.errors import ValidationError
from mmidict.pursuit import (
    Dictionary,
    SparseCodeTable,
    ksvd_train,
    omp_encode,
    read_codes_csv,
    read_dictionary_csv,
    reconstruction_rmse,
    write_codes_csv,
    write_dictionary_csv,
)


def _dict(cols):
    return Dictionary(atoms=np.asarray(cols, dtype=np.float64).T)


class TestDictionaryType:
    def test_non_unit_atom_rejected(self):
        with pytest.raises(ValidationError, match="unit"):
            _dict([[1.0, 1.0]])

    def test_class_dist_must_be_distribution(self):
        with pytest.raises(ValidationError, match="distribution"):
            Dictionary(atoms=np.eye(2), class_dist=np.array([[0.5, 0.4], [0.5, 0.5]]))

    def test_prior_must_sum_to_one(self):
        with pytest.raises(ValidationError, match="distribution"):
            Dictionary(atoms=np.eye(2), atom_prior=np.array([0.9, 0.2]))


class TestOmp:
    def test_hand_example_best_correlation(self):
        # correlations with (0.6, 0.8): 0.6, 0.8, 1.4/sqrt(2) ~ 0.98995
        d = _dict([[1.0, 0.0], [0.0, 1.0], [1 / np.sqrt(2), 1 / np.sqrt(2)]])
        codes = omp_encode(d, np.array([[0.6], [0.8]]), 1)
        assert list(codes.supports[0]) == [2]
        np.testing.assert_allclose(codes.coeffs[0], [1.4 / np.sqrt(2)], rtol=1e-12)

    def test_exact_atom_recovered(self):
        d = _dict([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        codes = omp_encode(d, d.atoms[:, [1]], 2)
        assert list(codes.supports[0]) == [1]
        np.testing.assert_allclose(codes.coeffs[0], [1.0])
        assert reconstruction_rmse(d, codes, d.atoms[:, [1]]) < 1e-12

    def test_zero_signal_empty_support(self):
        d = _dict([[1.0, 0.0], [0.0, 1.0]])
        codes = omp_encode(d, np.zeros((2, 1)), 2)
        assert len(codes.supports[0]) == 0

    def test_support_bound_and_residual_orthogonality(self):
        rng = np.random.default_rng(3)
        D = synth.random_unit_columns(rng, 20, 50)
        d = Dictionary(atoms=D)
        Y = rng.normal(size=(20, 30))
        T = 6
        codes = omp_encode(d, Y, T)
        X = codes.to_dense()
        R = Y - D @ X
        for j in range(30):
            sup = codes.supports[j]
            assert len(sup) <= T
            if len(sup):
                # least-squares coefficients leave the residual orthogonal
                assert np.max(np.abs(D[:, sup].T @ R[:, j])) < 1e-8

    def test_dimension_mismatch(self):
        d = _dict([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ValidationError, match="mismatch"):
            omp_encode(d, np.zeros((3, 1)), 1)

    def test_non_normalized_dictionary_rejected_at_construction(self):
        with pytest.raises(ValidationError, match="unit"):
            Dictionary(atoms=np.array([[2.0], [0.0]]))

    def test_sparsity_beyond_preconditions(self):
        d = _dict([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ValidationError, match="sparsity"):
            omp_encode(d, np.zeros((2, 1)), 3)

    def test_noiseless_support_recovery_smoke(self):
        rng = np.random.default_rng(11)
        hits = 0
        trials = 30
        for _ in range(trials):
            D = synth.random_unit_columns(rng, 64, 128)
            while synth.mutual_coherence(D) > 0.5:
                D = synth.random_unit_columns(rng, 64, 128)
            Y, supports, _ = synth.sparse_signals(rng, D, 1, 5)
            codes = omp_encode(Dictionary(atoms=D), Y, 5)
            hits += int(set(codes.supports[0]) == set(supports[0]))
        assert hits == trials


class TestRmse:
    def test_exact_reproduction_zero(self):
        d = _dict([[1.0, 0.0], [0.0, 1.0]])
        Y = np.array([[2.0], [0.0]])
        codes = omp_encode(d, Y, 1)
        assert reconstruction_rmse(d, codes, Y) == 0.0

    def test_empty_codes_norm(self):
        d = _dict([[1.0, 0.0], [0.0, 1.0]])
        Y = np.array([[3.0], [4.0]])
        empty = SparseCodeTable(
            n_atoms=2, n_signals=1, sparsity=1,
            supports=[np.array([], dtype=np.int64)], coeffs=[np.array([])],
        )
        np.testing.assert_allclose(
            reconstruction_rmse(d, empty, Y), np.linalg.norm(Y) / np.sqrt(2)
        )

    def test_hand_value(self):
        # single column (1,0), single atom (0,1), zero code -> ||Y||_F/sqrt(nN) = 1/sqrt(2)
        d = _dict([[0.0, 1.0]])
        Y = np.array([[1.0], [0.0]])
        empty = SparseCodeTable(
            n_atoms=1, n_signals=1, sparsity=1,
            supports=[np.array([], dtype=np.int64)], coeffs=[np.array([])],
        )
        np.testing.assert_allclose(reconstruction_rmse(d, empty, Y), 1 / np.sqrt(2))


class TestKsvd:
    def test_exact_orthonormal_fixed_point(self):
        rng = np.random.default_rng(0)
        base = np.linalg.qr(rng.normal(size=(8, 8)))[0][:, :4]
        picks = rng.integers(0, 4, size=60)
        Y = base[:, picks] * rng.uniform(0.5, 2.0, size=60)
        d, codes, hist = ksvd_train(Y, 4, 1, iters=10, seed=5)
        assert hist[-1] < 1e-8

    def test_error_history_non_increasing(self):
        rng = np.random.default_rng(2)
        D0 = synth.random_unit_columns(rng, 16, 32)
        Y, _, _ = synth.sparse_signals(rng, D0, 200, 3)
        _, _, hist = ksvd_train(Y, 32, 3, iters=15, seed=9, rmse_tol=0.0)
        diffs = np.diff(hist)
        assert np.all(diffs <= 1e-9)

    def test_overcomplete_beyond_samples_rejected(self):
        with pytest.raises(ValidationError, match="over-complete"):
            ksvd_train(np.ones((4, 3)), 5, 1)

    def test_seed_determinism_bit_identical(self):
        rng = np.random.default_rng(4)
        D0 = synth.random_unit_columns(rng, 12, 20)
        Y, _, _ = synth.sparse_signals(rng, D0, 80, 2)
        d1, c1, h1 = ksvd_train(Y, 16, 2, iters=5, seed=123)
        d2, c2, h2 = ksvd_train(Y, 16, 2, iters=5, seed=123)
        np.testing.assert_array_equal(d1.atoms, d2.atoms)
        assert h1 == h2


class TestCsvIo:
    def test_dictionary_roundtrip(self, tmp_path):
        rng = np.random.default_rng(6)
        atoms = synth.random_unit_columns(rng, 5, 3)
        dist = np.array([[0.25, 0.75], [1.0, 0.0], [0.5, 0.5]])
        d = Dictionary(atoms=atoms, class_dist=dist)
        path = tmp_path / "d.csv"
        write_dictionary_csv(path, d)
        back = read_dictionary_csv(path)
        np.testing.assert_array_equal(back.atoms, d.atoms)
        np.testing.assert_array_equal(back.class_dist, dist)

    def test_codes_roundtrip(self, tmp_path):
        rng = np.random.default_rng(7)
        D = synth.random_unit_columns(rng, 6, 10)
        Y = rng.normal(size=(6, 4))
        codes = omp_encode(Dictionary(atoms=D), Y, 3)
        index = [("a", 0), ("a", 1), ("b", 0), ("b", 7)]
        path = tmp_path / "c.csv"
        write_codes_csv(path, codes, index)
        back = read_codes_csv(path, index, n_atoms=10)
        for j in range(4):
            np.testing.assert_array_equal(back.supports[j], codes.supports[j])
            np.testing.assert_array_equal(back.coeffs[j], codes.coeffs[j])
