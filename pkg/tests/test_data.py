import numpy as np
import pytest

from covggm import (
    CovariateKind,
    PenaltyConfig,
    center_responses,
    infer_kinds,
    standardize_covariates,
    validate_dataset,
)
from covggm.errors import (
    BinaryViolation,
    DegenerateColumn,
    DimensionMismatch,
    NonFinite,
)


def _valid_inputs():
    X = np.arange(12, dtype=float).reshape(4, 3)
    U = np.column_stack([[0.0, 1, 1, 0], [0.3, -1.2, 0.7, 2.0]])
    return X, U, ["binary", "continuous"]


class TestValidateDataset:
    def test_valid_inputs_accepted(self):
        X, U, kinds = _valid_inputs()
        d = validate_dataset(X, U, kinds)
        assert (d.n, d.p, d.q) == (4, 3, 2)
        assert d.covariate_kinds == (CovariateKind.BINARY, CovariateKind.CONTINUOUS)

    def test_row_count_mismatch(self):
        X, U, kinds = _valid_inputs()
        with pytest.raises(DimensionMismatch):
            validate_dataset(X, np.vstack([U, U[:1]]), kinds)

    def test_binary_violation(self):
        X, U, kinds = _valid_inputs()
        U = U.copy()
        U[2, 0] = 0.5
        with pytest.raises(BinaryViolation):
            validate_dataset(X, U, kinds)

    def test_non_finite_rejected(self):
        X, U, kinds = _valid_inputs()
        X = X.copy()
        X[0, 0] = np.nan
        with pytest.raises(NonFinite):
            validate_dataset(X, U, kinds)

    def test_too_few_responses(self):
        X, U, kinds = _valid_inputs()
        with pytest.raises(DimensionMismatch):
            validate_dataset(X[:, :1], U, kinds)

    def test_arrays_are_read_only(self):
        X, U, kinds = _valid_inputs()
        d = validate_dataset(X, U, kinds)
        with pytest.raises(ValueError):
            d.X[0, 0] = 1.0


class TestStandardizeCovariates:
    def test_symmetric_column(self):
        X = np.zeros((3, 2))
        U = np.array([[1.0], [2.0], [3.0]])
        d = validate_dataset(X, U, ["continuous"])
        out, _ = standardize_covariates(d)
        np.testing.assert_allclose(out.U[:, 0], [-1.0, 0.0, 1.0])

    def test_binary_column_untouched(self):
        X = np.zeros((4, 2))
        U = np.column_stack([[0.0, 1, 1, 0], [1.0, 2, 3, 4]])
        d = validate_dataset(X, U, ["binary", "continuous"])
        out, rec = standardize_covariates(d)
        np.testing.assert_array_equal(out.U[:, 0], U[:, 0])
        assert rec.means[0] == 0.0 and rec.sds[0] == 1.0

    def test_degenerate_column(self):
        X = np.zeros((3, 2))
        U = np.array([[2.0], [2.0], [2.0]])
        d = validate_dataset(X, U, ["continuous"])
        with pytest.raises(DegenerateColumn):
            standardize_covariates(d)

    def test_round_trip(self, rng):
        X = rng.normal(size=(30, 2))
        U = np.column_stack(
            [rng.integers(0, 2, 30).astype(float), rng.normal(2.0, 3.0, 30), rng.uniform(size=30)]
        )
        d = validate_dataset(X, U, ["binary", "continuous", "continuous"])
        out, rec = standardize_covariates(d)
        back = rec.inverse(out.U)
        np.testing.assert_allclose(back, U, rtol=1e-12, atol=1e-12)

    def test_unit_variance(self, rng):
        X = rng.normal(size=(50, 2))
        U = rng.normal(5.0, 2.5, size=(50, 2))
        d = validate_dataset(X, U, ["continuous", "continuous"])
        out, _ = standardize_covariates(d)
        np.testing.assert_allclose(out.U.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.U.std(axis=0, ddof=1), 1.0, rtol=1e-12)


class TestInferKinds:
    def test_binary_detection(self):
        U = np.column_stack([[0.0, 1, 0], [0.5, 0.1, 0.2]])
        assert infer_kinds(U) == (CovariateKind.BINARY, CovariateKind.CONTINUOUS)


class TestCenterResponses:
    def test_column_means_removed(self, rng):
        X = rng.normal(3.0, 1.0, size=(20, 3))
        U = rng.normal(size=(20, 1))
        d = validate_dataset(X, U, ["continuous"])
        out, means = center_responses(d)
        np.testing.assert_allclose(out.X.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(means, X.mean(axis=0))


class TestPenaltyConfig:
    def test_mixture_round_trip_exact(self):
        for alpha in (0.1, 0.3, 0.5, 0.7, 0.9):
            for lambda0 in (0.3, 1.0, 2.718):
                pen = PenaltyConfig.from_mixture(alpha, lambda0)
                assert pen.alpha_s == alpha
                assert pen.lambda0 == lambda0
                assert pen.lam + pen.lam_g == lambda0

    def test_direct_construction(self):
        pen = PenaltyConfig(0.2, 0.3)
        assert pen.lambda0 == pytest.approx(0.5)
        assert pen.alpha_s == pytest.approx(0.4)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            PenaltyConfig(-0.1, 0.0)
        with pytest.raises(ValueError):
            PenaltyConfig.from_mixture(1.2, 1.0)

    def test_pure_lasso_edge(self):
        pen = PenaltyConfig.from_mixture(1.0, 0.7)
        assert pen.lam == 0.7
        assert pen.lam_g == 0.0
