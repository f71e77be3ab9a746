import math

import numpy as np
import pytest

from tora import (
    ConfigurationError,
    DegenerateInputError,
    SemanticVector,
    ToraConfig,
    ValidationError,
    apply_tora,
    mdc_elbow,
    pool_semantic_vector,
    principal_split,
    project_onto_complement,
    residual_alignment,
    svd,
    token_spacing,
    total_variance,
    variance_scale_up,
)


def standardized_matrix(seed, tokens=6, dim=5):
    """Random matrix with per-dimension mean zero and total variance one."""
    e = np.random.default_rng(seed).normal(size=(tokens, dim))
    e -= e.mean(axis=0)
    return e / math.sqrt((e**2).sum() / tokens)


class TestVarianceScaleUp:
    def test_standardized_identity(self):
        e = standardized_matrix(0)
        out = variance_scale_up(e, 1.0)
        assert np.abs(out - e).max() < 1e-10

    def test_variance_forced_to_sigma_squared(self):
        e = np.random.default_rng(1).normal(size=(9, 4)) * 3.0 + 2.0
        out = variance_scale_up(e, 2.0)
        assert total_variance(out) == pytest.approx(4.0, rel=1e-8)

    def test_two_token_hand_values(self):
        # direct formula evaluation: mean [2, 2], total variance 2, so each
        # deviation shrinks by 1/sqrt(2)
        out = variance_scale_up([[1.0, 1.0], [3.0, 3.0]], 1.0)
        lo = 2.0 - 1.0 / math.sqrt(2.0)
        hi = 2.0 + 1.0 / math.sqrt(2.0)
        assert np.abs(out - [[lo, lo], [hi, hi]]).max() < 1e-12
        assert total_variance(out) == pytest.approx(1.0, rel=1e-12)

    def test_mean_preserved(self):
        e = np.random.default_rng(2).normal(size=(7, 3)) + 5.0
        out = variance_scale_up(e, 1.7)
        assert np.abs(out.mean(axis=0) - e.mean(axis=0)).max() < 1e-10

    def test_zero_variance_rejected(self):
        with pytest.raises(DegenerateInputError):
            variance_scale_up([[1.0, 2.0], [1.0, 2.0]], 1.3)

    def test_single_token_rejected(self):
        with pytest.raises(ValidationError):
            variance_scale_up([[1.0, 2.0]], 1.3)


class TestPoolSemanticVector:
    def test_equal_inputs_give_zero(self):
        e = np.random.default_rng(3).normal(size=(4, 6))
        assert np.abs(pool_semantic_vector(e, e).direction).max() == 0.0

    def test_single_token_is_row_difference(self):
        cond = np.array([[1.0, 2.0, 3.0]])
        null = np.array([[0.5, 0.0, -1.0]])
        s = pool_semantic_vector(cond, null)
        assert np.array_equal(s.direction, [0.5, 2.0, 4.0])

    def test_matches_mean_of_differences(self):
        rng = np.random.default_rng(4)
        cond, null = rng.normal(size=(5, 8)), rng.normal(size=(5, 8))
        expected = np.array([(cond[:, j] - null[:, j]).mean() for j in range(8)])
        assert np.abs(pool_semantic_vector(cond, null).direction - expected).max() < 1e-14

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            pool_semantic_vector(np.ones((2, 3)), np.ones((3, 2)))


class TestTokenSpacing:
    def _factors_split(self, e, k):
        factors = svd(e)
        return factors, principal_split(factors, k)

    def test_sigma_one_is_identity(self):
        factors, split = self._factors_split(np.random.default_rng(5).normal(size=(5, 5)), 2)
        assert np.array_equal(token_spacing(factors, split, 1.0), factors.singular_values)

    def test_direct_substitution(self):
        factors, split = self._factors_split(np.diag([4.0, 2.0, 1.0]), 2)
        assert np.allclose(token_spacing(factors, split, 2.0), [8.0, 4.0, 1.0])

    def test_default_sigma_scales_top_by_exactly_1_3(self):
        e = np.random.default_rng(6).normal(size=(6, 7))
        factors = svd(e)
        k = mdc_elbow(factors.singular_values)
        scaled = token_spacing(factors, principal_split(factors, k), 1.3)
        assert np.array_equal(scaled[:k], factors.singular_values[:k] * 1.3)
        assert np.array_equal(scaled[k:], factors.singular_values[k:])


class TestResidualAlignment:
    def _split(self, seed, tokens=7, dim=12, k=3):
        factors = svd(np.random.default_rng(seed).normal(size=(tokens, dim)))
        return principal_split(factors, k)

    def test_semantic_inside_principal_span_skips(self):
        split = self._split(7)
        s = SemanticVector(direction=split.principal_basis @ np.array([1.0, -2.0, 0.5]))
        result = residual_alignment(split, s)
        assert result.skipped
        assert np.array_equal(result.residual_basis, split.residual_basis)

    def test_already_aligned_gives_zero_angle(self):
        split = self._split(8)
        s = SemanticVector(direction=3.0 * split.residual_basis[:, 0])
        result = residual_alignment(split, s)
        assert not result.skipped
        assert result.angle == 0.0
        assert np.abs(result.residual_basis - split.residual_basis).max() < 1e-12

    def test_alignment_and_orthonormality(self):
        rng = np.random.default_rng(9)
        for seed in range(20):
            split = self._split(seed)
            s = SemanticVector(direction=rng.normal(size=12))
            result = residual_alignment(split, s)
            projected = project_onto_complement(s.direction, split.principal_basis)
            target = projected / np.linalg.norm(projected)
            assert np.abs(result.residual_basis[:, 0] - target).max() < 1e-10
            joined = np.hstack([split.principal_basis, result.residual_basis])
            gram = joined.T @ joined
            assert np.abs(gram - np.eye(gram.shape[0])).max() < 1e-8

    def test_empty_residual_rejected(self):
        factors = svd(np.random.default_rng(10).normal(size=(4, 4)))
        split = principal_split(factors, 4)
        with pytest.raises(ConfigurationError):
            residual_alignment(split, SemanticVector(direction=np.ones(4)))


class TestApplyTora:
    def test_identity_configuration(self):
        e = np.random.default_rng(11).normal(size=(6, 10))
        zero = SemanticVector(direction=np.zeros(10))
        result = apply_tora(e, zero, ToraConfig(sigma=1.0))
        assert result.alignment_skipped
        assert result.skip_reason == "zero_projection"
        assert np.abs(result.embedding - e).max() < 1e-8

    def test_scaled_spectrum_survives_reconstruction(self):
        e = np.random.default_rng(12).normal(size=(8, 12))
        result = apply_tora(e, None, ToraConfig(sigma=1.3, enable_alignment=False))
        # re-decompose the output and compare spectra
        back = np.linalg.svd(result.embedding, compute_uv=False)
        assert np.abs(np.sort(back)[::-1] - np.sort(result.singular_values)[::-1]).max() < 1e-8

    def test_frobenius_bookkeeping(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            e = rng.normal(size=(8, 32))
            s = SemanticVector(direction=rng.normal(size=32))
            result = apply_tora(e, s, ToraConfig(sigma=1.3))
            frob2 = np.linalg.norm(result.embedding) ** 2
            assert abs(frob2 - (result.singular_values**2).sum()) < 1e-10 * frob2
            assert np.linalg.norm(result.embedding) > np.linalg.norm(e)

    def test_alignment_does_not_change_norm_or_spectrum(self):
        rng = np.random.default_rng(14)
        e = rng.normal(size=(9, 20))
        s = SemanticVector(direction=rng.normal(size=20))
        on = apply_tora(e, s, ToraConfig(sigma=1.3))
        off = apply_tora(e, s, ToraConfig(sigma=1.3, enable_alignment=False))
        assert not on.alignment_skipped
        norm_on, norm_off = np.linalg.norm(on.embedding), np.linalg.norm(off.embedding)
        assert abs(norm_on - norm_off) < 1e-10 * norm_off
        assert np.array_equal(on.singular_values, off.singular_values)

    def test_elbow_override(self):
        e = np.random.default_rng(15).normal(size=(6, 6))
        result = apply_tora(e, None, ToraConfig(sigma=1.2, elbow_override=4))
        assert result.elbow_index == 4
        with pytest.raises(ValidationError):
            apply_tora(e, None, ToraConfig(sigma=1.2, elbow_override=6))

    def test_rejects_thin_inputs(self):
        with pytest.raises(ValidationError):
            apply_tora(np.ones((1, 5)), None, ToraConfig())


class TestToraConfig:
    def test_validation(self):
        with pytest.raises(ValidationError):
            ToraConfig(sigma=0.0)
        with pytest.raises(ValidationError):
            ToraConfig(elbow_override=0)
        with pytest.raises(ConfigurationError):
            ToraConfig(variance_mode="per_dimension")
        with pytest.raises(ConfigurationError):
            ToraConfig(degenerate_semantic_policy="error")
