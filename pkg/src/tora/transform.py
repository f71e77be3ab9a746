"""The embedding intervention: variance scale-up, token spacing (top-k
singular value scaling), residual alignment (rotating the residual basis
toward the projected semantic direction), and the composed pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, ValidationError
from .linalg import (
    PrincipalSplit,
    SvdFactors,
    apply_rotation,
    build_plane_rotation,
    mdc_elbow,
    principal_split,
    project_onto_complement,
    svd,
)

ZERO_PROJECTION_TOL = 1e-10
VARIANCE_MODES = ("per_matrix_scalar",)
DEGENERATE_POLICIES = ("skip_alignment",)


@dataclass(frozen=True)
class ToraConfig:
    """Knobs for the transform.

    ``sigma`` multiplies the top-k singular values (default 1.3).
    ``elbow_override`` pins k instead of detecting it; it must leave at
    least one residual direction, so it is capped at min(V, d) - 1.
    """

    sigma: float = 1.3
    elbow_override: int | None = None
    enable_alignment: bool = True
    variance_mode: str = "per_matrix_scalar"
    degenerate_semantic_policy: str = "skip_alignment"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if self.elbow_override is not None and self.elbow_override < 1:
            raise ValidationError(f"elbow_override must be >= 1, got {self.elbow_override}")
        if self.variance_mode not in VARIANCE_MODES:
            raise ConfigurationError(f"unknown variance_mode {self.variance_mode!r}")
        if self.degenerate_semantic_policy not in DEGENERATE_POLICIES:
            raise ConfigurationError(
                f"unknown degenerate_semantic_policy {self.degenerate_semantic_policy!r}"
            )


@dataclass(frozen=True)
class SemanticVector:
    """Pooled direction from conditional minus null embeddings."""

    direction: np.ndarray
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        direction = np.asarray(self.direction, dtype=np.float64)
        if direction.ndim != 1:
            raise ValidationError("semantic direction must be a 1-D vector")
        if not np.all(np.isfinite(direction)):
            raise ValidationError("semantic direction contains non-finite entries")
        object.__setattr__(self, "direction", direction)


@dataclass(frozen=True)
class AlignmentResult:
    residual_basis: np.ndarray
    skipped: bool
    angle: float | None = None


@dataclass(frozen=True)
class TransformResult:
    """Transformed embedding plus the diagnostics a manifest needs."""

    embedding: np.ndarray
    elbow_index: int
    singular_values: np.ndarray
    rotation_angle: float | None
    alignment_skipped: bool
    skip_reason: str | None


def _validated(e) -> np.ndarray:
    arr = np.asarray(e, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"expected a 2-D embedding matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("embedding matrix contains non-finite entries")
    return arr


def total_variance(e) -> float:
    """Trace of the token covariance: summed per-dimension variances."""
    arr = _validated(e)
    centered = arr - arr.mean(axis=0)
    return float((centered**2).sum() / arr.shape[0])


def variance_scale_up(e, sigma: float) -> np.ndarray:
    """Rescale deviations from the token mean so total variance becomes sigma^2."""
    arr = _validated(e)
    if arr.shape[0] < 2:
        raise ValidationError("variance scale-up needs at least 2 tokens")
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    mean = arr.mean(axis=0)
    centered = arr - mean
    variance = float((centered**2).sum() / arr.shape[0])
    if variance <= 1e-12:
        raise DegenerateInputError("all tokens identical: variance is zero")
    return sigma * centered / math.sqrt(variance) + mean


def pool_semantic_vector(e_cond, e_null) -> SemanticVector:
    """Mean over tokens of the conditional-minus-null embedding difference."""
    cond = _validated(e_cond)
    null = _validated(e_null)
    if cond.shape != null.shape:
        raise ValidationError(f"shape mismatch: {cond.shape} vs {null.shape}")
    direction = (cond - null).mean(axis=0)
    return SemanticVector(
        direction=direction,
        source={"pooling": "token_mean", "tokens": int(cond.shape[0])},
    )


def token_spacing(factors: SvdFactors, split: PrincipalSplit, sigma: float) -> np.ndarray:
    """Scale the top-k singular values by sigma, leaving the rest unchanged."""
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    k = split.elbow_index
    values = np.array(factors.singular_values, dtype=np.float64, copy=True)
    if not 1 <= k <= values.size:
        raise ValidationError(f"split index {k} inconsistent with {values.size} singular values")
    values[:k] *= sigma
    return values


def residual_alignment(split: PrincipalSplit, semantic: SemanticVector) -> AlignmentResult:
    """Rotate the residual basis so its first column matches the projected
    semantic direction.

    When the semantic vector lies (numerically) inside the principal span,
    the basis is returned unchanged with the skip flag set.
    """
    if split.residual_basis.shape[1] == 0:
        raise ConfigurationError("residual basis is empty; nothing to align")
    direction = semantic.direction
    if direction.shape[0] != split.principal_basis.shape[0]:
        raise ValidationError(
            f"semantic dimension {direction.shape[0]} does not match basis "
            f"dimension {split.principal_basis.shape[0]}"
        )
    projected = project_onto_complement(direction, split.principal_basis)
    norm = np.linalg.norm(projected)
    if norm <= ZERO_PROJECTION_TOL:
        return AlignmentResult(residual_basis=split.residual_basis, skipped=True)
    rotation = build_plane_rotation(split.residual_basis[:, 0], projected / norm)
    rotated = apply_rotation(rotation, split.residual_basis)
    return AlignmentResult(residual_basis=rotated, skipped=False, angle=rotation.angle)


def apply_tora(e, semantic: SemanticVector | None = None, config: ToraConfig | None = None) -> TransformResult:
    """Full per-matrix pipeline: SVD, elbow split, token spacing, optional
    residual alignment, reconstruction.

    Each call decomposes its input independently; no state is shared across
    matrices.
    """
    config = config if config is not None else ToraConfig()
    arr = _validated(e)
    r = min(arr.shape)
    if r < 2:
        raise ValidationError(f"need min(V, d) >= 2 for a residual subspace, got shape {arr.shape}")

    factors = svd(arr)
    if config.elbow_override is not None:
        k = config.elbow_override
        if not 1 <= k <= r - 1:
            raise ValidationError(f"elbow_override {k} outside [1, {r - 1}]")
    else:
        k = mdc_elbow(factors.singular_values)
    split = principal_split(factors, k)
    scaled = token_spacing(factors, split, config.sigma)

    angle = None
    skipped = True
    if not config.enable_alignment:
        reason = "alignment_disabled"
        residual = split.residual_basis
    elif semantic is None:
        reason = "no_semantic_vector"
        residual = split.residual_basis
    else:
        result = residual_alignment(split, semantic)
        residual = result.residual_basis
        if result.skipped:
            reason = "zero_projection"
        else:
            reason = None
            skipped = False
            angle = result.angle

    right = np.hstack([split.principal_basis, residual])
    embedding = factors.left_vectors @ (scaled[:, None] * right.T)
    return TransformResult(
        embedding=embedding,
        elbow_index=k,
        singular_values=scaled,
        rotation_angle=angle,
        alignment_skipped=skipped,
        skip_reason=reason,
    )
