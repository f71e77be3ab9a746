"""Semantic-geometry diagnostics for token embedding matrices.

All metrics treat rows as tokens. Pairwise-cosine metrics average over
ordered pairs i != j; cluster-based local isotropy centers each cluster at
its own mean before measuring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ValidationError
from .linalg import DEGENERATE_NORM, cosine, mdc_elbow
from .transform import SemanticVector


@dataclass(frozen=True)
class IsotropyScores:
    xi_local: float
    iso_score: float
    global_anisotropy: float
    eigen_sum: float


@dataclass(frozen=True)
class DeltaGammaRecord:
    """Cosine-alignment change, optionally with the closed-form sign rule.

    ``sign_rule_value`` and ``agreement`` are populated by
    :func:`sign_rule_check`; plain before/after comparisons leave them None.
    """

    gamma_before: float
    gamma_after: float
    delta: float
    sign_rule_value: float | None = None
    agreement: bool | None = None


def _matrix(e, min_rows=1) -> np.ndarray:
    arr = np.asarray(e, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {arr.shape}")
    if arr.shape[0] < min_rows:
        raise ValidationError(f"need at least {min_rows} tokens, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("matrix contains non-finite entries")
    return arr


def eigen_sum(e) -> float:
    """Trace of the token covariance (sum of its eigenvalues)."""
    arr = _matrix(e, min_rows=2)
    centered = arr - arr.mean(axis=0)
    return float((centered**2).sum() / arr.shape[0])


def _mean_pairwise_cosine(rows: np.ndarray) -> float:
    # Mean over ordered pairs i != j; dot products are divided by the norm
    # product pairwise, which keeps exactly-antipodal pairs at exactly -1.
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms <= DEGENERATE_NORM):
        raise DegenerateInputError("near-zero row makes pairwise cosine undefined")
    grams = (rows @ rows.T) / np.outer(norms, norms)
    m = rows.shape[0]
    return float((grams.sum() - np.trace(grams)) / (m * (m - 1)))


def local_isotropy(e, clustering) -> float:
    """One minus the absolute mean pairwise cosine of cluster-centered rows,
    averaged (unweighted) over clusters with at least two members.
    """
    arr = _matrix(e)
    labels = np.asarray(clustering.labels)
    if labels.shape != (arr.shape[0],):
        raise ValidationError(
            f"labels shape {labels.shape} does not match {arr.shape[0]} tokens"
        )
    per_cluster = []
    for label in np.unique(labels):
        rows = arr[labels == label]
        if rows.shape[0] < 2:
            continue
        per_cluster.append(_mean_pairwise_cosine(rows - rows.mean(axis=0)))
    if not per_cluster:
        raise DegenerateInputError("no cluster has at least 2 members")
    value = 1.0 - abs(float(np.mean(per_cluster)))
    return min(1.0, max(0.0, value))


def iso_score(e, k: int) -> float:
    """Isotropy score from the normalized covariance diagonal after
    projecting the centered data onto its first k principal components.

    Steps: sigma_d = sqrt(k) * diag / ||diag||; isotropy defect
    delta = ||sigma_d - 1|| / sqrt(2 (k - sqrt(k))); dimension occupancy
    phi = (k - delta^2 (k - sqrt(k)))^2 / k^2; score = (k phi - 1) / (k - 1).
    """
    arr = _matrix(e, min_rows=2)
    k = int(k)
    if k == 1:
        raise ValidationError("k = 1 is outside the formula's domain (k - sqrt(k) = 0)")
    if k < 1:
        raise ValidationError(f"principal dimension count must be >= 2, got {k}")
    if k > min(arr.shape):
        raise ValidationError(f"k = {k} exceeds min(V, d) = {min(arr.shape)}")
    centered = arr - arr.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    projected = centered @ vt[:k].T
    diag = projected.var(axis=0)
    scale = np.linalg.norm(diag)
    if not scale > 0.0:
        raise DegenerateInputError("projected covariance diagonal is zero")
    sigma_d = math.sqrt(k) * diag / scale
    delta = np.linalg.norm(sigma_d - 1.0) / math.sqrt(2.0 * (k - math.sqrt(k)))
    phi = (k - delta**2 * (k - math.sqrt(k))) ** 2 / k**2
    return min(1.0, max(0.0, (k * phi - 1.0) / (k - 1.0)))


def iso_component_count(e) -> int:
    """Principal-component count for iso_score: elbow of the centered-data
    singular spectrum, raised to 2 where the elbow lands at 1 (iso_score is
    undefined at k = 1).
    """
    arr = _matrix(e, min_rows=2)
    spectrum = np.linalg.svd(arr - arr.mean(axis=0), compute_uv=False)
    return max(2, mdc_elbow(spectrum))


def isotropy_scores(e, clustering, k: int | None = None) -> IsotropyScores:
    """All four geometry diagnostics for one matrix."""
    return IsotropyScores(
        xi_local=local_isotropy(e, clustering),
        iso_score=iso_score(e, k if k is not None else iso_component_count(e)),
        global_anisotropy=global_anisotropy(e),
        eigen_sum=eigen_sum(e),
    )


def global_anisotropy(e) -> float:
    """Absolute mean pairwise cosine of the uncentered token rows."""
    arr = _matrix(e, min_rows=2)
    return min(1.0, abs(_mean_pairwise_cosine(arr)))


def delta_gamma(semantic: SemanticVector, e_before, e_after) -> DeltaGammaRecord:
    """Change in cosine alignment between the semantic direction and the
    token-mean of each matrix."""
    before = _matrix(e_before)
    after = _matrix(e_after)
    if before.shape != after.shape:
        raise ValidationError(f"shape mismatch: {before.shape} vs {after.shape}")
    gamma_before = cosine(semantic.direction, before.mean(axis=0))
    gamma_after = cosine(semantic.direction, after.mean(axis=0))
    return DeltaGammaRecord(
        gamma_before=gamma_before,
        gamma_after=gamma_after,
        delta=gamma_after - gamma_before,
    )


def sign_rule_check(mean, residual, s, sigma: float) -> DeltaGammaRecord:
    """Compare the direct cosine change against its closed-form sign rule.

    With e = mean + residual and e_hat = mean + sigma * residual, the sign
    of the cosine change equals the sign of
    (s . mean)(|e| - |e_hat|) + (s . residual)(sigma |e| - |e_hat|).
    """
    m = np.asarray(mean, dtype=np.float64)
    u = np.asarray(residual, dtype=np.float64)
    sv = np.asarray(s, dtype=np.float64)
    if not (m.ndim == u.ndim == sv.ndim == 1 and m.shape == u.shape == sv.shape):
        raise ValidationError("mean, residual, and s must be vectors of equal length")
    if not np.all(np.isfinite(m)) or not np.all(np.isfinite(u)) or not np.all(np.isfinite(sv)):
        raise ValidationError("inputs contain non-finite entries")
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")

    e = m + u
    e_hat = m + sigma * u
    gamma_before = cosine(sv, e)
    gamma_after = cosine(sv, e_hat)
    delta = gamma_after - gamma_before
    norm_e = np.linalg.norm(e)
    norm_hat = np.linalg.norm(e_hat)
    rule = float((sv @ m) * (norm_e - norm_hat) + (sv @ u) * (sigma * norm_e - norm_hat))
    agreement = abs(delta) < 1e-12 or math.copysign(1.0, delta) == math.copysign(1.0, rule)
    return DeltaGammaRecord(
        gamma_before=gamma_before,
        gamma_after=gamma_after,
        delta=delta,
        sign_rule_value=rule,
        agreement=bool(agreement),
    )


def default_removed_components(d: int) -> int:
    """Default component count for all_but_the_top: floor(d / 100), min 1."""
    return max(1, int(d) // 100)


def all_but_the_top(e, components: int | None = None) -> np.ndarray:
    """Baseline post-processing: subtract the mean row, then remove the top
    principal components of the covariance."""
    arr = _matrix(e, min_rows=2)
    v, d = arr.shape
    count = default_removed_components(d) if components is None else int(components)
    if count < 1:
        raise ValidationError(f"component count must be >= 1, got {count}")
    if count >= min(v, d):
        raise ValidationError(f"component count {count} must be < min(V, d) = {min(v, d)}")
    centered = arr - arr.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    top = vt[:count].T
    return centered - (centered @ top) @ top.T
