"""Shared numerical primitives: SVD with a fixed sign convention, elbow
detection on singular-value curves, subspace projection, and plane rotations
stored as rank-2 updates (never as dense d x d matrices).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ValidationError

UNIT_NORM_TOL = 1e-8
DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD e = U diag(s) Vt with non-increasing singular values.

    ``right_vectors`` holds the right singular vectors as rows (this is Vt).
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    @property
    def rank_bound(self) -> int:
        return len(self.singular_values)


@dataclass(frozen=True)
class PrincipalSplit:
    """Elbow index k plus the principal (d x k) and residual (d x (r-k)) bases."""

    elbow_index: int
    principal_basis: np.ndarray
    residual_basis: np.ndarray


@dataclass(frozen=True)
class PlaneRotation:
    """Rotation by ``angle`` inside span{axis_a, axis_b}, identity elsewhere.

    Applied implicitly as I + (cos t - 1)(aa' + bb') + sin t (ba' - ab').
    """

    axis_a: np.ndarray
    axis_b: np.ndarray
    angle: float


def _as_matrix(e) -> np.ndarray:
    arr = np.asarray(e, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("matrix contains non-finite entries")
    return arr


def svd(e) -> SvdFactors:
    """Thin SVD with a deterministic sign convention.

    Each right singular vector is flipped so its largest-magnitude entry is
    positive (ties resolved at the lowest index), making the factorization
    reproducible across runs and platforms.
    """
    arr = _as_matrix(e)
    u, s, vt = np.linalg.svd(arr, full_matrices=False)
    u = np.ascontiguousarray(u)
    vt = np.ascontiguousarray(vt)
    for i in range(vt.shape[0]):
        j = int(np.argmax(np.abs(vt[i])))
        if vt[i, j] < 0:
            vt[i] = -vt[i]
            u[:, i] = -u[:, i]
    return SvdFactors(left_vectors=u, singular_values=s, right_vectors=vt)


def mdc_elbow(values) -> int:
    """Elbow of a non-increasing curve by maximum distance to its chord.

    Returns the 1-based index maximizing the perpendicular distance from
    (i, values[i]) to the chord joining the first and last points; ties go
    to the smallest index and the result is clamped to at most n - 1 so a
    residual subspace always remains.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise ValidationError("need a 1-D sequence of length >= 2")
    if not np.all(np.isfinite(v)):
        raise ValidationError("sequence contains non-finite entries")
    if np.any(np.diff(v) > 0):
        raise ValidationError("sequence must be non-increasing")
    n = v.size
    x = np.arange(1, n + 1, dtype=np.float64)
    dy, dx = v[-1] - v[0], float(n - 1)
    distances = np.abs(dy * x - dx * v + n * v[0] - v[-1] * 1.0) / math.hypot(dy, dx)
    k = int(np.argmax(distances)) + 1
    return max(1, min(k, n - 1))


def principal_split(factors: SvdFactors, k: int) -> PrincipalSplit:
    """Split the right singular vectors into principal and residual bases."""
    r = factors.rank_bound
    if not 1 <= k <= r:
        raise ValidationError(f"elbow index {k} outside [1, {r}]")
    basis = factors.right_vectors.T
    return PrincipalSplit(
        elbow_index=int(k),
        principal_basis=np.ascontiguousarray(basis[:, :k]),
        residual_basis=np.ascontiguousarray(basis[:, k:]),
    )


def project_onto_complement(s, basis) -> np.ndarray:
    """Remove the component of ``s`` lying in the span of ``basis`` columns."""
    vec = np.asarray(s, dtype=np.float64)
    mat = np.asarray(basis, dtype=np.float64)
    if vec.ndim != 1 or mat.ndim != 2 or mat.shape[0] != vec.shape[0]:
        raise ValidationError(
            f"dimension mismatch: vector {vec.shape} vs basis {mat.shape}"
        )
    return vec - mat @ (mat.T @ vec)


def _lowest_index_orthogonal(unit: np.ndarray) -> np.ndarray:
    # First standard basis vector with a nonzero Gram-Schmidt complement.
    for j in range(unit.size):
        candidate = -unit[j] * unit
        candidate[j] += 1.0
        norm = np.linalg.norm(candidate)
        if norm > UNIT_NORM_TOL:
            return candidate / norm
    raise ValidationError("no orthogonal direction exists (dimension too small)")


def build_plane_rotation(from_vec, to_vec) -> PlaneRotation:
    """Rotation mapping ``from_vec`` to ``to_vec`` inside their common plane.

    Both inputs must be unit vectors. When they are antipodal the plane is
    undefined; the convention is a half-turn in the plane spanned by
    ``from_vec`` and the lowest-index standard basis vector orthogonalized
    against it.
    """
    f = np.asarray(from_vec, dtype=np.float64)
    t = np.asarray(to_vec, dtype=np.float64)
    if f.ndim != 1 or t.ndim != 1 or f.shape != t.shape:
        raise ValidationError(f"dimension mismatch: {f.shape} vs {t.shape}")
    if f.size < 2:
        raise ValidationError("plane rotations need dimension >= 2")
    for name, v in (("from", f), ("to", t)):
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValidationError(f"{name} vector is not unit-norm (|v| = {norm:.3e})")

    c = float(np.clip(f @ t, -1.0, 1.0))
    w = t - c * f
    w_norm = np.linalg.norm(w)
    if w_norm <= DEGENERATE_NORM:
        if c > 0.0:
            return PlaneRotation(axis_a=f, axis_b=_lowest_index_orthogonal(f), angle=0.0)
        return PlaneRotation(axis_a=f, axis_b=_lowest_index_orthogonal(f), angle=math.pi)
    return PlaneRotation(axis_a=f, axis_b=w / w_norm, angle=math.acos(c))


def apply_rotation(rotation: PlaneRotation, vectors) -> np.ndarray:
    """Apply a plane rotation to a d-vector or to d x m column vectors."""
    x = np.asarray(vectors, dtype=np.float64)
    single = x.ndim == 1
    mat = x.reshape(x.shape[0], -1) if single else x
    if mat.ndim != 2 or mat.shape[0] != rotation.axis_a.shape[0]:
        raise ValidationError(
            f"dimension mismatch: rotation in R^{rotation.axis_a.shape[0]}, "
            f"vectors of shape {x.shape}"
        )
    a, b = rotation.axis_a, rotation.axis_b
    c, s = math.cos(rotation.angle), math.sin(rotation.angle)
    alpha = a @ mat
    beta = b @ mat
    out = mat + np.outer(a, (c - 1.0) * alpha - s * beta) + np.outer(b, (c - 1.0) * beta + s * alpha)
    return out[:, 0] if single else out


def cosine(a, b) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise ValidationError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na <= DEGENERATE_NORM or nb <= DEGENERATE_NORM:
        raise DegenerateInputError("cosine of a near-zero vector is undefined")
    return float(np.clip((va @ vb) / (na * nb), -1.0, 1.0))
