"""Gaussian mixture fitting by expectation-maximization.

Diagonal covariances, seeded k-means++-style initialization, responsibilities
computed in log space, and a variance floor after every M-step. Fitting is a
deterministic function of (data, component count, seed): three restarts with
seeds seed, seed + 1, seed + 2, keeping the best final log-likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ValidationError

VARIANCE_FLOOR = 1e-6
MAX_ITERATIONS = 200
CONVERGENCE_TOL = 1e-6
RESTARTS = 3


@dataclass(frozen=True)
class GmmModel:
    component_count: int
    mixing_weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihood: float
    log_likelihood_path: tuple


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    responsibilities: np.ndarray


def _log_densities(data: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    # (V, C) matrix of diagonal-Gaussian log densities.
    diff = data[:, None, :] - means[None, :, :]
    return -0.5 * (np.log(2.0 * np.pi * variances)[None, :, :] + diff**2 / variances[None, :, :]).sum(axis=2)


def _seeded_centers(data: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    # k-means++ style: subsequent centers drawn proportionally to the squared
    # distance from the nearest center already chosen.
    v = data.shape[0]
    centers = [data[rng.integers(v)]]
    for _ in range(1, count):
        dist = np.min(
            ((data[:, None, :] - np.asarray(centers)[None, :, :]) ** 2).sum(axis=2), axis=1
        )
        total = dist.sum()
        if total > 0:
            centers.append(data[rng.choice(v, p=dist / total)])
        else:
            centers.append(data[rng.integers(v)])
    return np.asarray(centers)


def _initial_variances(data: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # Per-component spread of the nearest-center partition; the global data
    # variance would be far too wide when clusters are well separated.
    count = centers.shape[0]
    nearest = np.argmin(
        ((data[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2), axis=1
    )
    fallback = np.maximum(data.var(axis=0) / count, VARIANCE_FLOOR)
    variances = np.tile(fallback, (count, 1))
    for c in range(count):
        members = data[nearest == c]
        if members.shape[0] >= 2:
            variances[c] = np.maximum(members.var(axis=0), VARIANCE_FLOOR)
    return variances


def _fit_once(data: np.ndarray, count: int, rng: np.random.Generator):
    v = data.shape[0]
    means = _seeded_centers(data, count, rng)
    variances = _initial_variances(data, means)
    weights = np.full(count, 1.0 / count)

    path = []
    previous = -np.inf
    for _ in range(MAX_ITERATIONS):
        with np.errstate(divide="ignore"):
            joint = _log_densities(data, means, variances) + np.log(weights)[None, :]
        per_point = np.logaddexp.reduce(joint, axis=1)
        likelihood = float(per_point.sum())
        path.append(likelihood)
        if likelihood - previous < CONVERGENCE_TOL:
            break
        previous = likelihood

        responsibilities = np.exp(joint - per_point[:, None])
        mass = responsibilities.sum(axis=0)
        weights = mass / v
        for c in range(count):
            if mass[c] <= 1e-12:
                # Dead component: freeze its parameters (a generalized
                # M-step, so the likelihood bound still cannot decrease).
                continue
            means[c] = responsibilities[:, c] @ data / mass[c]
            spread = responsibilities[:, c] @ (data - means[c]) ** 2 / mass[c]
            variances[c] = np.maximum(spread, VARIANCE_FLOOR)
    return weights, means, variances, path


def fit_gmm(e, component_count: int, seed: int) -> GmmModel:
    """Fit a diagonal-covariance mixture; best of three seeded restarts."""
    data = np.asarray(e, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 1:
        raise ValidationError(f"expected a non-empty 2-D matrix, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValidationError("matrix contains non-finite entries")
    count = int(component_count)
    if count < 1:
        raise ValidationError(f"component count must be >= 1, got {count}")
    if data.shape[0] < count:
        raise ValidationError(
            f"cannot fit {count} components to {data.shape[0]} tokens"
        )
    if np.all(data == data[0]):
        raise DegenerateInputError("all tokens identical; mixture fit is degenerate")

    best = None
    for restart in range(RESTARTS):
        rng = np.random.default_rng(seed + restart)
        weights, means, variances, path = _fit_once(data, count, rng)
        if best is None or path[-1] > best[3][-1]:
            best = (weights, means, variances, path)
    weights, means, variances, path = best
    return GmmModel(
        component_count=count,
        mixing_weights=weights,
        means=means,
        variances=variances,
        log_likelihood=path[-1],
        log_likelihood_path=tuple(path),
    )


def assign(model: GmmModel, e) -> ClusterAssignment:
    """Responsibilities and hard labels for data under a fitted model."""
    data = np.asarray(e, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != model.means.shape[1]:
        raise ValidationError(
            f"data of shape {data.shape} does not match model dimension {model.means.shape[1]}"
        )
    with np.errstate(divide="ignore"):
        joint = _log_densities(data, model.means, model.variances) + np.log(model.mixing_weights)[None, :]
    responsibilities = np.exp(joint - np.logaddexp.reduce(joint, axis=1)[:, None])
    labels = np.argmax(responsibilities, axis=1)
    return ClusterAssignment(labels=labels, responsibilities=responsibilities)
