"""Seeded synthetic inputs for the simulator.

Text embeddings are anisotropic Gaussian clusters: cluster centers sit on a
cone around a fixed axis (the normalized all-ones direction), which keeps
pairwise cosines of raw tokens high (global anisotropy) while preserving
cluster structure for local metrics. Latents are plain Gaussian noise.

Generator parameters (all documented defaults):
  cone_angle   angle between the axis and each cluster center, radians
  center_scale norm of every cluster center
  spread       standard deviation of the within-cluster noise
Tokens are assigned to clusters round-robin. Streams for text and latent
draws are split from one seed via ``numpy.random.SeedSequence.spawn``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError

CONE_ANGLE = 0.8
CENTER_SCALE = 5.0
SPREAD = 0.15
LATENT_SCALE = 1.0


def synthetic_text_embeddings(
    seed: int,
    tokens: int = 8,
    dim: int = 64,
    clusters: int = 2,
    cone_angle: float = CONE_ANGLE,
    center_scale: float = CENTER_SCALE,
    spread: float = SPREAD,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    if tokens < 2 or dim < 2 or clusters < 1 or clusters > tokens:
        raise ValidationError(
            f"invalid generator sizes: tokens={tokens}, dim={dim}, clusters={clusters}"
        )
    rng = rng if rng is not None else np.random.default_rng(seed)
    axis = np.ones(dim) / math.sqrt(dim)
    centers = np.empty((clusters, dim))
    for c in range(clusters):
        raw = rng.normal(size=dim)
        ortho = raw - (raw @ axis) * axis
        ortho /= np.linalg.norm(ortho)
        centers[c] = center_scale * (math.cos(cone_angle) * axis + math.sin(cone_angle) * ortho)
    assignments = np.arange(tokens) % clusters
    return centers[assignments] + spread * rng.normal(size=(tokens, dim))


def synthetic_latents(
    seed: int,
    latents: int = 16,
    dim: int = 64,
    scale: float = LATENT_SCALE,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    if latents < 1 or dim < 2:
        raise ValidationError(f"invalid latent sizes: latents={latents}, dim={dim}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    return scale * rng.normal(size=(latents, dim))


def synthetic_inputs(
    seed: int,
    tokens: int = 8,
    latents: int = 16,
    dim: int = 64,
    clusters: int = 2,
    **kwargs,
):
    """Deterministic (text, latent) pair from one seed."""
    text_seq, latent_seq = np.random.SeedSequence(seed).spawn(2)
    text = synthetic_text_embeddings(
        seed,
        tokens=tokens,
        dim=dim,
        clusters=clusters,
        rng=np.random.default_rng(text_seq),
        **kwargs,
    )
    latent = synthetic_latents(
        seed, latents=latents, dim=dim, rng=np.random.default_rng(latent_seq)
    )
    return text, latent
