"""Desk-scale simulator of sequential joint-attention blocks.

Each block applies AdaLN (row normalization with learned scale/shift,
epsilon 1e-6), per-modality Q/K/V projections, joint attention over both
modalities' keys, an output projection, and a gated residual update. Text
embeddings are re-fed from the initial state at every timestep while the
latent stream persists across timesteps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalFailureError, ValidationError
from .gmm import assign, fit_gmm
from .metrics import isotropy_scores
from .report import MetricReport
from .transform import SemanticVector, ToraConfig, apply_tora

ADALN_EPS = 1e-6
COMBINE_MODES = ("concat", "sum")
PIPELINE_METRICS = ("eigen_sum", "global_anisotropy", "iso_score", "local_isotropy")


@dataclass(frozen=True)
class ModalityWeights:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_out: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class BlockWeights:
    txt: ModalityWeights
    img: ModalityWeights
    gate_txt: float
    gate_img: float


@dataclass(frozen=True)
class ToyModelWeights:
    """All block parameters; a deterministic function of (seed, B, d)."""

    blocks: tuple
    seed: int
    dim: int

    @property
    def block_count(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class ToyBlockState:
    text: np.ndarray
    latent: np.ndarray
    block: int
    timestep: int


@dataclass(frozen=True)
class AttentionMap:
    """Row-stochastic text-to-text attention, optionally with the full
    per-text-query map over [text keys | image keys]."""

    text_to_text: np.ndarray
    full: np.ndarray | None = None


@dataclass(frozen=True)
class Intervention:
    """Transform applied to the text state right before selected blocks.

    ``blocks`` limits application to a set of 0-based block indices;
    None applies it before every block.
    """

    config: ToraConfig
    semantic: SemanticVector | None = None
    blocks: frozenset | None = None

    def applies_to(self, block: int) -> bool:
        return self.blocks is None or block in self.blocks


def init_weights(seed: int, block_count: int, dim: int) -> ToyModelWeights:
    """Seeded weights: projections are N(0, 1/sqrt(d)); AdaLN scales are
    1 + N(0, 1/sqrt(d)) with N(0, 1/sqrt(d)) shifts; residual gates are
    scalar N(0, 1/sqrt(d)). Streams are split per block and modality with
    ``numpy.random.SeedSequence.spawn`` over PCG64, so identical
    (seed, B, d) always yield identical weights.
    """
    if block_count < 1:
        raise ValidationError(f"block count must be >= 1, got {block_count}")
    if dim < 2:
        raise ValidationError(f"dimension must be >= 2, got {dim}")
    scale = 1.0 / math.sqrt(dim)
    blocks = []
    for block_seq in np.random.SeedSequence(seed).spawn(block_count):
        txt_seq, img_seq, gate_seq = block_seq.spawn(3)
        modalities = []
        for seq in (txt_seq, img_seq):
            rng = np.random.default_rng(seq)
            modalities.append(
                ModalityWeights(
                    w_q=rng.normal(0.0, scale, (dim, dim)),
                    w_k=rng.normal(0.0, scale, (dim, dim)),
                    w_v=rng.normal(0.0, scale, (dim, dim)),
                    w_out=rng.normal(0.0, scale, (dim, dim)),
                    gamma=1.0 + rng.normal(0.0, scale, dim),
                    beta=rng.normal(0.0, scale, dim),
                )
            )
        gate_rng = np.random.default_rng(gate_seq)
        blocks.append(
            BlockWeights(
                txt=modalities[0],
                img=modalities[1],
                gate_txt=float(gate_rng.normal(0.0, scale)),
                gate_img=float(gate_rng.normal(0.0, scale)),
            )
        )
    return ToyModelWeights(blocks=tuple(blocks), seed=int(seed), dim=int(dim))


def adaln(rows: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Row-wise normalization followed by learned scale and shift."""
    mean = rows.mean(axis=1, keepdims=True)
    var = rows.var(axis=1, keepdims=True)
    return gamma * (rows - mean) / np.sqrt(var + ADALN_EPS) + beta


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = np.exp(scores - scores.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def joint_attention_block(
    state: ToyBlockState, weights: BlockWeights, combine: str = "concat"
) -> tuple:
    """One joint-attention update; returns the next state and the
    text-to-text attention map.

    ``combine`` picks how cross- and self-modal attention scores are
    normalized: "concat" runs one softmax over the concatenated score row
    (image keys absorb part of the text-query mass), "sum" normalizes each
    block separately. Either way the query's own-modality values receive
    the own-modality score block.
    """
    if combine not in COMBINE_MODES:
        raise ConfigurationError(f"unknown attention combine mode {combine!r}")
    text = np.asarray(state.text, dtype=np.float64)
    latent = np.asarray(state.latent, dtype=np.float64)
    d = weights.txt.w_q.shape[0]
    if text.ndim != 2 or latent.ndim != 2 or text.shape[1] != d or latent.shape[1] != d:
        raise ValidationError(
            f"state shapes {text.shape}/{latent.shape} do not match weight dimension {d}"
        )
    v_tokens = text.shape[0]

    h_txt = adaln(text, weights.txt.gamma, weights.txt.beta)
    h_img = adaln(latent, weights.img.gamma, weights.img.beta)
    q_t, k_t, v_t = h_txt @ weights.txt.w_q, h_txt @ weights.txt.w_k, h_txt @ weights.txt.w_v
    q_i, k_i, v_i = h_img @ weights.img.w_q, h_img @ weights.img.w_k, h_img @ weights.img.w_v

    inv_sqrt_d = 1.0 / math.sqrt(d)
    scores_tt = q_t @ k_t.T * inv_sqrt_d
    scores_ti = q_t @ k_i.T * inv_sqrt_d
    scores_it = q_i @ k_t.T * inv_sqrt_d
    scores_ii = q_i @ k_i.T * inv_sqrt_d

    full = None
    if combine == "concat":
        joint_txt = _softmax_rows(np.hstack([scores_tt, scores_ti]))
        joint_img = _softmax_rows(np.hstack([scores_it, scores_ii]))
        o_e = joint_txt[:, :v_tokens] @ v_t
        o_x = joint_img[:, v_tokens:] @ v_i
        full = joint_txt
    else:
        o_e = _softmax_rows(scores_tt) @ v_t
        o_x = _softmax_rows(scores_ii) @ v_i
    text_map = _softmax_rows(scores_tt)

    next_text = text + weights.gate_txt * (o_e @ weights.txt.w_out)
    next_latent = latent + weights.gate_img * (o_x @ weights.img.w_out)
    if not (np.all(np.isfinite(next_text)) and np.all(np.isfinite(next_latent))):
        raise NumericalFailureError(
            f"non-finite state after block {state.block} at timestep {state.timestep}",
            block=state.block,
            timestep=state.timestep,
        )
    next_state = ToyBlockState(
        text=next_text, latent=next_latent, block=state.block + 1, timestep=state.timestep
    )
    return next_state, AttentionMap(text_to_text=text_map, full=full)


def _record_metrics(report, timestep, block, text, clusters, metric_seed):
    clustering = assign(fit_gmm(text, clusters, metric_seed), text)
    scores = isotropy_scores(text, clustering)
    report.add(timestep, block, "eigen_sum", scores.eigen_sum)
    report.add(timestep, block, "global_anisotropy", scores.global_anisotropy)
    report.add(timestep, block, "iso_score", scores.iso_score)
    report.add(timestep, block, "local_isotropy", scores.xi_local)


def run_pipeline(
    e_init,
    x_init,
    weights: ToyModelWeights,
    timesteps: int,
    intervention: Intervention | None = None,
    clusters: int | None = None,
    metric_seed: int = 0,
    combine: str = "concat",
    metadata: dict | None = None,
) -> tuple:
    """Run all blocks for each timestep, re-feeding the initial text state
    at every timestep and applying the intervention (when given) to the text
    embeddings immediately before each selected block.

    Metrics describe the text state each block consumes. Returns the report
    and the elementwise mean of the text-to-text maps over all
    (timestep, block) pairs.
    """
    text_init = np.asarray(e_init, dtype=np.float64)
    latent = np.asarray(x_init, dtype=np.float64).copy()
    if timesteps < 1:
        raise ValidationError(f"timesteps must be >= 1, got {timesteps}")
    if text_init.ndim != 2 or latent.ndim != 2 or text_init.shape[1] != latent.shape[1]:
        raise ValidationError(
            f"incompatible input shapes {text_init.shape} and {latent.shape}"
        )
    v_tokens = text_init.shape[0]
    cluster_count = clusters if clusters is not None else max(2, v_tokens // 8)

    report = MetricReport(metadata=dict(metadata or {}))
    accumulated = np.zeros((v_tokens, v_tokens))
    maps = 0
    for t in range(timesteps):
        text = text_init.copy()
        for b, block_weights in enumerate(weights.blocks):
            if intervention is not None and intervention.applies_to(b):
                text = apply_tora(text, intervention.semantic, intervention.config).embedding
            _record_metrics(report, t, b, text, cluster_count, metric_seed)
            state = ToyBlockState(text=text, latent=latent, block=b, timestep=t)
            state, attention = joint_attention_block(state, block_weights, combine)
            text, latent = state.text, state.latent
            accumulated += attention.text_to_text
            maps += 1
    report.sort()
    return report, AttentionMap(text_to_text=accumulated / maps)
