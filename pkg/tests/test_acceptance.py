"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines; tolerances are pinned here and nowhere else.
"""

import dataclasses
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

import tora
from tora import (
    ArrayFile,
    Intervention,
    SemanticVector,
    ToraConfig,
    ToyBlockState,
    ValidationError,
    apply_rotation,
    apply_tora,
    assign,
    build_plane_rotation,
    fit_gmm,
    init_weights,
    joint_attention_block,
    mdc_elbow,
    read_array,
    run_pipeline,
    sign_rule_check,
    synthetic_inputs,
    write_array,
)
from tora.gmm import VARIANCE_FLOOR
from tora.linalg import principal_split, project_onto_complement, svd
from tora.metrics import all_but_the_top, default_removed_components, iso_score, local_isotropy
from tora.report import render_report
from tora.simulator import ADALN_EPS, BlockWeights, ModalityWeights

from test_linalg import chord_distance_argmax
from test_metrics import hard_assignment


@contextmanager
def criterion(name):
    try:
        yield
    except Exception:
        print(f"[acceptance] {name}: FAIL")
        raise
    print(f"[acceptance] {name}: PASS")


def random_unit(rng, d):
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


def test_rotation_correctness():
    with criterion("rotation correctness (1000 cases, d in {8, 64, 512})"):
        rng = np.random.default_rng(101)
        started = time.monotonic()
        cases = [(8, 334), (64, 333), (512, 333)]
        for d, runs in cases:
            for _ in range(runs):
                source, target = random_unit(rng, d), random_unit(rng, d)
                rotation = build_plane_rotation(source, target)
                assert np.linalg.norm(apply_rotation(rotation, source) - target) < 1e-10
                probes = rng.normal(size=(d, 3))
                rotated = apply_rotation(rotation, probes)
                assert np.abs(rotated.T @ rotated - probes.T @ probes).max() < 1e-10
                fixed = rng.normal(size=d)
                for axis in (rotation.axis_a, rotation.axis_b):
                    fixed -= (fixed @ axis) * axis
                assert np.abs(apply_rotation(rotation, fixed) - fixed).max() < 1e-10
        assert time.monotonic() - started < 10.0


def test_basis_integrity():
    with criterion("basis integrity after residual alignment (1000 cases)"):
        rng = np.random.default_rng(102)
        for _ in range(1000):
            tokens = int(rng.integers(4, 12))
            dim = int(rng.integers(tokens, 40))
            factors = svd(rng.normal(size=(tokens, dim)))
            k = int(rng.integers(1, factors.rank_bound))
            split = principal_split(factors, k)
            semantic = SemanticVector(direction=rng.normal(size=dim))
            result = tora.residual_alignment(split, semantic)
            joined = np.hstack([split.principal_basis, result.residual_basis])
            gram = joined.T @ joined
            assert np.abs(gram - np.eye(gram.shape[0])).max() < 1e-8


def test_pipeline_identity():
    with criterion("pipeline identity at sigma 1 with zero semantic vector (100 matrices)"):
        rng = np.random.default_rng(103)
        for _ in range(100):
            tokens = int(rng.integers(2, 12))
            dim = int(rng.integers(2, 40))
            e = rng.normal(size=(tokens, dim)) * rng.uniform(0.2, 5.0)
            zero = SemanticVector(direction=np.zeros(dim))
            result = apply_tora(e, zero, ToraConfig(sigma=1.0))
            assert np.abs(result.embedding - e).max() < 1e-8


def test_norm_bookkeeping():
    with criterion("norm bookkeeping: Frobenius vs spectrum, alignment isometry"):
        rng = np.random.default_rng(104)
        for _ in range(200):
            e = rng.normal(size=(int(rng.integers(4, 10)), int(rng.integers(8, 32))))
            semantic = SemanticVector(direction=rng.normal(size=e.shape[1]))
            aligned = apply_tora(e, semantic, ToraConfig(sigma=1.3))
            frob2 = np.linalg.norm(aligned.embedding) ** 2
            assert abs(frob2 - (aligned.singular_values**2).sum()) < 1e-10 * frob2
            plain = apply_tora(e, semantic, ToraConfig(sigma=1.3, enable_alignment=False))
            norm_on = np.linalg.norm(aligned.embedding)
            norm_off = np.linalg.norm(plain.embedding)
            assert abs(norm_on - norm_off) < 1e-10 * max(norm_on, norm_off)


def test_sign_rule():
    with criterion("cosine-change sign rule (10000 draws, 100% agreement)"):
        rng = np.random.default_rng(105)
        started = time.monotonic()
        evaluated = 0
        for _ in range(10000):
            record = sign_rule_check(
                rng.normal(size=12) * rng.uniform(0.5, 3.0),
                rng.normal(size=12),
                rng.normal(size=12),
                rng.uniform(0.5, 2.0),
            )
            if abs(record.delta) < 1e-12:
                continue
            evaluated += 1
            assert record.agreement, (
                f"sign mismatch: delta={record.delta}, rule={record.sign_rule_value}"
            )
        assert evaluated > 9000
        assert time.monotonic() - started < 5.0


def test_iso_score_anchors():
    with criterion("iso score anchors (isotropic 1, single-direction 0, k=1 rejected)"):
        d = 8
        isotropic = np.vstack([np.eye(d) * 3.0, -np.eye(d) * 3.0])
        single = np.outer([1.0, 2.0, 3.0, -1.0, 0.5], np.eye(d)[0])
        for k in (2, 4, 8):
            assert iso_score(isotropic, k) == pytest.approx(1.0, abs=1e-9)
        for k in (2, 3, 5):
            assert iso_score(single, k) == pytest.approx(0.0, abs=1e-9)
        with pytest.raises(ValidationError):
            iso_score(isotropic, 1)


def test_local_isotropy_anchors():
    with criterion("local isotropy anchors (pair 0, equilateral 0.5, oracle match)"):
        pair = np.array([[3.0, 4.0], [-3.0, -4.0]])
        assert local_isotropy(pair, hard_assignment([0, 0])) == 0.0

        h = math.sqrt(3.0) / 2.0
        triangle = np.array([[1.0, 0.0], [-0.5, h], [-0.5, -h]])
        assert local_isotropy(triangle, hard_assignment([0, 0, 0])) == pytest.approx(0.5, abs=1e-9)

        from test_metrics import local_isotropy_oracle

        rng = np.random.default_rng(106)
        for _ in range(20):
            e = rng.normal(size=(12, 6)) + np.repeat(rng.normal(size=(3, 6)) * 3, 4, axis=0)
            labels = np.repeat([0, 1, 2], 4)
            assert local_isotropy(e, hard_assignment(labels)) == pytest.approx(
                local_isotropy_oracle(e, labels), abs=1e-10
            )


def test_mdc_oracle():
    with criterion("elbow detection matches exhaustive search (100 sequences)"):
        rng = np.random.default_rng(107)
        for _ in range(100):
            length = int(rng.integers(2, 65))
            values = np.sort(rng.uniform(0.0, 100.0, size=length))[::-1]
            assert mdc_elbow(values) == chord_distance_argmax(list(values))


def test_all_but_the_top():
    with criterion("all-but-the-top: default D, removed directions, zero mean"):
        assert default_removed_components(1536) == 15
        rng = np.random.default_rng(108)
        e = rng.normal(size=(20, 1536)) + rng.normal(size=1536) * 2.0
        out = all_but_the_top(e)
        assert np.abs(out.mean(axis=0)).max() < 1e-10
        centered = e - e.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        assert np.abs(vt[:15] @ out.T).max() < 1e-8


def test_directional_trends():
    with criterion("directional trends over 100 seeds (eigen-sum 100, others >= 90)"):
        started = time.monotonic()
        wins = {"eigen_sum": 0, "local_isotropy": 0, "global_anisotropy": 0}
        spacing_only = Intervention(config=ToraConfig(sigma=1.3, enable_alignment=False))
        for seed in range(100):
            text, latent = synthetic_inputs(seed)
            weights = init_weights(seed, 6, 64)
            baseline, _ = run_pipeline(text, latent, weights, 4, metric_seed=seed)
            scaled, _ = run_pipeline(
                text, latent, weights, 4, intervention=spacing_only, metric_seed=seed
            )
            for metric in wins:
                base_mean = np.mean(list(baseline.values(metric).values()))
                scaled_mean = np.mean(list(scaled.values(metric).values()))
                wins[metric] += scaled_mean > base_mean
        assert wins["eigen_sum"] == 100, wins
        assert wins["local_isotropy"] >= 90, wins
        assert wins["global_anisotropy"] >= 90, wins
        assert time.monotonic() - started < 120.0


def test_simulator_contracts():
    with criterion("simulator: stochastic rows, zero-output identity, determinism, hand oracle"):
        text, latent = synthetic_inputs(201)
        weights = init_weights(201, 4, 64)

        # attention rows sum to one at every block and timestep
        state = ToyBlockState(text=text, latent=latent, block=0, timestep=0)
        for block in weights.blocks:
            state, attention = joint_attention_block(state, block)
            assert np.abs(attention.text_to_text.sum(axis=1) - 1.0).max() < 1e-12

        # zero output projections make the pipeline the identity
        zeroed = dataclasses.replace(
            weights,
            blocks=tuple(
                dataclasses.replace(
                    b,
                    txt=dataclasses.replace(b.txt, w_out=np.zeros_like(b.txt.w_out)),
                    img=dataclasses.replace(b.img, w_out=np.zeros_like(b.img.w_out)),
                )
                for b in weights.blocks
            ),
        )
        state = ToyBlockState(text=text, latent=latent, block=0, timestep=0)
        for block in zeroed.blocks:
            state, _ = joint_attention_block(state, block)
        assert np.array_equal(state.text, text)
        assert np.array_equal(state.latent, latent)

        # byte-identical reports for identical (seed, config)
        blobs = [
            render_report(run_pipeline(text, latent, weights, 2, metadata={"seed": 201})[0], "json")
            for _ in range(2)
        ]
        assert blobs[0] == blobs[1]

        # hand-computed forward pass, V=2, N=1, d=2 (uniform attention by
        # zero key projections; see test_simulator for the derivation)
        eye, zero = np.eye(2), np.zeros((2, 2))
        block = BlockWeights(
            txt=ModalityWeights(w_q=eye, w_k=zero, w_v=eye,
                                w_out=np.array([[1.0, 2.0], [0.0, 1.0]]),
                                gamma=np.ones(2), beta=np.zeros(2)),
            img=ModalityWeights(w_q=eye, w_k=zero, w_v=eye, w_out=eye,
                                gamma=np.ones(2), beta=np.zeros(2)),
            gate_txt=0.5,
            gate_img=1.0,
        )
        small = ToyBlockState(
            text=np.array([[1.0, 0.0], [3.0, 1.0]]),
            latent=np.array([[2.0, 4.0]]),
            block=0,
            timestep=0,
        )
        out, _ = joint_attention_block(small, block, "concat")
        c1 = 0.5 / math.sqrt(0.25 + ADALN_EPS)
        c2 = 1.0 / math.sqrt(1.0 + ADALN_EPS)
        a = (c1 + c2) / 3.0
        assert np.abs(out.text - (small.text + 0.5 * a)).max() < 1e-10
        assert np.abs(out.latent - (small.latent + [[-c2 / 3.0, c2 / 3.0]])).max() < 1e-10


def test_gmm_contracts():
    with criterion("mixture fit: monotone likelihood, blob recovery, determinism"):
        rng = np.random.default_rng(109)
        for seed in range(10):
            data = rng.normal(size=(24, 6)) + np.repeat(rng.normal(size=(2, 6)) * 2, 12, axis=0)
            model = fit_gmm(data, 2, seed=seed)
            path = np.array(model.log_likelihood_path)
            assert np.all(np.diff(path) >= -1e-8)
            assert np.all(model.variances >= VARIANCE_FLOOR)

        offset = np.zeros(6)
        offset[0] = 20.0
        blob_rng = np.random.default_rng(110)
        blobs = np.vstack(
            [blob_rng.normal(size=(10, 6)), blob_rng.normal(size=(10, 6)) + offset]
        )
        truth = np.repeat([0, 1], 10)
        labels = assign(fit_gmm(blobs, 2, seed=0), blobs).labels
        assert (labels == truth).all() or (labels == 1 - truth).all()

        first = fit_gmm(blobs, 2, seed=9)
        second = fit_gmm(blobs, 2, seed=9)
        assert np.array_equal(first.means, second.means)
        assert first.log_likelihood == second.log_likelihood


def test_array_io(tmp_path):
    with criterion("array file roundtrip (100 shapes/dtypes) and malformed rejection"):
        rng = np.random.default_rng(111)
        for index in range(100):
            rank = int(rng.integers(2, 4))
            shape = tuple(int(n) for n in rng.integers(1, 7, size=rank))
            dtype = "<f4" if index % 2 else "<f8"
            values = rng.normal(size=shape)
            if dtype == "<f4":
                values = values.astype(np.float32).astype(np.float64)
            path = tmp_path / f"case_{index}.npy"
            write_array(path, ArrayFile(values=values, dtype=dtype))
            back = read_array(path)
            assert back.dtype == dtype and back.shape == shape
            assert np.array_equal(back.values, values)
            again = tmp_path / f"case_{index}_again.npy"
            write_array(again, ArrayFile(values=back.values, dtype=back.dtype))
            assert path.read_bytes() == again.read_bytes()

        good = tmp_path / "good.npy"
        write_array(good, ArrayFile(values=np.ones((2, 2))))
        corrupted = bytearray(good.read_bytes())
        corrupted[0] ^= 0x01
        bad_magic = tmp_path / "bad_magic.npy"
        bad_magic.write_bytes(bytes(corrupted))
        with pytest.raises(tora.FormatError):
            read_array(bad_magic)

        raw = good.read_bytes()
        header_len = int.from_bytes(raw[8:10], "little")
        short = tmp_path / "short.npy"
        short.write_bytes(raw[: 10 + header_len] + raw[10 + header_len : -5])
        with pytest.raises(tora.TruncationError):
            read_array(short)
