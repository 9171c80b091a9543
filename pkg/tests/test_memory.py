import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ike_lab import oracles
from ike_lab.datasets import CameraDataset
from ike_lab.encoder import forward, init_encoder
from ike_lab.errors import (
    DegenerateMean,
    DimensionMismatch,
    EmptyMemory,
    IndexOutOfRange,
    MissingLabel,
    ShapeMismatch,
)
from ike_lab.memory import (
    IdentityMemory,
    cosine_scores,
    empty_memory,
    init_memory,
    iku_merge,
    load_memory,
    momentum_update,
    save_memory,
)

from conftest import manual_camera, unit_rows


class TestCosineScores:
    def test_orthonormal_basis(self):
        M = IdentityMemory(np.array([[1.0, 0.0], [0.0, 1.0]]))
        scores = cosine_scores(np.array([1.0, 0.0]), M)
        assert scores.tolist() == [1.0, 0.0]

    def test_self_similarity_is_unique_max(self, rng):
        M = IdentityMemory(unit_rows(rng, 6, 5))
        k = 3
        scores = cosine_scores(M.rows[k], M)
        assert scores[k] == pytest.approx(1.0, abs=1e-12)
        assert np.argmax(scores) == k
        assert (np.delete(scores, k) < scores[k]).all()

    def test_matches_dot_product_oracle(self, rng):
        M = IdentityMemory(unit_rows(rng, 32, 8))
        f = unit_rows(rng, 1, 8)[0]
        want = np.array([math.fsum(float(a) * float(b) for a, b in zip(f, row)) for row in M.rows])
        got = cosine_scores(f, M)
        assert np.max(np.abs(got - want)) <= 1e-12

    def test_empty_memory_rejected(self):
        with pytest.raises(EmptyMemory):
            cosine_scores(np.array([1.0, 0.0]), empty_memory(2))

    def test_dimension_mismatch(self, rng):
        M = IdentityMemory(unit_rows(rng, 3, 4))
        with pytest.raises(ShapeMismatch):
            cosine_scores(np.ones(5), M)


class TestInitMemory:
    def test_single_image_row_equals_embedding(self, rng, small_encoder):
        cam = manual_camera(rng, n_ids=3, per_id=1, dim=4)
        mem = init_memory(small_encoder, cam)
        for y in range(3):
            want = forward(small_encoder, cam.X[y]).embedding
            assert np.allclose(mem.rows[y], want, atol=1e-12)

    def test_cancellation_degenerates(self, rng):
        # Zero biases make the encoder odd, so opposite inputs cancel.
        params = init_encoder([4, 8, 8, 6], rng)
        x = rng.normal(size=4)
        cam = CameraDataset(0, np.stack([x, -x]), np.array([0, 0]), 1)
        with pytest.raises(DegenerateMean):
            init_memory(params, cam)

    def test_matches_group_mean_oracle(self, rng, small_encoder):
        cam = manual_camera(rng, n_ids=10, per_id=5, dim=4)
        mem = init_memory(small_encoder, cam)
        from ike_lab.encoder import forward_batch

        feats = forward_batch(small_encoder, cam.X).embeddings
        want = oracles.group_mean_rows_oracle(feats, cam.labels.tolist())
        assert np.max(np.abs(mem.rows - want)) <= 1e-12

    def test_missing_label_rejected(self, rng, small_encoder):
        X = unit_rows(rng, 4, 4)
        cam = CameraDataset(0, X, np.array([0, 0, 2, 2]), 3)
        with pytest.raises(MissingLabel):
            init_memory(small_encoder, cam)

    def test_provenance_follows_tags(self, rng, small_encoder):
        cam = manual_camera(rng, n_ids=4, per_id=2, dim=4, globals_offset=10)
        mem = init_memory(small_encoder, cam)
        assert mem.provenance == [10, 11, 12, 13]


class TestMomentumUpdate:
    def test_omega_one_keeps_row(self, rng):
        mem = IdentityMemory(unit_rows(rng, 4, 6))
        before = mem.rows[2].copy()
        momentum_update(mem, 2, unit_rows(rng, 1, 6)[0], omega=1.0)
        assert np.allclose(mem.rows[2], before, atol=1e-12)

    def test_omega_zero_replaces_row(self, rng):
        mem = IdentityMemory(unit_rows(rng, 4, 6))
        f = unit_rows(rng, 1, 6)[0]
        momentum_update(mem, 1, f, omega=0.0)
        assert np.allclose(mem.rows[1], f, atol=1e-12)

    def test_default_omega_hand_value(self):
        mem = IdentityMemory(np.array([[1.0, 0.0]]))
        momentum_update(mem, 0, np.array([0.0, 1.0]), omega=0.1)
        norm = math.sqrt(0.1 ** 2 + 0.9 ** 2)
        assert mem.rows[0] == pytest.approx([0.1 / norm, 0.9 / norm], abs=1e-15)

    def test_touches_exactly_one_row(self, rng):
        mem = IdentityMemory(unit_rows(rng, 5, 6))
        others_before = np.delete(mem.rows, 3, axis=0).copy()
        momentum_update(mem, 3, unit_rows(rng, 1, 6)[0], omega=0.1)
        others_after = np.delete(mem.rows, 3, axis=0)
        assert (others_before == others_after).all()

    def test_index_out_of_range(self, rng):
        mem = IdentityMemory(unit_rows(rng, 3, 4))
        with pytest.raises(IndexOutOfRange):
            momentum_update(mem, 3, unit_rows(rng, 1, 4)[0], omega=0.1)

    @given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_matches_oracle_and_stays_unit(self, seed, omega):
        r = np.random.default_rng(seed)
        mem = IdentityMemory(unit_rows(r, 5, 7))
        f = unit_rows(r, 1, 7)[0]
        want = oracles.momentum_oracle(mem.rows[2].copy(), f, omega)
        momentum_update(mem, 2, f, omega)
        assert np.max(np.abs(mem.rows[2] - want)) <= 1e-12
        assert mem.max_unit_error() <= 1e-9


class TestIkuMerge:
    def test_lambda_one_keeps_history(self, rng):
        hist = IdentityMemory(unit_rows(rng, 4, 6))
        cur = IdentityMemory(unit_rows(rng, 4, 6))
        merged = iku_merge(hist, cur, np.arange(4), lam=1.0)
        assert len(merged) == 4
        assert np.max(np.abs(merged.rows - hist.rows)) <= 1e-12

    def test_lambda_zero_replaces_matched(self, rng):
        hist = IdentityMemory(unit_rows(rng, 4, 6))
        cur = IdentityMemory(unit_rows(rng, 4, 6))
        merged = iku_merge(hist, cur, np.arange(4), lam=0.0)
        assert np.max(np.abs(merged.rows - cur.rows)) <= 1e-12

    def test_all_unmatched_is_concatenation(self, rng):
        hist = IdentityMemory(unit_rows(rng, 3, 6), [0, 1, 2])
        cur = IdentityMemory(unit_rows(rng, 2, 6), [7, 8])
        merged = iku_merge(hist, cur, np.array([-1, -1]), lam=0.25)
        assert (merged.rows == np.concatenate([hist.rows, cur.rows])).all()
        assert merged.provenance == [0, 1, 2, 7, 8]

    def test_hand_rule_mixed_case(self, rng):
        hist = IdentityMemory(unit_rows(rng, 3, 5), [0, 1, 2])
        cur = IdentityMemory(unit_rows(rng, 2, 5), [1, 9])
        matches = np.array([1, -1])
        merged = iku_merge(hist, cur, matches, lam=0.25)
        want = oracles.iku_oracle(hist.rows, cur.rows, matches.tolist(), 0.25)
        assert merged.rows.shape == want.shape
        assert np.max(np.abs(merged.rows - want)) <= 1e-12
        assert merged.provenance == [0, 1, 2, 9]

    def test_shape_mismatch(self, rng):
        hist = IdentityMemory(unit_rows(rng, 3, 5))
        cur = IdentityMemory(unit_rows(rng, 2, 4))
        with pytest.raises(ShapeMismatch):
            iku_merge(hist, cur, np.array([-1, -1]), lam=0.25)

    @given(st.integers(0, 2 ** 32 - 1), st.sampled_from([0.0, 0.25, 0.5, 1.0]))
    @settings(max_examples=50, deadline=None)
    def test_length_rule_and_unit_rows(self, seed, lam):
        r = np.random.default_rng(seed)
        n_h = int(r.integers(1, 10))
        n_c = int(r.integers(1, 10))
        hist = IdentityMemory(unit_rows(r, n_h, 6))
        cur = IdentityMemory(unit_rows(r, n_c, 6))
        matches = np.array([int(r.integers(n_h)) if r.random() < 0.5 else -1 for _ in range(n_c)])
        merged = iku_merge(hist, cur, matches, lam)
        unmatched = int((matches == -1).sum())
        assert len(merged) == n_h + unmatched
        assert len(merged) >= n_h
        assert merged.max_unit_error() <= 1e-9
        want = oracles.iku_oracle(hist.rows, cur.rows, matches.tolist(), lam)
        assert np.max(np.abs(merged.rows - want)) <= 1e-12


class TestSnapshotRoundTrip:
    def test_bitwise_roundtrip(self, rng, tmp_path):
        mem = IdentityMemory(unit_rows(rng, 5, 7), [3, 1, 4, 1, 5])
        path = tmp_path / "memory.json"
        save_memory(mem, path)
        loaded = load_memory(path)
        assert (loaded.rows == mem.rows).all()
        assert loaded.provenance == mem.provenance

    def test_roundtrip_without_provenance(self, rng, tmp_path):
        mem = IdentityMemory(unit_rows(rng, 2, 3), None)
        path = tmp_path / "memory.json"
        save_memory(mem, path)
        assert load_memory(path).provenance is None

    def test_dimension_check(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"dim": 3, "rows": [[1.0, 0.0]], "provenance": null}')
        with pytest.raises(DimensionMismatch):
            load_memory(path)
