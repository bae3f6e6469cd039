import math

import numpy as np
import pytest

from lossforge.data import FrameSequence, make_synthetic_corpus
from lossforge.errors import (
    FrameTooSmall,
    LengthMismatch,
    RowOutOfRange,
    ScenePairMissing,
    ShapeMismatch,
)
from lossforge.metrics import (
    EvalProtocol,
    FlowParams,
    evaluate,
    evaluate_sequences,
    farneback_flow,
    psnr,
    ssim,
    temporal_profile,
    tof,
)
from oracles import psnr_ref, ssim_ref, ssim_rgb_ref


@pytest.fixture(scope="module")
def moving_corpus():
    return make_synthetic_corpus(1, 10, 64, rng_seed=21, motion_px=1)


def _static_copy(seq):
    frames = np.repeat(seq.frames[:1], len(seq), axis=0)
    return FrameSequence(seq.scene_id, frames)


class TestPsnr:
    def test_identity_is_infinite(self, rng):
        img = rng.random((16, 16, 3))
        assert math.isinf(psnr(img, img.copy()))

    def test_uniform_difference_exact_20db(self):
        a = np.full((8, 8, 3), 0.6)
        b = np.full((8, 8, 3), 0.5)
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-12)

    def test_checkerboard_same_mse(self):
        base = np.full((8, 8, 3), 0.5)
        signs = (-1.0) ** (np.indices((8, 8)).sum(axis=0))
        checker = base + 0.1 * signs[:, :, None]
        assert psnr(checker, base) == pytest.approx(20.0, abs=1e-12)

    def test_matches_reference(self, rng):
        for _ in range(20):
            a, b = rng.random((12, 12, 3)), rng.random((12, 12, 3))
            assert psnr(a, b) == pytest.approx(psnr_ref(a, b), abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


class TestSsim:
    def test_identity(self, rng):
        img = rng.random((16, 16, 3))
        assert ssim(img, img.copy()) == pytest.approx(1.0, abs=1e-12)

    def test_constant_frames_closed_form(self):
        a_val, b_val = 0.8, 0.3
        a = np.full((16, 16, 3), a_val)
        b = np.full((16, 16, 3), b_val)
        c1 = 0.01**2
        want = (2 * a_val * b_val + c1) / (a_val**2 + b_val**2 + c1)
        assert ssim(a, b) == pytest.approx(want, abs=1e-12)

    def test_anticorrelated_is_negative(self, rng):
        img = (rng.random((16, 16, 3)) > 0.5).astype(np.float64)
        assert ssim(img, 1.0 - img) < 0

    def test_matches_bruteforce_oracle(self, rng):
        for _ in range(5):
            a, b = rng.random((14, 14)), rng.random((14, 14))
            assert ssim(a, b) == pytest.approx(ssim_ref(a, b), abs=1e-9)
        a, b = rng.random((14, 14, 3)), rng.random((14, 14, 3))
        assert ssim(a, b) == pytest.approx(ssim_rgb_ref(a, b), abs=1e-9)

    def test_gray_mean_mode(self, rng):
        a, b = rng.random((14, 14, 3)), rng.random((14, 14, 3))
        want = ssim_ref(a.mean(axis=2), b.mean(axis=2))
        assert ssim(a, b, channel_mode="gray_mean") == pytest.approx(want, abs=1e-9)


class TestFlow:
    def test_no_motion(self, moving_corpus):
        f = moving_corpus[0].frames[0]
        field = farneback_flow(f, f.copy())
        assert np.abs(field.u).mean() < 0.05
        assert np.abs(field.v).mean() < 0.05

    def test_uniform_frames_zero_flow(self):
        f = np.full((32, 32, 3), 0.5, dtype=np.float32)
        field = farneback_flow(f, f.copy())
        assert np.abs(field.u).max() == 0.0 and np.abs(field.v).max() == 0.0

    def test_recovers_one_px_horizontal_shift(self, moving_corpus):
        seq = moving_corpus[0]
        field = farneback_flow(seq.frames[0], seq.frames[1])
        interior = np.s_[8:-8, 8:-8]
        assert 0.7 <= field.u[interior].mean() <= 1.3
        assert abs(field.v[interior].mean()) < 0.3

    def test_frame_too_small(self):
        f = np.zeros((8, 8, 3))
        with pytest.raises(FrameTooSmall):
            farneback_flow(f, f)


class TestTof:
    def test_identity_exactly_zero(self, moving_corpus):
        seq = moving_corpus[0]
        copy = FrameSequence(seq.scene_id, seq.frames.copy())
        assert tof(copy, seq) == 0.0

    def test_symmetry(self, moving_corpus):
        gt = moving_corpus[0]
        gen = _static_copy(gt)
        assert tof(gen, gt) == pytest.approx(tof(gt, gen), abs=1e-12)

    def test_motion_removed_near_one(self, moving_corpus):
        gt = moving_corpus[0]
        gen = _static_copy(gt)
        val = tof(gen, gt)
        assert 0.7 <= val <= 1.3

    def test_l2_norm_variant(self, moving_corpus):
        gt = moving_corpus[0]
        gen = _static_copy(gt)
        l1 = tof(gen, gt, norm="l1_mean")
        l2 = tof(gen, gt, norm="l2_mean")
        assert l2 <= l1 + 1e-9  # pointwise sqrt(u^2+v^2) <= |u|+|v|

    def test_length_mismatch(self, moving_corpus):
        gt = moving_corpus[0]
        short = FrameSequence("s", gt.frames[:5])
        with pytest.raises(LengthMismatch):
            tof(short, gt)


class TestTemporalProfile:
    def test_static_video_constant_profile(self):
        frames = np.repeat(np.random.default_rng(0).random((1, 12, 20, 3)), 5, axis=0)
        prof = temporal_profile(FrameSequence("s", frames.astype(np.float32)), 4)
        assert prof.shape == (5, 20, 3)
        for row in prof[1:]:
            np.testing.assert_array_equal(row, prof[0])

    def test_moving_bar_makes_diagonal(self):
        frames = np.full((6, 16, 16, 3), 0.0, dtype=np.float32)
        for t in range(6):
            frames[t, :, 2 + 2 * t] = 1.0
        prof = temporal_profile(FrameSequence("s", frames), 8)
        for t in range(6):
            assert prof[t, 2 + 2 * t, 0] == 1.0
            assert prof[t].sum() == pytest.approx(3.0)  # one bright column

    def test_height_is_frame_count(self, moving_corpus):
        prof = temporal_profile(moving_corpus[0], 0)
        assert prof.shape[0] == len(moving_corpus[0])

    def test_row_out_of_range(self, moving_corpus):
        with pytest.raises(RowOutOfRange):
            temporal_profile(moving_corpus[0], 64)


class TestProtocol:
    def test_protocol_equals_precropped(self, moving_corpus, rng):
        gt = moving_corpus[0]
        noisy = np.clip(gt.frames + rng.normal(0, 0.03, gt.frames.shape), 0, 1).astype(np.float32)
        gen = FrameSequence("s", noisy)

        protocol = EvalProtocol(skip_first=2, skip_last=2, border_px=8)
        full = evaluate_sequences({"s": (gen, gt)}, protocol)

        crop = lambda seq: FrameSequence("s", seq.frames[2:-2, 8:-8, 8:-8])
        pre = evaluate_sequences(
            {"s": (crop(gen), crop(gt))}, EvalProtocol.disabled()
        )
        m_full, m_pre = full.per_scene["s"], pre.per_scene["s"]
        assert m_full.psnr_db == pytest.approx(m_pre.psnr_db, abs=1e-12)
        assert m_full.ssim == pytest.approx(m_pre.ssim, abs=1e-12)
        assert m_full.tof == pytest.approx(m_pre.tof, abs=1e-12)

    def test_frame_count_arithmetic(self, moving_corpus, rng):
        # 10 frames, skip 2+2 -> exactly frames 2..7 contribute
        gt = moving_corpus[0]
        noisy = np.clip(gt.frames + rng.normal(0, 0.02, gt.frames.shape), 0, 1).astype(np.float32)
        gen = FrameSequence("s", noisy)
        report = evaluate_sequences({"s": (gen, gt)}, EvalProtocol(2, 2, 8))
        included = [psnr(gen.frames[t, 8:-8, 8:-8], gt.frames[t, 8:-8, 8:-8]) for t in range(2, 8)]
        assert report.per_scene["s"].psnr_db == pytest.approx(np.mean(included), abs=1e-12)

    def test_protocol_that_excludes_everything(self, moving_corpus):
        gt = moving_corpus[0]
        with pytest.raises(LengthMismatch):
            evaluate_sequences({"s": (gt, gt)}, EvalProtocol(5, 5, 0))


class TestEvaluate:
    def test_self_evaluation(self, tmp_path, moving_corpus):
        from lossforge.data import save_sequence

        for sub in ("gen", "gt"):
            save_sequence(moving_corpus[0], tmp_path / sub / "scene_000")
        report = evaluate(tmp_path / "gen", tmp_path / "gt", out_dir=tmp_path / "rep")
        m = report.per_scene["scene_000"]
        assert math.isinf(m.psnr_db)
        assert m.ssim == pytest.approx(1.0, abs=1e-12)
        assert m.tof == 0.0
        assert report.has_infinite_psnr()
        csv_text = (tmp_path / "rep" / "report.csv").read_text()
        assert csv_text.splitlines()[0] == "scene,psnr,ssim,tof,lpips"
        assert (tmp_path / "rep" / "report.txt").exists()

    def test_missing_scene(self, tmp_path, moving_corpus):
        from lossforge.data import save_sequence

        save_sequence(moving_corpus[0], tmp_path / "gt" / "scene_000")
        (tmp_path / "gen").mkdir()
        with pytest.raises(ScenePairMissing, match="scene_000"):
            evaluate(tmp_path / "gen", tmp_path / "gt")

    def test_aggregate_is_mean(self, tmp_path, rng):
        corpus = make_synthetic_corpus(2, 6, 48, rng_seed=30)
        pairs = {}
        for seq in corpus:
            noisy = np.clip(seq.frames + rng.normal(0, 0.05, seq.frames.shape), 0, 1)
            pairs[seq.scene_id] = (FrameSequence(seq.scene_id, noisy.astype(np.float32)), seq)
        report = evaluate_sequences(pairs, EvalProtocol(1, 1, 8))
        assert report.mean_psnr == pytest.approx(
            np.mean([m.psnr_db for m in report.per_scene.values()])
        )
