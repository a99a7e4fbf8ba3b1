"""Feature detection, pyramidal tracking, and forward-backward scoring."""

import numpy as np
import pytest

from derainkit.errors import ConfigurationError
from derainkit.frames import Frame, FrameSequence
from derainkit.physics import RainConfig, render_streaks
from derainkit.track import (
    COMPLETED,
    LOST,
    FeaturePoint,
    TrackingParams,
    _spawn_frames,
    forward_backward_eval,
    lk_track,
    min_eig_response,
    select_features,
)


def corner_frame(size=48, value=180.0, bg=40.0):
    """Bright axis-aligned rectangle whose corner sits at (size//2, size//2)."""
    data = np.full((size, size), bg)
    data[size // 2 :, size // 2 :] = value
    return Frame(data)


class TestMinEigResponse:
    def test_constant_frame_scores_zero(self):
        assert (min_eig_response(Frame(np.full((20, 20), 77.0))) == 0.0).all()

    def test_corner_beats_straight_edges(self):
        size = 48
        response = min_eig_response(corner_frame(size))
        c = size // 2
        corner_score = response[c - 2 : c + 3, c - 2 : c + 3].max()
        assert corner_score > 0.0
        # Sample the two edges well away from the corner.
        edge_h = response[c - 2 : c + 3, c + 12 : c + 17].max()
        edge_v = response[c + 12 : c + 17, c - 2 : c + 3].max()
        assert corner_score > edge_h
        assert corner_score > edge_v

    def test_straight_edge_is_rank_deficient(self):
        size = 48
        data = np.full((size, size), 40.0)
        data[:, size // 2 :] = 180.0
        edge = min_eig_response(Frame(data))
        corner = min_eig_response(corner_frame(size))
        interior = edge[10:-10, 10:-10]
        assert interior.max() <= 1e-6 * corner.max()

    def test_even_window_rejected(self):
        with pytest.raises(ConfigurationError):
            min_eig_response(Frame(np.zeros((8, 8))), window=4)


class TestSelectFeatures:
    def test_returns_all_when_few_qualify(self):
        score = np.zeros((30, 30))
        score[5, 5] = 10.0
        score[20, 20] = 8.0
        feats = select_features(score, max_n=200, min_distance=8.0)
        assert [(f.x, f.y) for f in feats] == [(5.0, 5.0), (20.0, 20.0)]

    def test_close_pair_keeps_stronger(self):
        score = np.zeros((30, 30))
        score[10, 10] = 10.0
        score[10, 13] = 9.0
        feats = select_features(score, min_distance=8.0)
        assert [(f.x, f.y) for f in feats] == [(10.0, 10.0)]

    def test_cap_and_descending_order(self):
        rng = np.random.default_rng(3)
        score = rng.uniform(0.5, 1.0, (64, 64))
        feats = select_features(score, max_n=10, quality_frac=0.01, min_distance=4.0)
        assert len(feats) == 10
        responses = [f.response for f in feats]
        assert responses == sorted(responses, reverse=True)

    def test_quality_threshold_drops_weak_peaks(self):
        score = np.zeros((30, 30))
        score[5, 5] = 100.0
        score[20, 20] = 0.5  # below 1% of the peak
        feats = select_features(score, quality_frac=0.01)
        assert len(feats) == 1

    def test_zero_map_yields_nothing(self):
        assert select_features(np.zeros((10, 10))) == []

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        score = rng.uniform(0.0, 1.0, (40, 40))
        assert select_features(score) == select_features(score)


class TestLkTrack:
    def test_identical_frames_give_exact_zero_displacement(self, textured_frame):
        points = [FeaturePoint(40.0, 30.0, 1.0), FeaturePoint(80.5, 60.25, 1.0)]
        results = lk_track(textured_frame, textured_frame, points)
        for (pos, status), p in zip(results, points):
            assert status == COMPLETED
            assert pos == (p.x, p.y)

    def test_recovers_integer_shift(self, textured_frame):
        shifted = Frame(np.roll(textured_frame.data, 2, axis=1))
        response = min_eig_response(textured_frame)
        guard = 12
        response[:guard, :] = 0.0
        response[-guard:, :] = 0.0
        response[:, :guard] = 0.0
        response[:, -guard:] = 0.0
        feats = select_features(response, max_n=200, min_distance=8.0)
        assert len(feats) >= 50
        results = lk_track(textured_frame, shifted, feats, window=21, levels=3)

        h, w = textured_frame.data.shape
        margin = 21 // 2 + 2
        hits = total = 0
        for f, (pos, status) in zip(feats, results):
            interior = (
                margin <= f.x < w - margin - 2 and margin <= f.y < h - margin
            )
            if not interior:
                continue
            total += 1
            if status == COMPLETED and abs(pos[0] - f.x - 2.0) <= 0.2 and abs(pos[1] - f.y) <= 0.2:
                hits += 1
        assert total >= 50
        assert hits / total >= 0.95

    def test_border_point_is_lost(self, textured_frame):
        results = lk_track(textured_frame, textured_frame, [FeaturePoint(2.0, 50.0, 1.0)],
                           window=21)
        assert results[0][1] == LOST

    def test_flat_region_is_singular(self):
        flat = Frame(np.full((60, 60), 90.0))
        results = lk_track(flat, flat, [FeaturePoint(30.0, 30.0, 1.0)])
        assert results[0][1] == LOST

    def test_ndarray_points_accepted(self, textured_frame):
        arr = np.array([[40.0, 30.0]])
        by_array = lk_track(textured_frame, textured_frame, arr)
        by_points = lk_track(textured_frame, textured_frame, [FeaturePoint(40.0, 30.0, 0.0)])
        assert by_array == by_points

    def test_empty_points(self, textured_frame):
        assert lk_track(textured_frame, textured_frame, []) == []

    def test_mismatched_frames_rejected(self, textured_frame):
        small = Frame(np.zeros((10, 10)))
        with pytest.raises(ValueError):
            lk_track(textured_frame, small, [FeaturePoint(5.0, 5.0, 1.0)])

    @pytest.mark.parametrize("kwargs", [{"window": 4}, {"levels": 0}, {"max_iter": 0}, {"eps": 0.0}])
    def test_bad_parameters_rejected(self, textured_frame, kwargs):
        with pytest.raises(ConfigurationError):
            lk_track(textured_frame, textured_frame, [FeaturePoint(5.0, 5.0, 1.0)], **kwargs)


class TestSpawnFrames:
    def test_regular_spacing(self):
        assert _spawn_frames(100, 10.0, 1.5) == [0, 15, 30, 45, 60, 75, 90]

    def test_sub_frame_interval_deduplicates(self):
        frames = _spawn_frames(6, 1.0, 0.5)
        assert frames == [0, 1, 2, 3, 4]

    def test_minimum_sequence(self):
        assert _spawn_frames(2, 10.0, 1.5) == [0]


@pytest.fixture(scope="module")
def tracking_runs():
    """Clean static scene, its rainy twin, and the rainy twin reversed."""
    rng = np.random.default_rng(4)
    from derainkit.physics import smooth_noise_background

    base = smooth_noise_background(160, 120, low=60.0, high=190.0, smooth_sigma=2.0, seed=4)
    tex = Frame(np.clip(base.data + rng.normal(0, 12, (120, 160)), 0, 255))
    n = 30
    cfg = RainConfig(streaks_per_frame=120.0, photometric_slope=0.02,
                     brightness_offset=30.0, seed=9)
    rainy_frames = [render_streaks(tex, cfg, t)[0] for t in range(n)]
    params = TrackingParams(max_features=80, window=15, track_span_s=1.0, spawn_interval_s=1.0)
    clean = forward_backward_eval(FrameSequence(tuple([tex] * n), 10.0), params)
    rainy = forward_backward_eval(FrameSequence(tuple(rainy_frames), 10.0), params)
    reversed_rainy = forward_backward_eval(
        FrameSequence(tuple(reversed(rainy_frames)), 10.0), params
    )
    return params, clean, rainy, reversed_rainy


class TestForwardBackward:
    def test_static_features_all_return(self, tracking_runs):
        _, clean, _, _ = tracking_runs
        assert clean.spawned > 0
        assert clean.within_1px == clean.spawned
        assert clean.within_5px == clean.spawned

    def test_margin_counts_are_nested(self, tracking_runs):
        _, clean, rainy, reversed_rainy = tracking_runs
        for report in (clean, rainy, reversed_rainy):
            assert report.within_1px <= report.within_5px <= report.spawned

    def test_rain_disturbs_tracking(self, tracking_runs):
        _, clean, rainy, _ = tracking_runs
        assert rainy.within_1px < clean.within_1px

    def test_time_reversal_is_nearly_symmetric(self, tracking_runs):
        _, _, rainy, reversed_rainy = tracking_runs
        assert reversed_rainy.spawned == rainy.spawned
        diff = abs(reversed_rainy.within_1px - rainy.within_1px)
        assert diff <= 0.02 * max(reversed_rainy.within_1px, rainy.within_1px)

    def test_rounds_respect_feature_cap(self, tracking_runs):
        params, clean, _, _ = tracking_runs
        assert len(clean.rounds) == 3
        for rnd in clean.rounds:
            assert rnd.spawned <= params.max_features
            assert rnd.completed <= rnd.spawned

    def test_deterministic(self, static_sequence):
        params = TrackingParams(max_features=50, window=15, track_span_s=0.5)
        a = forward_backward_eval(static_sequence, params)
        b = forward_backward_eval(static_sequence, params)
        assert a == b

    def test_short_sequence_rejected(self, textured_frame):
        with pytest.raises(ConfigurationError):
            forward_backward_eval(FrameSequence((textured_frame,), 10.0))
