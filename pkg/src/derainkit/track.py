"""Corner features and pyramidal Lucas-Kanade tracking.

Feature quality is the minimum eigenvalue of the windowed structure
tensor; tracking refines a translation per feature from coarse to fine
pyramid levels. The forward-backward protocol spawns features at fixed
wall-clock intervals, tracks them out and back, and counts how many
return within the given pixel margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError
from .frames import Frame, FrameSequence, luma_array

__all__ = [
    "FeaturePoint",
    "TrackStatus",
    "TrackingParams",
    "RoundResult",
    "TrackingReport",
    "min_eig_response",
    "select_features",
    "lk_track",
    "forward_backward_eval",
]

COMPLETED = "completed"
LOST = "lost"
TrackStatus = str

# A 2x2 structure tensor below this eigenvalue ratio counts as singular.
_CONDITION_FLOOR = 1e-12


@dataclass(frozen=True)
class FeaturePoint:
    """A corner candidate: position (x, y) and its response score."""

    x: float
    y: float
    response: float


@dataclass(frozen=True)
class TrackingParams:
    """Settings for detection, tracking, and the forward-backward runs."""

    max_features: int = 200
    quality_frac: float = 0.01
    min_distance: float = 8.0
    response_window: int = 3
    window: int = 21
    levels: int = 3
    max_iter: int = 30
    eps: float = 0.01
    spawn_interval_s: float = 1.5
    track_span_s: float = 12.0
    margins: Tuple[float, ...] = (1.0, 5.0)

    def __post_init__(self) -> None:
        if self.max_features < 1:
            raise ConfigurationError("max_features must be >= 1")
        if not 0 < self.quality_frac <= 1:
            raise ConfigurationError("quality_frac must lie in (0, 1]")
        if self.min_distance < 0:
            raise ConfigurationError("min_distance must be >= 0")
        if self.response_window < 1 or self.response_window % 2 == 0:
            raise ConfigurationError("response_window must be odd and >= 1")
        if self.window < 3 or self.window % 2 == 0:
            raise ConfigurationError("window must be odd and >= 3")
        if self.levels < 1:
            raise ConfigurationError("levels must be >= 1")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be >= 1")
        if self.eps <= 0:
            raise ConfigurationError("eps must be positive")
        if self.spawn_interval_s <= 0 or self.track_span_s <= 0:
            raise ConfigurationError("spawn interval and track span must be positive")
        if not self.margins or any(m <= 0 for m in self.margins):
            raise ConfigurationError("margins must be positive")
        object.__setattr__(self, "margins", tuple(sorted(self.margins)))


def min_eig_response(frame: Frame, window: int = 3) -> np.ndarray:
    """Per-pixel smaller eigenvalue of the window-summed structure tensor.

    Border pixels (where the Sobel or summation window hangs off the
    frame) score zero.
    """
    if window < 1 or window % 2 == 0:
        raise ConfigurationError(f"window must be odd and >= 1, got {window}")
    data = luma_array(frame)
    gx = ndimage.sobel(data, axis=1, mode="nearest")
    gy = ndimage.sobel(data, axis=0, mode="nearest")
    sxx = ndimage.uniform_filter(gx * gx, size=window, mode="nearest")
    sxy = ndimage.uniform_filter(gx * gy, size=window, mode="nearest")
    syy = ndimage.uniform_filter(gy * gy, size=window, mode="nearest")
    half_trace = 0.5 * (sxx + syy)
    root = np.sqrt(np.maximum((0.5 * (sxx - syy)) ** 2 + sxy * sxy, 0.0))
    response = np.maximum(half_trace - root, 0.0)
    margin = window // 2 + 1
    if response.shape[0] <= 2 * margin or response.shape[1] <= 2 * margin:
        return np.zeros_like(response)
    response[:margin, :] = 0.0
    response[-margin:, :] = 0.0
    response[:, :margin] = 0.0
    response[:, -margin:] = 0.0
    return response


def select_features(
    score: np.ndarray,
    max_n: int = 200,
    quality_frac: float = 0.01,
    min_distance: float = 8.0,
) -> List[FeaturePoint]:
    """Greedy strongest-first selection with spatial suppression.

    Candidates below quality_frac of the global maximum are dropped;
    ties resolve by (y, x) so selection is deterministic.
    """
    if max_n < 1:
        raise ConfigurationError("max_n must be >= 1")
    if not 0 < quality_frac <= 1:
        raise ConfigurationError("quality_frac must lie in (0, 1]")
    score = np.asarray(score, dtype=np.float64)
    peak = float(score.max(initial=0.0))
    if peak <= 0.0:
        return []
    threshold = quality_frac * peak
    ys, xs = np.nonzero(score >= threshold)
    values = score[ys, xs]
    order = np.lexsort((xs, ys, -values))
    ys, xs, values = ys[order], xs[order], values[order]
    picked_x: List[float] = []
    picked_y: List[float] = []
    out: List[FeaturePoint] = []
    min_d_sq = min_distance * min_distance
    for x, y, v in zip(xs, ys, values):
        if picked_x:
            dx = np.asarray(picked_x) - x
            dy = np.asarray(picked_y) - y
            if float((dx * dx + dy * dy).min()) < min_d_sq:
                continue
        out.append(FeaturePoint(float(x), float(y), float(v)))
        picked_x.append(float(x))
        picked_y.append(float(y))
        if len(out) >= max_n:
            break
    return out


# ---------------------------------------------------------------------------
# Pyramidal Lucas-Kanade
# ---------------------------------------------------------------------------


def _downsample(img: np.ndarray) -> np.ndarray:
    kernel = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
    blurred = ndimage.correlate1d(img, kernel, axis=0, mode="nearest")
    blurred = ndimage.correlate1d(blurred, kernel, axis=1, mode="nearest")
    return blurred[::2, ::2]


def _pyramid(img: np.ndarray, levels: int) -> List[np.ndarray]:
    out = [img]
    for _ in range(levels - 1):
        if min(out[-1].shape) < 4:
            break
        out.append(_downsample(out[-1]))
    return out


def _bilinear(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    # Callers guarantee 0 <= floor(coord) and floor(coord)+1 within bounds.
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    fy = ys - y0
    fx = xs - x0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x0 + 1] * fx
    bot = img[y0 + 1, x0] * (1.0 - fx) + img[y0 + 1, x0 + 1] * fx
    return top * (1.0 - fy) + bot * fy


def _window_ok(px: np.ndarray, py: np.ndarray, half: int, shape: Tuple[int, int]) -> np.ndarray:
    h, w = shape
    return (
        (px - half >= 0.0)
        & (py - half >= 0.0)
        & (px + half <= w - 2.0)
        & (py + half <= h - 2.0)
    )


def lk_track(
    prev: Frame,
    nxt: Frame,
    points: Sequence[FeaturePoint] | np.ndarray,
    *,
    window: int = 21,
    levels: int = 3,
    max_iter: int = 30,
    eps: float = 0.01,
) -> List[Tuple[Tuple[float, float], TrackStatus]]:
    """Track points from one frame to the next.

    A point is lost when its level-0 window exits the image, the local
    structure tensor is near-singular, or the iteration diverges beyond
    the window size. Coarse levels sample through a replicated border,
    so border features still get a pyramid initialization; a coarse
    center leaving the image skips that level's refinement.
    """
    if window < 3 or window % 2 == 0:
        raise ConfigurationError(f"window must be odd and >= 3, got {window}")
    if levels < 1:
        raise ConfigurationError("levels must be >= 1")
    if max_iter < 1:
        raise ConfigurationError("max_iter must be >= 1")
    if eps <= 0:
        raise ConfigurationError("eps must be positive")
    if (prev.height, prev.width) != (nxt.height, nxt.width):
        raise ValueError("frames must share dimensions")

    if isinstance(points, np.ndarray):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    else:
        pts = np.array([[p.x, p.y] for p in points], dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    if n == 0:
        return []

    half = window // 2
    # Coarse levels sample through an edge-replicated border so features
    # near the frame edge still benefit from pyramid initialization; the
    # window-exit loss rule applies at full resolution only.
    pad = half + 2
    prev_pyr = [np.pad(img, pad, mode="edge") for img in _pyramid(luma_array(prev), levels)]
    next_pyr = [np.pad(img, pad, mode="edge") for img in _pyramid(luma_array(nxt), levels)]
    shapes = [
        (img.shape[0] - 2 * pad, img.shape[1] - 2 * pad) for img in prev_pyr
    ]
    grads = [np.gradient(img) for img in prev_pyr]  # (gy, gx) per level

    offs = np.arange(-half, half + 1, dtype=np.float64)
    off_y, off_x = np.meshgrid(offs, offs, indexing="ij")
    off_y = off_y.ravel()
    off_x = off_x.ravel()

    lost = np.zeros(n, dtype=bool)
    disp = np.zeros((n, 2), dtype=np.float64)  # accumulated (x, y) displacement

    def _center_ok(px: np.ndarray, py: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
        h, w = shape
        return (px >= 0.0) & (py >= 0.0) & (px <= w - 1.0) & (py <= h - 1.0)

    for level in range(len(prev_pyr) - 1, -1, -1):
        scale = 2.0**level
        img_p = prev_pyr[level]
        img_n = next_pyr[level]
        gy, gx = grads[level]
        real_shape = shapes[level]
        base = pts / scale
        level_disp = disp / scale

        if level == 0:
            inside = _window_ok(base[:, 0], base[:, 1], half, real_shape) & ~lost
            lost |= ~inside & ~lost
        else:
            inside = _center_ok(base[:, 0], base[:, 1], real_shape) & ~lost
        active_idx = np.nonzero(inside)[0]
        if active_idx.size == 0:
            continue

        bx = base[active_idx, 0][:, None] + off_x[None, :] + pad
        by = base[active_idx, 1][:, None] + off_y[None, :] + pad
        t_patch = _bilinear(img_p, by, bx)
        gx_patch = _bilinear(gx, by, bx)
        gy_patch = _bilinear(gy, by, bx)

        sxx = np.sum(gx_patch * gx_patch, axis=1)
        sxy = np.sum(gx_patch * gy_patch, axis=1)
        syy = np.sum(gy_patch * gy_patch, axis=1)
        trace = sxx + syy
        det = sxx * syy - sxy * sxy
        root = np.sqrt(np.maximum(0.25 * trace * trace - det, 0.0))
        lam_min = 0.5 * trace - root
        lam_max = 0.5 * trace + root
        singular = lam_min <= _CONDITION_FLOOR * np.maximum(lam_max, 1.0)
        lost[active_idx[singular]] = True

        good = ~singular
        idx = active_idx[good]
        if idx.size == 0:
            continue
        inv_det = 1.0 / det[good]
        a11 = syy[good] * inv_det
        a12 = -sxy[good] * inv_det
        a22 = sxx[good] * inv_det
        gxp = gx_patch[good]
        gyp = gy_patch[good]
        tpatch = t_patch[good]
        v = level_disp[idx].copy()
        running = np.ones(idx.size, dtype=bool)
        bad = np.zeros(idx.size, dtype=bool)

        for _ in range(max_iter):
            if not running.any():
                break
            r = np.nonzero(running)[0]
            if level == 0:
                ok = _window_ok(
                    base[idx[r], 0] + v[r, 0], base[idx[r], 1] + v[r, 1], half, real_shape
                )
                bad[r[~ok]] = True
            else:
                ok = _center_ok(
                    base[idx[r], 0] + v[r, 0], base[idx[r], 1] + v[r, 1], real_shape
                )
            running[r[~ok]] = False
            r = r[ok]
            if r.size == 0:
                continue
            wx = bx[good][r] + v[r, 0][:, None]
            wy = by[good][r] + v[r, 1][:, None]
            err = tpatch[r] - _bilinear(img_n, wy, wx)
            b1 = np.sum(err * gxp[r], axis=1)
            b2 = np.sum(err * gyp[r], axis=1)
            dx = a11[r] * b1 + a12[r] * b2
            dy = a12[r] * b1 + a22[r] * b2
            v[r, 0] += dx
            v[r, 1] += dy
            diverged = np.hypot(v[r, 0], v[r, 1]) > window
            if level == 0:
                bad[r[diverged]] = True
            running[r[diverged]] = False
            done = np.hypot(dx, dy) < eps
            keep = ~diverged & ~done
            running[r[~keep]] = False

        lost[idx[bad]] = True
        level_disp[idx] = v
        disp = level_disp * scale

    results: List[Tuple[Tuple[float, float], TrackStatus]] = []
    final = pts + disp
    for i in range(n):
        if lost[i] or not np.isfinite(final[i]).all():
            results.append(((float(final[i, 0]), float(final[i, 1])), LOST))
        else:
            results.append(((float(final[i, 0]), float(final[i, 1])), COMPLETED))
    return results


# ---------------------------------------------------------------------------
# Forward-backward evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundResult:
    """One spawn round: where it started and how many features survived."""

    spawn_frame: int
    steps: int
    spawned: int
    completed: int
    within: Dict[float, int]


@dataclass(frozen=True)
class TrackingReport:
    """Aggregate forward-backward counts at each error margin."""

    spawned: int
    within: Dict[float, int]
    rounds: Tuple[RoundResult, ...]

    @property
    def within_1px(self) -> int:
        return self.within.get(1.0, 0)

    @property
    def within_5px(self) -> int:
        return self.within.get(5.0, 0)


def _spawn_frames(n_frames: int, fps: float, interval_s: float) -> List[int]:
    frames: List[int] = []
    k = 0
    while True:
        s = math.floor(k * interval_s * fps)
        if s > n_frames - 2:
            break
        if not frames or s > frames[-1]:
            frames.append(s)
        k += 1
    return frames


def forward_backward_eval(
    seq: FrameSequence, params: TrackingParams = TrackingParams()
) -> TrackingReport:
    """Spawn, track out and back, and score return errors per margin.

    Features whose tracking window would not fit the frame are never
    spawned; a feature lost in either direction fails every margin.
    """
    if len(seq) < 2:
        raise ConfigurationError(f"need at least 2 frames, got {len(seq)}")
    lumas = [luma_array(f) for f in seq]
    max_steps = math.floor(params.track_span_s * seq.fps)
    margins = params.margins
    rounds: List[RoundResult] = []

    # Keep spawn positions trackable: suppress responses wherever the
    # level-0 window cannot fit.
    guard = params.window // 2 + 2

    for spawn in _spawn_frames(len(seq), seq.fps, params.spawn_interval_s):
        steps = min(max_steps, len(seq) - 1 - spawn)
        if steps < 1:
            continue
        response = min_eig_response(Frame(lumas[spawn]), params.response_window)
        if response.shape[0] > 2 * guard and response.shape[1] > 2 * guard:
            response[:guard, :] = 0.0
            response[-guard:, :] = 0.0
            response[:, :guard] = 0.0
            response[:, -guard:] = 0.0
        else:
            response[:] = 0.0
        feats = select_features(
            response, params.max_features, params.quality_frac, params.min_distance
        )
        if not feats:
            rounds.append(RoundResult(spawn, steps, 0, 0, {m: 0 for m in margins}))
            continue
        start = np.array([[f.x, f.y] for f in feats], dtype=np.float64)
        pos = start.copy()
        alive = np.ones(len(feats), dtype=bool)

        path = list(range(spawn, spawn + steps + 1))
        for a, b in zip(path[:-1], path[1:]):
            alive_idx = np.nonzero(alive)[0]
            if alive_idx.size == 0:
                break
            tracked = lk_track(
                Frame(lumas[a]),
                Frame(lumas[b]),
                pos[alive_idx],
                window=params.window,
                levels=params.levels,
                max_iter=params.max_iter,
                eps=params.eps,
            )
            for j, (new_pos, status) in zip(alive_idx, tracked):
                if status == LOST:
                    alive[j] = False
                else:
                    pos[j] = new_pos
        for a, b in zip(path[::-1][:-1], path[::-1][1:]):
            alive_idx = np.nonzero(alive)[0]
            if alive_idx.size == 0:
                break
            tracked = lk_track(
                Frame(lumas[a]),
                Frame(lumas[b]),
                pos[alive_idx],
                window=params.window,
                levels=params.levels,
                max_iter=params.max_iter,
                eps=params.eps,
            )
            for j, (new_pos, status) in zip(alive_idx, tracked):
                if status == LOST:
                    alive[j] = False
                else:
                    pos[j] = new_pos

        errors = np.hypot(pos[:, 0] - start[:, 0], pos[:, 1] - start[:, 1])
        within = {
            m: int(np.sum(alive & (errors <= m))) for m in margins
        }
        rounds.append(RoundResult(spawn, steps, len(feats), int(alive.sum()), within))

    total_within = {m: sum(r.within[m] for r in rounds) for m in margins}
    return TrackingReport(
        spawned=sum(r.spawned for r in rounds),
        within=total_within,
        rounds=tuple(rounds),
    )
