"""Windowed cross-correlation features over the Q-channel behavioral series.

Each window yields a Q x Q matrix: entry (i, j) is the signed Pearson
correlation between channel i and channel j evaluated over a symmetric set
of frame lags, keeping the value whose absolute magnitude is largest (a
positive lag means channel j trails channel i; on ties the smallest lag in
ascending order wins).  A video is summarized by averaging the row-major
flattened window matrices into one Q^2 vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CoefficientSeries, _readonly
from .errors import InputError

HEAD_CHANNEL_NAMES = ("pitch", "yaw", "roll")


@dataclass(frozen=True)
class WccConfig:
    window_seconds: float = 4.0
    window_stride_seconds: float | None = None  # defaults to window_seconds / 2
    lag_range_seconds: float = 1.0
    lag_step_frames: int = 1
    selected_channels: tuple[int, ...] | None = None

    def __post_init__(self):
        if not (np.isfinite(self.window_seconds) and self.window_seconds > 0):
            raise InputError("window_seconds must be a positive finite real")
        if self.window_stride_seconds is not None and not (
                np.isfinite(self.window_stride_seconds)
                and self.window_stride_seconds > 0):
            raise InputError("window_stride_seconds must be positive when given")
        if not (np.isfinite(self.lag_range_seconds) and self.lag_range_seconds >= 0):
            raise InputError("lag_range_seconds must be a nonnegative finite real")
        if self.lag_step_frames < 1:
            raise InputError("lag_step_frames must be a positive integer")
        if self.selected_channels is not None:
            object.__setattr__(self, "selected_channels",
                               tuple(int(c) for c in self.selected_channels))

    @property
    def stride_seconds(self) -> float:
        if self.window_stride_seconds is None:
            return self.window_seconds / 2.0
        return self.window_stride_seconds


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Per-video representation: the Q^2 averaged window correlations."""

    values: np.ndarray
    channel_names: tuple[str, ...]
    window_count: int

    def __post_init__(self):
        values = _readonly(self.values)
        names = tuple(self.channel_names)
        if values.ndim != 1 or values.size != len(names) ** 2:
            raise InputError(
                f"expected {len(names) ** 2} values for {len(names)} channels, "
                f"got shape {values.shape}")
        if not np.isfinite(values).all():
            raise InputError("feature values must be finite")
        if values.size and (values.min() < -1.0 or values.max() > 1.0):
            raise InputError("feature values must lie in [-1, 1]")
        if self.window_count < 0:
            raise InputError("window_count must be nonnegative")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_names", names)


def default_channel_names(bu_count: int) -> tuple[str, ...]:
    return tuple(f"bu{k + 1}" for k in range(bu_count)) + HEAD_CHANNEL_NAMES


def window_plan(cfg: WccConfig, frame_rate: float) -> tuple[int, int, int]:
    """Resolve (window, stride, lag range) from seconds to frames at a rate."""
    window = int(round(cfg.window_seconds * frame_rate))
    stride = max(1, int(round(cfg.stride_seconds * frame_rate)))
    lag = int(round(cfg.lag_range_seconds * frame_rate))
    if window < 2:
        raise InputError(
            f"window of {cfg.window_seconds} s spans {window} frames at "
            f"{frame_rate} fps; at least 2 are required")
    if lag >= window:
        raise InputError(
            f"lag range of {lag} frames must be shorter than the {window}-frame window")
    return window, stride, lag


def channel_matrix(series: CoefficientSeries) -> np.ndarray:
    """T x Q signal matrix: basis-unit channels first, then pitch, yaw, roll."""
    return np.hstack([series.bu_coefficients, series.head_rotation])


def resolve_channels(series: CoefficientSeries, cfg: WccConfig) -> np.ndarray:
    total = series.channel_count
    if cfg.selected_channels is None:
        return np.arange(total)
    idx = np.asarray(cfg.selected_channels, dtype=int)
    if idx.size == 0:
        raise InputError("selected_channels must not be empty")
    if len(set(idx.tolist())) != idx.size:
        raise InputError("selected_channels contains duplicates")
    if idx.min() < 0 or idx.max() >= total:
        raise InputError(
            f"selected_channels must lie in [0, {total}), got {idx.tolist()}")
    return idx


def _constant_columns(segment: np.ndarray) -> np.ndarray:
    return np.all(segment == segment[0:1, :], axis=0)


def _normalized(segment: np.ndarray) -> np.ndarray:
    """Columns centered and scaled to unit norm; constant columns become 0."""
    const = _constant_columns(segment)
    centered = segment - segment.mean(axis=0)
    norms = np.linalg.norm(centered, axis=0)
    safe = np.where(const | (norms == 0.0), 1.0, norms)
    out = centered / safe
    out[:, const] = 0.0
    return out


def _lagged_corr(window: np.ndarray, lag: int) -> np.ndarray:
    """corr(x_i[t], x_j[t + lag]) over the in-window overlap, for all pairs;
    pairs with a constant segment contribute 0."""
    if lag == 0:
        normed = _normalized(window)
        corr = normed.T @ normed
        return (corr + corr.T) / 2.0  # exact symmetry at zero lag
    lead = _normalized(window[:-lag])
    trail = _normalized(window[lag:])
    return lead.T @ trail


def _window_matrix(window: np.ndarray, lag_range: int, lag_step: int) -> np.ndarray:
    positive = {lag: _lagged_corr(window, lag)
                for lag in range(0, lag_range + 1, lag_step)}
    ordered = sorted(set(positive) | {-lag for lag in positive})
    cube = np.stack([positive[lag] if lag >= 0 else positive[-lag].T
                     for lag in ordered])
    pick = np.argmax(np.abs(cube), axis=0)
    out = np.take_along_axis(cube, pick[None], axis=0)[0]
    out = np.clip(out, -1.0, 1.0)
    const = _constant_columns(window)
    out[const, :] = 0.0
    out[:, const] = 0.0
    diag = np.arange(window.shape[1])
    out[diag, diag] = np.where(const, 0.0, 1.0)
    return out


def window_wcc(series: CoefficientSeries, cfg: WccConfig | None = None,
               window_start_frame: int = 0) -> np.ndarray:
    """Q x Q lagged-correlation matrix for one window.

    Diagonal entries are exactly 1 for channels with any within-window
    variation; channels constant over the window get 0 across their whole
    row and column, diagonal included.
    """
    cfg = cfg or WccConfig()
    window, _, lag = window_plan(cfg, series.frame_rate)
    channels = channel_matrix(series)[:, resolve_channels(series, cfg)]
    start = int(window_start_frame)
    if start < 0 or start + window > channels.shape[0]:
        raise InputError(
            f"window [{start}, {start + window}) is out of bounds for "
            f"{channels.shape[0]} frames")
    return _window_matrix(channels[start:start + window], lag, cfg.lag_step_frames)


def video_features(series: CoefficientSeries, cfg: WccConfig | None = None,
                   channel_names=None) -> FeatureVector:
    """Average the flattened window matrices over all windows of a video.

    Window starts advance by the stride while a full window fits.  With K=50
    basis units plus the three head channels the result has 53^2 = 2809
    entries.
    """
    cfg = cfg or WccConfig()
    window, stride, lag = window_plan(cfg, series.frame_rate)
    if series.frame_count < window:
        raise InputError(
            f"series has {series.frame_count} frames; at least {window} are "
            f"required for one window")
    if channel_names is None:
        names = default_channel_names(series.bu_coefficients.shape[1])
    else:
        names = tuple(channel_names)
        if len(names) != series.channel_count:
            raise InputError(
                f"{len(names)} channel names for {series.channel_count} channels")
    selected = resolve_channels(series, cfg)
    channels = channel_matrix(series)[:, selected]
    flats = [
        _window_matrix(channels[start:start + window], lag, cfg.lag_step_frames).ravel()
        for start in range(0, series.frame_count - window + 1, stride)
    ]
    return FeatureVector(
        values=np.stack(flats).mean(axis=0),
        channel_names=tuple(names[i] for i in selected),
        window_count=len(flats))


def feature_pair_names(channel_names) -> tuple[tuple[str, str], ...]:
    """Row-major (channel_i, channel_j) pair for every feature index."""
    names = tuple(channel_names)
    return tuple((a, b) for a in names for b in names)
