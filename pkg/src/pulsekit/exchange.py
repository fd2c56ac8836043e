"""Confidence-gated cross-stream exchange between video and map features.

One block: spatial alignment maps in both directions, frequency-domain
waveform matching of the streams' pooled time series, peakedness-based
confidence traces, and gated residual injection back into each stream.
Fully-closed gates make the block an exact identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .errors import InvalidInputError
from .numerics import median, xcorr_circular
from .validation import check_positive

# Sigmoid outputs are clamped into this open interval so confidence traces
# and attention maps stay strictly inside (0, 1) even at saturation.
_SIG_CLIP = 1e-12
# Gate activations below this are flushed to exact zero: a closed gate must
# leave the stream bit-identical, not perturbed at the 1e-9 level.
_GATE_FLUSH = 1e-8

TEMPLATE_GRID = 8  # learned spatial template resolution (8x8)


def sigmoid(x):
    # exp overflow saturates cleanly to 0/1; suppress the spurious warning.
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def sigmoid_strict(x):
    """Sigmoid clamped into the open interval (0, 1)."""
    return np.clip(sigmoid(x), _SIG_CLIP, 1.0 - _SIG_CLIP)


@dataclass
class FeatureVolume:
    """Video-stream features (C, T, Hv, Wv) plus their temporal rate."""

    data: np.ndarray
    fps: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 4:
            raise InvalidInputError(f"feature volume must be (C, T, H, W), got {self.data.shape}")
        self.fps = check_positive(self.fps, "fps")

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]


@dataclass
class FeatureMap2D:
    """Map-stream features (C, H', T) plus their temporal rate."""

    data: np.ndarray
    fps: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise InvalidInputError(f"feature map must be (C, H', T), got {self.data.shape}")
        self.fps = check_positive(self.fps, "fps")

    @property
    def n_frames(self) -> int:
        return self.data.shape[2]


@dataclass
class ConfidenceTrace:
    """Per-time-step gating signal in (0, 1) with window provenance."""

    values: np.ndarray
    window_len: int
    hop: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if np.any(self.values <= 0.0) or np.any(self.values >= 1.0):
            raise InvalidInputError("confidence values must lie strictly in (0, 1)")

    @property
    def mean(self) -> float:
        return float(self.values.mean())


@dataclass
class ConfBundle:
    """The four traces one exchange block produces."""

    conf_s2v: ConfidenceTrace
    conf_v2s: ConfidenceTrace
    conf_v: ConfidenceTrace
    conf_s: ConfidenceTrace

    def means(self) -> np.ndarray:
        """Time-means in the fixed order (s2v, v2s, v, s)."""
        return np.array(
            [self.conf_s2v.mean, self.conf_v2s.mean, self.conf_v.mean, self.conf_s.mean]
        )


@dataclass
class ExchangeWeights:
    """Learned parameters of one exchange block (channel count C)."""

    m0: np.ndarray            # (8, 8) spatial template
    mlp_s2v_W: np.ndarray     # (64, C*H') template refinement from map features
    mlp_s2v_b: np.ndarray     # (64,)
    proj_v2s_W: np.ndarray    # (C,) 1x1x1 channel-collapse conv
    proj_v2s_b: np.ndarray    # (1,)
    proj_tilde_s: np.ndarray  # (C, C) channel alignment, map -> video direction
    proj_tilde_v: np.ndarray  # (C, C) channel alignment, video -> map direction
    alpha_s2v: np.ndarray     # (C,) per-channel gate logits
    alpha_v2s: np.ndarray     # (C,)

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray], prefix: str) -> "ExchangeWeights":
        def get(name):
            return np.asarray(tensors[f"{prefix}.{name}"], dtype=np.float64)

        return cls(
            m0=get("m0"),
            mlp_s2v_W=get("mlp_s2v.W"),
            mlp_s2v_b=get("mlp_s2v.b"),
            proj_v2s_W=get("proj_v2s.W"),
            proj_v2s_b=get("proj_v2s.b"),
            proj_tilde_s=get("proj_tilde_s"),
            proj_tilde_v=get("proj_tilde_v"),
            alpha_s2v=get("alpha_s2v"),
            alpha_v2s=get("alpha_v2s"),
        )


# ---------------------------------------------------------------------------
# Alignment maps


def _nearest_upsample(grid: np.ndarray, h: int, w: int) -> np.ndarray:
    """Nearest-neighbor upsample of a 2-D grid to (h, w) via floor indexing."""
    gh, gw = grid.shape
    rows = (np.arange(h) * gh) // h
    cols = (np.arange(w) * gw) // w
    return grid[np.ix_(rows, cols)]


def align_s2v(s: FeatureMap2D, w: ExchangeWeights, hv: int, wv: int) -> np.ndarray:
    """Map-to-video attention map, (T, Hv, Wv), values strictly in (0, 1).

    The time-averaged map features refine a learned low-resolution template,
    which is upsampled to the video grid; the map is static over time.
    """
    s_mean = s.data.mean(axis=2).reshape(-1)  # (C*H',)
    if w.mlp_s2v_W.shape[1] != s_mean.shape[0]:
        raise InvalidInputError(
            f"alignment MLP expects {w.mlp_s2v_W.shape[1]} inputs, got {s_mean.shape[0]}"
        )
    template = w.m0 + (w.mlp_s2v_W @ s_mean + w.mlp_s2v_b).reshape(TEMPLATE_GRID, TEMPLATE_GRID)
    plane = sigmoid_strict(_nearest_upsample(template, hv, wv))
    return np.broadcast_to(plane, (s.n_frames, hv, wv))


def _pool_positions(values: np.ndarray, out_len: int) -> np.ndarray:
    """Adaptive 1-D average pooling over the last axis by equal-count bins."""
    n = values.shape[-1]
    edges = (np.arange(out_len + 1) * n) // out_len
    sums = np.add.reduceat(values, edges[:-1], axis=-1)
    counts = np.diff(edges)
    return sums / counts


def align_v2s(v: FeatureVolume, w: ExchangeWeights, h_map: int) -> np.ndarray:
    """Video-to-map attention map, (T, H'), values strictly in (0, 1)."""
    if w.proj_v2s_W.shape[0] != v.data.shape[0]:
        raise InvalidInputError(
            f"1x1x1 conv expects {w.proj_v2s_W.shape[0]} channels, got {v.data.shape[0]}"
        )
    plane = np.einsum("c,cthw->thw", w.proj_v2s_W, v.data) + w.proj_v2s_b[0]
    t = plane.shape[0]
    pooled = _pool_positions(plane.reshape(t, -1), h_map)  # (T, H')
    return sigmoid_strict(pooled)


# ---------------------------------------------------------------------------
# Waveform matching and confidences


def global_pool_volume(v: FeatureVolume) -> np.ndarray:
    """Spatial mean of a feature volume: (C, T)."""
    return v.data.mean(axis=(2, 3))


def global_pool_map(s: FeatureMap2D) -> np.ndarray:
    """ROI-axis mean of a feature map: (C, T)."""
    return s.data.mean(axis=1)


def waveform_match(a_global: np.ndarray, b_aligned: np.ndarray) -> np.ndarray:
    """Per-channel circular cross-correlation of mean-removed time series.

    Both inputs are (C, T); returns the correlation traces (C, T).
    """
    if a_global.shape != b_aligned.shape:
        raise InvalidInputError(
            f"waveform_match needs matching shapes, got {a_global.shape} vs {b_aligned.shape}"
        )
    a = a_global - a_global.mean(axis=1, keepdims=True)
    b = b_aligned - b_aligned.mean(axis=1, keepdims=True)
    return np.fft.irfft(np.conj(np.fft.rfft(a, axis=1)) * np.fft.rfft(b, axis=1), a.shape[1], axis=1)


def _windows(n: int, window_len: int, hop: int) -> list[int]:
    """Window start indices covering [0, n) including a tail window."""
    starts = list(range(0, n - window_len + 1, hop))
    if starts[-1] + window_len < n:
        starts.append(n - window_len)
    return starts


def _window_trace(scores: np.ndarray, starts: list[int], window_len: int, n: int) -> np.ndarray:
    """Expand per-window scores to a per-time-step trace by nearest window center."""
    centers = np.asarray(starts) + (window_len - 1) / 2.0
    idx = np.abs(np.arange(n)[:, None] - centers[None, :]).argmin(axis=1)
    return scores[idx]


def _peakedness_conf(
    per_window_score, n: int, window_len: int, hop: int, s0: float
) -> ConfidenceTrace:
    if not (1 <= window_len <= n):
        raise InvalidInputError(f"window_len {window_len} must lie in [1, {n}]")
    hop = max(1, hop)
    starts = _windows(n, window_len, hop)
    scores = np.array([per_window_score(a, a + window_len) for a in starts])
    conf = sigmoid_strict(scores - s0)
    return ConfidenceTrace(_window_trace(conf, starts, window_len, n), window_len, hop)


def consistency_confidence(
    r: np.ndarray, window_len: int, hop: int, s0: float = 4.0, eps: float = 1e-8
) -> ConfidenceTrace:
    """Peak-to-mean amplitude ratio of correlation traces, per sliding window.

    ``r`` is (C, T); the per-window score is the channel-wise (lower) median
    of ``max|r| / (eps + mean|r|)``, squashed by ``sigmoid(score - s0)``.
    """
    mag = np.abs(np.asarray(r, dtype=np.float64))

    def score(a: int, b: int) -> float:
        seg = mag[:, a:b]
        ratios = seg.max(axis=1) / (eps + seg.mean(axis=1))
        return median(ratios)

    return _peakedness_conf(score, mag.shape[1], window_len, hop, s0)


def spectral_confidence(
    g: np.ndarray, window_len: int, hop: int, s0: float = 4.0, eps: float = 1e-8
) -> ConfidenceTrace:
    """Peak-to-mean power ratio of windowed spectra, DC bin excluded.

    ``g`` is (C, T); per window and channel the power spectrum of the raw
    segment is taken, its DC bin dropped, and ``max / (eps + mean)`` of the
    remaining bins scored as in :func:`consistency_confidence`.
    """
    g = np.asarray(g, dtype=np.float64)

    def score(a: int, b: int) -> float:
        seg = g[:, a:b]
        if seg.shape[1] < 2:
            return 0.0
        power = np.abs(np.fft.rfft(seg, axis=1)) ** 2
        nondc = power[:, 1:]
        ratios = nondc.max(axis=1) / (eps + nondc.mean(axis=1))
        return median(ratios)

    return _peakedness_conf(score, g.shape[1], window_len, hop, s0)


# ---------------------------------------------------------------------------
# Gating and injection


def gains(
    conf_s2v: ConfidenceTrace,
    conf_s: ConfidenceTrace,
    conf_v2s: ConfidenceTrace,
    conf_v: ConfidenceTrace,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-time gains: cross-consistency times the source stream's own quality."""
    lengths = {len(c.values) for c in (conf_s2v, conf_s, conf_v2s, conf_v)}
    if len(lengths) != 1:
        raise InvalidInputError(f"confidence traces disagree in length: {sorted(lengths)}")
    gain_v = conf_s2v.values * conf_s.values
    gain_s = conf_v2s.values * conf_v.values
    return gain_v, gain_s


def residual_traces(r: np.ndarray, gain: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Gate the correlation traces: ``sigmoid(alpha_c) * r(c,t) * gain(t)``.

    Gates below ``1e-8`` are flushed to exact zero so that a closed gate
    yields a bit-exact identity downstream.
    """
    gate = sigmoid(np.asarray(alpha, dtype=np.float64))
    gate[gate < _GATE_FLUSH] = 0.0
    return gate[:, None] * r * gain[None, :]


def inject(
    v: FeatureVolume,
    s: FeatureMap2D,
    res_v: np.ndarray,
    res_s: np.ndarray,
    a_s2v: np.ndarray,
    a_v2s: np.ndarray,
) -> tuple[FeatureVolume, FeatureMap2D]:
    """Broadcast residual traces through the attention maps and add back."""
    c_v, t = res_v.shape
    if v.data.shape[0] != c_v or v.data.shape[1] != t or a_s2v.shape != v.data.shape[1:]:
        raise InvalidInputError("video-side shapes inconsistent for injection")
    c_s, t_s = res_s.shape
    if s.data.shape[0] != c_s or s.data.shape[2] != t_s or a_v2s.shape != (t_s, s.data.shape[1]):
        raise InvalidInputError("map-side shapes inconsistent for injection")
    v_inc = a_s2v[None] * res_v[:, :, None, None]
    s_inc = a_v2s.T[None] * res_s[:, None, :]
    return FeatureVolume(v.data + v_inc, v.fps), FeatureMap2D(s.data + s_inc, s.fps)


def window_params(fps: float, n: int, window_sec: float = 2.0) -> tuple[int, int]:
    """Sliding-window length (samples) and hop for confidence estimation."""
    window_len = min(n, max(2, int(round(window_sec * fps))))
    return window_len, max(1, window_len // 2)


def exchange_block(
    v: FeatureVolume,
    s: FeatureMap2D,
    w: ExchangeWeights,
    cfg: PipelineConfig | None = None,
) -> tuple[FeatureVolume, FeatureMap2D, ConfBundle]:
    """Run one full bidirectional exchange; returns updated streams + confidences."""
    cfg = cfg or PipelineConfig()
    if v.fps != s.fps:
        raise InvalidInputError(f"stream rates differ ({v.fps} != {s.fps})")
    if v.n_frames != s.n_frames:
        raise InvalidInputError(
            f"streams disagree in frame count ({v.n_frames} != {s.n_frames})"
        )
    t = v.n_frames
    h_map = s.data.shape[1]
    hv, wv = v.data.shape[2], v.data.shape[3]

    a_s2v = align_s2v(s, w, hv, wv)
    a_v2s = align_v2s(v, w, h_map)

    v_global = global_pool_volume(v)
    s_global = global_pool_map(s)
    s_tilde = w.proj_tilde_s @ s_global
    v_tilde = w.proj_tilde_v @ v_global

    r_s2v = waveform_match(v_global, s_tilde)
    r_v2s = waveform_match(s_global, v_tilde)

    window_len, hop = window_params(v.fps, t, cfg.window_sec)
    conf_s2v = consistency_confidence(r_s2v, window_len, hop, cfg.s0, cfg.eps)
    conf_v2s = consistency_confidence(r_v2s, window_len, hop, cfg.s0, cfg.eps)
    conf_v = spectral_confidence(v_global, window_len, hop, cfg.s0, cfg.eps)
    conf_s = spectral_confidence(s_global, window_len, hop, cfg.s0, cfg.eps)

    gain_v, gain_s = gains(conf_s2v, conf_s, conf_v2s, conf_v)
    res_v = residual_traces(r_s2v, gain_v, w.alpha_s2v)
    res_s = residual_traces(r_v2s, gain_s, w.alpha_v2s)

    v_out, s_out = inject(v, s, res_v, res_s, a_s2v, a_v2s)
    return v_out, s_out, ConfBundle(conf_s2v, conf_v2s, conf_v, conf_s)
