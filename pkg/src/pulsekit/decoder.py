"""Structured-attention fusion of the two streams into a pulse waveform.

Token layout is fixed: map tokens first, then video tokens, one state token
carrying global confidence context, and ``N_q`` learned query tokens. A
structured mask controls who may attend to whom:

* map rows attending to video columns (and vice versa) pay a soft penalty
  ``-lambda * max(0, tau - conf)`` driven by the other stream's confidence;
* query rows may only read the map, video, and state tokens — all
  query-to-query weight (self included) is hard-masked so each query's
  attention mass lands entirely on the content tokens;
* nothing may write into the query columns except the state token;
* the state token attends everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .exchange import ConfBundle, FeatureMap2D, FeatureVolume, sigmoid
from .numerics import BVPSignal, RealSignal, standardize
from .validation import check_unit_interval

EMBED_DIM = 64
N_HEADS = 4
N_QUERY = 8
LAYERNORM_EPS = 1e-5


@dataclass
class TokenSet:
    """(n, d) token matrix with layout [map(0..T) | video(T..2T) | state | query]."""

    tokens: np.ndarray
    n_time: int
    n_query: int

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.float64)
        expected = 2 * self.n_time + 1 + self.n_query
        if self.tokens.ndim != 2 or self.tokens.shape[0] != expected:
            raise InvalidInputError(
                f"token matrix must be ({expected}, d) for T={self.n_time}, "
                f"N_q={self.n_query}; got {self.tokens.shape}"
            )

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]

    @property
    def stmap_tokens(self) -> np.ndarray:
        return self.tokens[: self.n_time]

    @property
    def video_tokens(self) -> np.ndarray:
        return self.tokens[self.n_time : 2 * self.n_time]

    @property
    def state_token(self) -> np.ndarray:
        return self.tokens[2 * self.n_time]

    @property
    def query_tokens(self) -> np.ndarray:
        return self.tokens[2 * self.n_time + 1 :]

    def like(self, tokens: np.ndarray) -> "TokenSet":
        return TokenSet(tokens, self.n_time, self.n_query)


@dataclass
class DecoderWeights:
    proj_v_W: np.ndarray   # (d, C) video token projection
    proj_v_b: np.ndarray   # (d,)
    proj_s_W: np.ndarray   # (d, C) map token projection
    proj_s_b: np.ndarray   # (d,)
    state_W: np.ndarray    # (d, 4) state token from the four confidence means
    state_b: np.ndarray    # (d,)
    query: np.ndarray      # (N_q, d) learned query tokens
    attn_Wq: np.ndarray    # (d, d)
    attn_Wk: np.ndarray    # (d, d)
    attn_Wv: np.ndarray    # (d, d)
    attn_Wo: np.ndarray    # (d, d)
    ffn_W1: np.ndarray     # (4d, d)
    ffn_b1: np.ndarray     # (4d,)
    ffn_W2: np.ndarray     # (d, 4d)
    ffn_b2: np.ndarray     # (d,)
    qmap_W: np.ndarray     # (d, d) broadcast map for the mean query token
    qmap_b: np.ndarray     # (d,)
    gate_delta_W: np.ndarray  # (d,)
    gate_delta_b: np.ndarray  # (1,)
    gate_alpha_W: np.ndarray  # (d,)
    gate_alpha_b: np.ndarray  # (1,)
    head_W: np.ndarray     # (d,) waveform readout
    head_b: np.ndarray     # (1,)
    lam: np.ndarray        # (1,) learned soft-gate scale

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "DecoderWeights":
        def get(name):
            return np.asarray(tensors[f"decoder.{name}"], dtype=np.float64)

        return cls(
            proj_v_W=get("proj_v.W"), proj_v_b=get("proj_v.b"),
            proj_s_W=get("proj_s.W"), proj_s_b=get("proj_s.b"),
            state_W=get("state.W"), state_b=get("state.b"),
            query=get("query"),
            attn_Wq=get("attn.Wq"), attn_Wk=get("attn.Wk"),
            attn_Wv=get("attn.Wv"), attn_Wo=get("attn.Wo"),
            ffn_W1=get("ffn.W1"), ffn_b1=get("ffn.b1"),
            ffn_W2=get("ffn.W2"), ffn_b2=get("ffn.b2"),
            qmap_W=get("qmap.W"), qmap_b=get("qmap.b"),
            gate_delta_W=get("gate_delta.W"), gate_delta_b=get("gate_delta.b"),
            gate_alpha_W=get("gate_alpha.W"), gate_alpha_b=get("gate_alpha.b"),
            head_W=get("head.W"), head_b=get("head.b"),
            lam=get("lambda"),
        )


def tokenize(
    v: FeatureVolume, s: FeatureMap2D, bundle: ConfBundle, w: DecoderWeights
) -> TokenSet:
    """Pool both streams per time step, project to the shared embedding, and
    assemble the full token matrix."""
    if v.n_frames != s.n_frames:
        raise InvalidInputError(
            f"streams disagree in frame count ({v.n_frames} != {s.n_frames})"
        )
    t = v.n_frames
    v_pooled = v.data.mean(axis=(2, 3)).T   # (T, C)
    s_pooled = s.data.mean(axis=1).T        # (T, C)
    video_tok = v_pooled @ w.proj_v_W.T + w.proj_v_b
    stmap_tok = s_pooled @ w.proj_s_W.T + w.proj_s_b
    state_tok = w.state_W @ bundle.means() + w.state_b
    tokens = np.concatenate(
        [stmap_tok, video_tok, state_tok[None], w.query], axis=0
    )
    return TokenSet(tokens, t, w.query.shape[0])


def build_mask(
    n_time: int, n_query: int, conf_v: float, conf_s: float, lam: float, tau: float
) -> np.ndarray:
    """The structured attention mask; entries are 0, a soft penalty, or -inf."""
    check_unit_interval(conf_v, "conf_v")
    check_unit_interval(conf_s, "conf_s")
    if lam < 0:
        raise InvalidInputError(f"lambda must be >= 0, got {lam}")
    n = 2 * n_time + 1 + n_query
    mask = np.zeros((n, n))
    sm = slice(0, n_time)
    vd = slice(n_time, 2 * n_time)
    qr = slice(2 * n_time + 1, n)
    mask[sm, vd] = -lam * max(0.0, tau - conf_v)
    mask[vd, sm] = -lam * max(0.0, tau - conf_s)
    mask[sm, qr] = -np.inf
    mask[vd, qr] = -np.inf
    mask[qr, qr] = -np.inf
    return mask


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore"):
        e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def attention_weights(x: TokenSet, mask: np.ndarray, w: DecoderWeights) -> np.ndarray:
    """Post-softmax attention weights per head: (heads, n, n)."""
    q = x.tokens @ w.attn_Wq.T
    k = x.tokens @ w.attn_Wk.T
    d_head = x.dim // N_HEADS
    if x.dim % N_HEADS:
        raise InvalidInputError(f"embedding dim {x.dim} not divisible by {N_HEADS} heads")
    weights = []
    for h in range(N_HEADS):
        sl = slice(h * d_head, (h + 1) * d_head)
        scores = q[:, sl] @ k[:, sl].T / np.sqrt(d_head) + mask
        weights.append(_softmax(scores))
    return np.stack(weights)


def masked_mhsa(x: TokenSet, mask: np.ndarray, w: DecoderWeights) -> TokenSet:
    """Masked multi-head self-attention; -inf mask entries give exactly zero weight."""
    att = attention_weights(x, mask, w)
    v = x.tokens @ w.attn_Wv.T
    d_head = x.dim // N_HEADS
    heads = [att[h] @ v[:, h * d_head : (h + 1) * d_head] for h in range(N_HEADS)]
    return x.like(np.concatenate(heads, axis=1) @ w.attn_Wo.T)


def layer_norm(x: np.ndarray) -> np.ndarray:
    """Per-token normalization over the embedding axis (no learned affine)."""
    centered = x - x.mean(axis=-1, keepdims=True)
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    return centered / np.sqrt(var + LAYERNORM_EPS)


def decoder_block(x: TokenSet, mask: np.ndarray, w: DecoderWeights) -> TokenSet:
    """One attention + feed-forward refinement round with pre-norm residuals."""
    x1 = layer_norm(x.tokens + masked_mhsa(x, mask, w).tokens)
    hidden = np.maximum(x1 @ w.ffn_W1.T + w.ffn_b1, 0.0)
    x2 = layer_norm(x1 + hidden @ w.ffn_W2.T + w.ffn_b2)
    return x.like(x2)


def softplus(x: float) -> float:
    return float(np.logaddexp(0.0, x))


def fusion_gates(state: np.ndarray, w: DecoderWeights) -> tuple[float, float]:
    """(delta, alpha): stream mixing weight in (0,1) and query output gain >= 0."""
    delta = float(sigmoid(w.gate_delta_W @ state + w.gate_delta_b[0]))
    alpha = softplus(w.gate_alpha_W @ state + w.gate_alpha_b[0])
    return delta, alpha


def fuse_tokens(x: TokenSet, delta: float, alpha: float, w: DecoderWeights) -> np.ndarray:
    """``delta * video + (1 - delta) * map + alpha * broadcast(mean query)``, (T, d)."""
    r_query = w.qmap_W @ x.query_tokens.mean(axis=0) + w.qmap_b
    return delta * x.video_tokens + (1.0 - delta) * x.stmap_tokens + alpha * r_query


def fuse_output(
    x: TokenSet, w: DecoderWeights, out_len: int, out_rate_hz: float
) -> BVPSignal:
    """Gated fusion of the refined tokens into the final pulse waveform.

    The mean query token is broadcast over time through a learned map, the
    per-time readout is linearly upsampled to ``out_len`` samples, and the
    result is standardized (HR metrics are amplitude-invariant).
    """
    delta, alpha = fusion_gates(x.state_token, w)
    fused = fuse_tokens(x, delta, alpha, w)
    wave = fused @ w.head_W + w.head_b[0]
    if out_len != wave.shape[0]:
        src = np.linspace(0.0, out_len - 1.0, wave.shape[0])
        wave = np.interp(np.arange(out_len), src, wave)
    raw = RealSignal(wave, out_rate_hz)
    centered = raw.samples - raw.samples.mean()
    scale = np.sqrt(np.mean(centered * centered))
    if scale == 0.0:
        # Degenerate weights can emit a constant; report silence rather than fail.
        return RealSignal(np.zeros(out_len), out_rate_hz)
    return standardize(raw)
