"""Pixel-difference convolution: modeling local change instead of intensity.

Two 3x3 difference patterns feed a learned fusion:

* central: each of the 8 neighbors minus the center pixel;
* ring: consecutive neighbor pairs walked clockwise around the center.

Both annihilate constants, so the block rejects static background and DC
illumination exactly — no bias terms anywhere, ReLU(0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

# Neighbor offsets (dy, dt) in fixed clockwise order starting at N.
NEIGHBOR_OFFSETS = (
    (-1, 0),   # N
    (-1, 1),   # NE
    (0, 1),    # E
    (1, 1),    # SE
    (1, 0),    # S
    (1, -1),   # SW
    (0, -1),   # W
    (-1, -1),  # NW
)


@dataclass
class PdcWeights:
    """Weights of one pixel-difference block (no biases by design)."""

    Wc: np.ndarray  # (Cout, Cin, 8) central-difference weights
    Wr: np.ndarray  # (Cout, Cin, 8) ring-difference weights
    Wf: np.ndarray  # (Cout, 2*Cout) fusion of the concatenated branches

    def __post_init__(self):
        self.Wc = np.asarray(self.Wc, dtype=np.float64)
        self.Wr = np.asarray(self.Wr, dtype=np.float64)
        self.Wf = np.asarray(self.Wf, dtype=np.float64)
        if self.Wc.ndim != 3 or self.Wc.shape[2] != 8:
            raise InvalidInputError(f"Wc must be (Cout, Cin, 8), got {self.Wc.shape}")
        if self.Wr.shape != self.Wc.shape:
            raise InvalidInputError("Wr must match Wc's shape")
        cout = self.Wc.shape[0]
        if self.Wf.shape != (cout, 2 * cout):
            raise InvalidInputError(f"Wf must be ({cout}, {2 * cout}), got {self.Wf.shape}")

    @property
    def c_in(self) -> int:
        return self.Wc.shape[1]

    @property
    def c_out(self) -> int:
        return self.Wc.shape[0]


def _neighbor_stack(x: np.ndarray) -> np.ndarray:
    """All 8 neighbor planes of a (C, H, T) map with replicate padding -> (8, C, H, T)."""
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)), mode="edge")
    h, t = x.shape[1], x.shape[2]
    return np.stack(
        [padded[:, 1 + dy : 1 + dy + h, 1 + dt : 1 + dt + t] for dy, dt in NEIGHBOR_OFFSETS]
    )


def central_diffs(x: np.ndarray, i: int, j: int) -> np.ndarray:
    """Neighbor-minus-center differences at one position: (C, 8)."""
    x = np.asarray(x, dtype=np.float64)
    stack = _neighbor_stack(x)
    return (stack[:, :, i, j] - x[:, i, j]).T


def ring_diffs(x: np.ndarray, i: int, j: int) -> np.ndarray:
    """Clockwise consecutive neighbor differences at one position: (C, 8)."""
    x = np.asarray(x, dtype=np.float64)
    stack = _neighbor_stack(x)
    ring = stack[:, :, i, j]  # (8, C)
    return (ring - np.roll(ring, -1, axis=0)).T


def pdc_preactivation(x: np.ndarray, w: PdcWeights) -> np.ndarray:
    """The linear stage of the block (before ReLU): (Cout, H, T).

    Exposed separately because it is exactly linear in ``x``, which the
    sensitivity and scaling properties rely on.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise InvalidInputError(f"feature map must be (C, H, T), got shape {x.shape}")
    if x.shape[0] != w.c_in:
        raise InvalidInputError(f"expected {w.c_in} input channels, got {x.shape[0]}")
    stack = _neighbor_stack(x)        # (8, C, H, T)
    d_central = stack - x[None]
    d_ring = stack - np.roll(stack, -1, axis=0)
    u = np.einsum("ock,kcht->oht", w.Wc, d_central)
    v = np.einsum("ock,kcht->oht", w.Wr, d_ring)
    branches = np.concatenate([u, v], axis=0)  # (2*Cout, H, T)
    return np.einsum("oj,jht->oht", w.Wf, branches)


def pdc_forward(x: np.ndarray, w: PdcWeights) -> np.ndarray:
    """ReLU of the fused difference responses."""
    return np.maximum(pdc_preactivation(x, w), 0.0)


def sdmu_block(x: np.ndarray, w: PdcWeights) -> np.ndarray:
    """Residual form ``x + pdc_forward(x)``: enhances rather than replaces."""
    x = np.asarray(x, dtype=np.float64)
    if w.c_out != x.shape[0]:
        raise InvalidInputError(
            f"residual block needs Cout == Cin ({w.c_out} != {x.shape[0]})"
        )
    return x + pdc_forward(x, w)
