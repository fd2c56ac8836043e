"""Model parameter registry: shapes, seeded init, save/load, counting.

Every tensor is drawn uniformly from ``[-k, k]`` with ``k = 1 / sqrt(fan_in)``
using numpy's seeded PCG64 generator, then rounded to float32 so that a
freshly initialized model and a reloaded one are bit-identical. The learned
soft-gate scale is the one constant-initialized tensor.

The full name scheme is documented in docs/weights.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decoder import EMBED_DIM, N_QUERY
from .errors import IncompleteWeightsError, InvalidInputError
from .exchange import TEMPLATE_GRID
from .media_io import read_tensors, write_tensors

VIDEO_CHANNELS = (3, 16, 32, 64)
STMAP_CHANNELS = (3, 16, 32, 64)
N_ROIS_DEFAULT = 25
EXCHANGE_SCALES = ("t1", "t2", "t4")  # temporal scales T, T/2, T/4


@dataclass(frozen=True)
class TensorSpec:
    name: str
    shape: tuple[int, ...]
    fan_in: int
    const: float | None = None  # constant init instead of uniform draw


def _conv3d_specs(name: str, c_in: int, c_out: int) -> list[TensorSpec]:
    fan = c_in * 27
    return [
        TensorSpec(f"{name}.W", (c_out, c_in, 3, 3, 3), fan),
        TensorSpec(f"{name}.b", (c_out,), fan),
    ]


def _conv2d_specs(name: str, c_in: int, c_out: int) -> list[TensorSpec]:
    fan = c_in * 9
    return [
        TensorSpec(f"{name}.W", (c_out, c_in, 3, 3), fan),
        TensorSpec(f"{name}.b", (c_out,), fan),
    ]


def _pdc_specs(name: str, c: int) -> list[TensorSpec]:
    return [
        TensorSpec(f"{name}.Wc", (c, c, 8), c * 8),
        TensorSpec(f"{name}.Wr", (c, c, 8), c * 8),
        TensorSpec(f"{name}.Wf", (c, 2 * c), 2 * c),
    ]


def _exchange_specs(name: str, c: int, n_rois: int) -> list[TensorSpec]:
    t2 = TEMPLATE_GRID * TEMPLATE_GRID
    return [
        TensorSpec(f"{name}.m0", (TEMPLATE_GRID, TEMPLATE_GRID), 1),
        TensorSpec(f"{name}.mlp_s2v.W", (t2, c * n_rois), c * n_rois),
        TensorSpec(f"{name}.mlp_s2v.b", (t2,), c * n_rois),
        TensorSpec(f"{name}.proj_v2s.W", (c,), c),
        TensorSpec(f"{name}.proj_v2s.b", (1,), c),
        TensorSpec(f"{name}.proj_tilde_s", (c, c), c),
        TensorSpec(f"{name}.proj_tilde_v", (c, c), c),
        TensorSpec(f"{name}.alpha_s2v", (c,), 1),
        TensorSpec(f"{name}.alpha_v2s", (c,), 1),
    ]


def _decoder_specs(c_top: int, lambda_init: float) -> list[TensorSpec]:
    d = EMBED_DIM
    return [
        TensorSpec("decoder.proj_v.W", (d, c_top), c_top),
        TensorSpec("decoder.proj_v.b", (d,), c_top),
        TensorSpec("decoder.proj_s.W", (d, c_top), c_top),
        TensorSpec("decoder.proj_s.b", (d,), c_top),
        TensorSpec("decoder.state.W", (d, 4), 4),
        TensorSpec("decoder.state.b", (d,), 4),
        TensorSpec("decoder.query", (N_QUERY, d), d),
        TensorSpec("decoder.attn.Wq", (d, d), d),
        TensorSpec("decoder.attn.Wk", (d, d), d),
        TensorSpec("decoder.attn.Wv", (d, d), d),
        TensorSpec("decoder.attn.Wo", (d, d), d),
        TensorSpec("decoder.ffn.W1", (4 * d, d), d),
        TensorSpec("decoder.ffn.b1", (4 * d,), d),
        TensorSpec("decoder.ffn.W2", (d, 4 * d), 4 * d),
        TensorSpec("decoder.ffn.b2", (d,), 4 * d),
        TensorSpec("decoder.qmap.W", (d, d), d),
        TensorSpec("decoder.qmap.b", (d,), d),
        TensorSpec("decoder.gate_delta.W", (d,), d),
        TensorSpec("decoder.gate_delta.b", (1,), d),
        TensorSpec("decoder.gate_alpha.W", (d,), d),
        TensorSpec("decoder.gate_alpha.b", (1,), d),
        TensorSpec("decoder.head.W", (d,), d),
        TensorSpec("decoder.head.b", (1,), d),
        TensorSpec("decoder.lambda", (1,), 1, const=lambda_init),
    ]


def tensor_specs(n_rois: int = N_ROIS_DEFAULT, lambda_init: float = 1.0) -> list[TensorSpec]:
    """The complete ordered tensor list of the default configuration."""
    specs: list[TensorSpec] = []
    specs += _conv3d_specs("video.stem", VIDEO_CHANNELS[0], VIDEO_CHANNELS[1])
    specs += _conv3d_specs("video.stage1", VIDEO_CHANNELS[1], VIDEO_CHANNELS[2])
    specs += _conv3d_specs("video.stage2", VIDEO_CHANNELS[2], VIDEO_CHANNELS[3])
    specs += _conv2d_specs("stmap.stem", STMAP_CHANNELS[0], STMAP_CHANNELS[1])
    specs += _conv2d_specs("stmap.stage1", STMAP_CHANNELS[1], STMAP_CHANNELS[2])
    specs += _conv2d_specs("stmap.stage2", STMAP_CHANNELS[2], STMAP_CHANNELS[3])
    specs += _pdc_specs("sdmu.stem", STMAP_CHANNELS[1])
    specs += _pdc_specs("sdmu.stage1", STMAP_CHANNELS[2])
    specs += _pdc_specs("sdmu.stage2", STMAP_CHANNELS[3])
    for scale, c in zip(EXCHANGE_SCALES, VIDEO_CHANNELS[1:]):
        specs += _exchange_specs(f"dceb.{scale}", c, n_rois)
    specs += _decoder_specs(VIDEO_CHANNELS[-1], lambda_init)
    return specs


@dataclass
class ModelWeights:
    """Named float64 tensors (float32-representable) plus the init seed."""

    tensors: dict[str, np.ndarray]
    seed: int | None = None
    n_rois: int = N_ROIS_DEFAULT
    _order: list[str] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self._order:
            self._order = list(self.tensors.keys())

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        if name not in self.tensors:
            self._order.append(name)
        self.tensors[name] = np.asarray(value, dtype=np.float64)

    def names(self) -> list[str]:
        return list(self._order)

    def param_count(self) -> int:
        return sum(int(t.size) for t in self.tensors.values())


def init_weights(
    seed: int, n_rois: int = N_ROIS_DEFAULT, lambda_init: float = 1.0
) -> ModelWeights:
    """Deterministic default init; same seed gives bit-identical weights."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for spec in tensor_specs(n_rois, lambda_init):
        if spec.const is not None:
            values = np.full(spec.shape, spec.const)
        else:
            k = 1.0 / np.sqrt(spec.fan_in)
            values = rng.uniform(-k, k, size=spec.shape)
        # Round through float32 so init == save -> load exactly.
        tensors[spec.name] = values.astype(np.float32).astype(np.float64)
    return ModelWeights(tensors, seed=seed, n_rois=n_rois)


def save_weights(weights: ModelWeights, path) -> None:
    write_tensors([(name, weights.tensors[name]) for name in weights.names()], path)


def load_weights(path, n_rois: int | None = None) -> ModelWeights:
    """Load and validate a weight file; unknown extra tensors are kept."""
    raw = read_tensors(path)
    if n_rois is None:
        n_rois = _infer_n_rois(raw)
    required = tensor_specs(n_rois)
    missing = [s.name for s in required if s.name not in raw]
    if missing:
        raise IncompleteWeightsError(missing)
    for spec in required:
        if tuple(raw[spec.name].shape) != spec.shape:
            raise InvalidInputError(
                f"tensor {spec.name} has shape {raw[spec.name].shape}, expected {spec.shape}"
            )
    tensors = {name: arr.astype(np.float64) for name, arr in raw.items()}
    return ModelWeights(tensors, seed=None, n_rois=n_rois)


def _infer_n_rois(raw: dict[str, np.ndarray]) -> int:
    name = "dceb.t1.mlp_s2v.W"
    if name not in raw:
        raise IncompleteWeightsError([name])
    cols = raw[name].shape[1]
    c = VIDEO_CHANNELS[1]
    if cols % c:
        raise InvalidInputError(f"{name} width {cols} is not a multiple of {c} channels")
    return cols // c
