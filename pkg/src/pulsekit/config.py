"""Run configuration: the small set of constants the pipeline depends on."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidInputError

# Physiologically plausible pulse band: 40-180 bpm.
HR_BAND_LO_HZ = 0.66
HR_BAND_HI_HZ = 3.0


@dataclass(frozen=True)
class PipelineConfig:
    """Pipeline constants; every field can be overridden by a config file.

    band_lo / band_hi   pulse band for filtering and HR peak search (Hz)
    s0                  sigmoid offset applied to peakedness scores before
                        gating; raw peak/mean ratios sit near 3-4 for noise,
                        far higher for periodic content
    eps                 denominator guard in peakedness ratios
    window_sec          confidence sliding-window length in seconds
    tau                 confidence threshold in the attention soft gate
    lambda_init         initial value of the learned gate scale
    pos_window_sec      projection window for the sliding-window extractor
    """

    band_lo: float = HR_BAND_LO_HZ
    band_hi: float = HR_BAND_HI_HZ
    s0: float = 4.0
    eps: float = 1e-8
    window_sec: float = 2.0
    tau: float = 0.5
    lambda_init: float = 1.0
    pos_window_sec: float = 1.6


def load_config(path) -> PipelineConfig:
    """Parse ``key=value`` lines (``#`` comments allowed) into a config."""
    fields = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}
    overrides: dict[str, float] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise InvalidInputError(f"config line {lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in fields:
            raise InvalidInputError(f"config line {lineno}: unknown key {key!r}")
        try:
            overrides[key] = float(value.strip())
        except ValueError as exc:
            raise InvalidInputError(f"config line {lineno}: {exc}") from exc
    return PipelineConfig(**overrides)
