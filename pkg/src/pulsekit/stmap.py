"""Spatial-temporal maps: per-ROI color time series stacked over time.

A frame is partitioned into a ``rows x cols`` grid; each cell's spatial mean
per channel, tracked over time, becomes one map row. Rows are min-max
normalized over time so the map is invariant to constant offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import InvalidInputError
from .media_io import FrameSequence, read_tensors, write_tensors
from .validation import check_positive

DEFAULT_GRID = (5, 5)


@dataclass
class STMap:
    """(3, H', T) map in [0, 1]; H' = rows * cols grid cells."""

    data: np.ndarray
    fps: float
    grid: tuple[int, int]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        rows, cols = self.grid
        if data.ndim != 3 or data.shape[0] != 3:
            raise InvalidInputError(f"STMap data must be (3, H', T), got {data.shape}")
        if data.shape[1] != rows * cols:
            raise InvalidInputError(f"H'={data.shape[1]} does not match grid {rows}x{cols}")
        if np.any(data < 0.0) or np.any(data > 1.0) or not np.all(np.isfinite(data)):
            raise InvalidInputError("STMap values must lie in [0, 1]")
        self.data = data
        self.fps = check_positive(self.fps, "fps")

    @property
    def n_rois(self) -> int:
        return self.data.shape[1]

    @property
    def frame_count(self) -> int:
        return self.data.shape[2]


def _grid_edges(length: int, cells: int) -> np.ndarray:
    """Cell boundaries: equal-size cells, remainder pixels going to the last."""
    base = length // cells
    edges = np.arange(cells + 1) * base
    edges[-1] = length
    return edges


def build_stmap(clip: FrameSequence, rows: int = 5, cols: int = 5) -> STMap:
    """Build the ROI-grid map from a clip.

    Normalization is computed on per-cell pixel *sums* so that an integer
    offset applied to every pixel cancels exactly.
    """
    if rows < 1 or cols < 1:
        raise InvalidInputError("grid must have at least one cell")
    if clip.height < rows or clip.width < cols:
        raise InvalidInputError(
            f"grid {rows}x{cols} larger than frame {clip.height}x{clip.width}"
        )
    frames = clip.frames.astype(np.float64)  # (T, H, W, 3), exact uint8 values
    row_edges = _grid_edges(clip.height, rows)
    col_edges = _grid_edges(clip.width, cols)
    # Per-cell channel sums over time: (T, rows, cols, 3)
    col_sums = np.add.reduceat(frames, col_edges[:-1], axis=2)
    cell_sums = np.add.reduceat(col_sums, row_edges[:-1], axis=1)
    # (3, rows*cols, T)
    series = cell_sums.reshape(clip.frame_count, rows * cols, 3).transpose(2, 1, 0)

    lo = series.min(axis=2, keepdims=True)
    hi = series.max(axis=2, keepdims=True)
    span = hi - lo
    flat = span == 0.0
    span[flat] = 1.0
    data = (series - lo) / span
    data[np.broadcast_to(flat, data.shape)] = 0.5
    return STMap(data, clip.fps, (rows, cols))


def save_stmap(stmap: STMap, path) -> None:
    """Serialize as a tensor file: entries ``stmap``, ``stmap.fps``, ``stmap.grid``."""
    write_tensors(
        [
            ("stmap", stmap.data),
            ("stmap.fps", np.asarray([stmap.fps])),
            ("stmap.grid", np.asarray(stmap.grid, dtype=np.float64)),
        ],
        path,
    )


def load_stmap(path) -> STMap:
    tensors = read_tensors(path)
    for required in ("stmap", "stmap.fps", "stmap.grid"):
        if required not in tensors:
            raise InvalidInputError(f"tensor file has no {required!r} entry")
    grid = tensors["stmap.grid"].astype(int)
    return STMap(
        np.asarray(tensors["stmap"], dtype=np.float64),
        float(tensors["stmap.fps"][0]),
        (int(grid[0]), int(grid[1])),
    )


class StmapBuilder(BaseEstimator, TransformerMixin):
    """Estimator wrapper around :func:`build_stmap`.

    Stateless: ``fit`` only validates parameters, ``transform`` maps a
    :class:`FrameSequence` to an :class:`STMap`.
    """

    def __init__(self, rows: int = 5, cols: int = 5):
        self.rows = rows
        self.cols = cols

    def fit(self, X=None, y=None):
        if self.rows < 1 or self.cols < 1:
            raise InvalidInputError("grid must have at least one cell")
        return self

    def transform(self, X: FrameSequence) -> STMap:
        return build_stmap(X, self.rows, self.cols)
