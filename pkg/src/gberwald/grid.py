"""Rectangular evaluation grids over a chart domain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True, eq=False)
class BoxGrid:
    """Axis-aligned box sampled on a regular lattice.

    bounds is an (n, 2) array of [low, high] rows, shape the per-axis point
    counts.  Points enumerate in C order (last axis fastest), matching the
    flat index used in reports.
    """

    bounds: np.ndarray
    shape: tuple

    def __post_init__(self):
        bounds = np.asarray(self.bounds, dtype=float)
        if bounds.ndim != 2 or bounds.shape[1] != 2:
            raise DimensionMismatch("grid bounds must be an (n, 2) array")
        if bounds.shape[0] != len(self.shape):
            raise DimensionMismatch("grid shape does not match the bounds dimension")
        if not np.all(np.isfinite(bounds)):
            raise ValueError("grid bounds must be finite")
        if np.any(bounds[:, 1] < bounds[:, 0]):
            raise ValueError("grid bounds must satisfy low <= high")
        shape = tuple(int(k) for k in self.shape)
        if any(k < 1 for k in shape):
            raise ValueError("grid shape entries must be positive")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "shape", shape)

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    def __len__(self) -> int:
        return int(np.prod(self.shape))

    def axes(self) -> list:
        """Per-axis coordinate arrays; a single-point axis sits midway."""
        out = []
        for (lo, hi), k in zip(self.bounds, self.shape):
            out.append(np.array([0.5 * (lo + hi)]) if k == 1 else np.linspace(lo, hi, k))
        return out

    def points(self) -> np.ndarray:
        """All grid points as an (m, n) array in C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([m.reshape(-1) for m in mesh])

    def neighbor_pairs(self) -> list:
        """Flat index pairs of lattice neighbors along each axis."""
        idx = np.arange(len(self)).reshape(self.shape)
        pairs = []
        for axis in range(self.dim):
            a = np.moveaxis(idx, axis, 0)
            for i, j in zip(a[:-1].reshape(-1), a[1:].reshape(-1)):
                pairs.append((int(i), int(j)))
        return pairs


def parse_grid(text: str) -> BoxGrid:
    """Parse ``lo:hi:count,lo:hi:count,...`` into a BoxGrid."""
    bounds = []
    shape = []
    for part in text.split(","):
        pieces = part.split(":")
        if len(pieces) != 3:
            raise ValueError(f"bad grid axis {part!r}, expected lo:hi:count")
        try:
            lo, hi = float(pieces[0]), float(pieces[1])
            count = int(pieces[2])
        except ValueError as err:
            raise ValueError(f"bad grid axis {part!r}: {err}") from None
        bounds.append((lo, hi))
        shape.append(count)
    return BoxGrid(np.asarray(bounds), tuple(shape))
