"""Partitions of a claim array into dependence subsets.

Each dependence type maps every masked-in cell (i, j) to a subset index p.
The same partition applies to every array in a collection. Subsets that end
up empty after masking (a triangle has no cells in some diagonals of the
full grid, for instance) are dropped and the labels relabelled contiguously.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arrays import ArrayLayout
from .errors import ConfigError

PARTITION_KINDS = ("array", "cell", "row", "column", "diagonal")


def _raw_label(kind: str, i: int, j: int, layout: ArrayLayout):
    if kind == "array":
        return 0
    if kind == "cell":
        return (i, j)
    if kind == "row":
        return i
    if kind == "column":
        return j
    if kind == "diagonal":
        return i + j - 1
    raise ConfigError(
        f"unknown partition kind {kind!r}; valid kinds: {', '.join(PARTITION_KINDS)}"
    )


@dataclass(frozen=True)
class Partition:
    """Map from masked-in cells to subset indices 0..P-1."""

    kind: str
    layout: ArrayLayout
    labels: np.ndarray = field(init=False)  # per stacking position
    n_subsets: int = field(init=False)
    _raw_to_p: dict = field(init=False, repr=False)

    def __post_init__(self):
        raw = [_raw_label(self.kind, i, j, self.layout) for (i, j) in self.layout.stacking_order]
        seen: dict = {}
        labels = np.empty(len(raw), dtype=int)
        for k, r in enumerate(raw):
            if r not in seen:
                seen[r] = len(seen)
            labels[k] = seen[r]
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "n_subsets", len(seen))
        object.__setattr__(self, "_raw_to_p", seen)

    def p_of(self, i: int, j: int) -> int:
        """Subset index of masked-in cell (i, j)."""
        return int(self.labels[self.layout.position(i, j)])

    def label_for_grid_cell(self, i: int, j: int):
        """Subset index for any grid cell, or None when its subset has no
        masked-in member (the subset's shock never appears in the data)."""
        return self._raw_to_p.get(_raw_label(self.kind, i, j, self.layout))


def build_partition(kind: str, layout: ArrayLayout) -> Partition:
    """Construct the partition of the given dependence type.

    Kinds: "array" (one subset covering the array), "cell" (one subset per
    cell, equal to the stacking position), "row", "column", and "diagonal"
    (t = i + j - 1).
    """
    if kind not in PARTITION_KINDS:
        raise ConfigError(
            f"unknown partition kind {kind!r}; valid kinds: {', '.join(PARTITION_KINDS)}"
        )
    return Partition(kind, layout)
