"""Bundled synthetic claim rectangles used by the demos and tests.

Two congruent 15 x 15 rectangles generated from a cell-matched
multiplicative shock model with cross-classified means: one long-tailed
development pattern and one short-tailed. Values are integers. Shipped in
the claim CSV format (array, accident, development, value).
"""

from __future__ import annotations

from importlib import resources

from .arrays import ClaimCollection


def bundled_paths() -> list:
    """Paths of the two bundled claim CSV files."""
    root = resources.files(__package__) / "data"
    return [str(root / "claims_set1.csv"), str(root / "claims_set2.csv")]


def load_bundled_rectangles() -> ClaimCollection:
    """Load the bundled rectangles as one two-array collection."""
    from .cli import read_claims_csv

    return read_claims_csv(bundled_paths())
