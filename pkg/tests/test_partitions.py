import numpy as np
import pytest

import commonshock as cs
from commonshock.arrays import ArrayLayout


@pytest.fixture
def rect15():
    return ArrayLayout.full(2, 15, 15)


def test_array_wide_single_subset(rect15):
    part = cs.build_partition("array", rect15)
    assert part.n_subsets == 1
    assert np.all(part.labels == 0)


def test_cellwise_matches_stacking_position(rect15):
    part = cs.build_partition("cell", rect15)
    assert part.n_subsets == 225
    np.testing.assert_array_equal(part.labels, np.arange(225))


def test_diagonalwise_count(rect15):
    part = cs.build_partition("diagonal", rect15)
    assert part.n_subsets == 29  # distinct i + j - 1 values by enumeration
    assert part.p_of(1, 1) == 0
    assert part.p_of(15, 15) == 28
    assert part.p_of(3, 5) == part.p_of(5, 3)


def test_row_and_column_kinds(rect15):
    rows = cs.build_partition("row", rect15)
    cols = cs.build_partition("column", rect15)
    assert rows.n_subsets == 15 and cols.n_subsets == 15
    assert rows.p_of(7, 2) == rows.p_of(7, 14)
    assert cols.p_of(2, 7) == cols.p_of(14, 7)


@pytest.mark.parametrize("kind", ["array", "cell", "row", "column", "diagonal"])
def test_subsets_partition_the_cells(kind):
    lay = ArrayLayout.triangle(1, 8)
    part = cs.build_partition(kind, lay)
    members = [np.where(part.labels == p)[0] for p in range(part.n_subsets)]
    # disjoint and covering, every subset non-empty
    assert all(len(m) > 0 for m in members)
    assert sorted(np.concatenate(members).tolist()) == list(range(lay.cells_per_array))


def test_triangle_relabels_contiguously():
    lay = ArrayLayout.triangle(1, 5)
    part = cs.build_partition("diagonal", lay)
    # diagonals 1..5 survive masking; labels are 0..4 with no gaps
    assert part.n_subsets == 5
    assert set(part.labels.tolist()) == set(range(5))


def test_label_for_unobserved_subset_is_none():
    lay = ArrayLayout.triangle(1, 5)
    part = cs.build_partition("diagonal", lay)
    assert part.label_for_grid_cell(5, 5) is None
    assert part.label_for_grid_cell(3, 3) == 4


def test_unknown_kind_lists_valid_values():
    lay = ArrayLayout.full(1, 2, 2)
    with pytest.raises(cs.ConfigError, match="array, cell, row, column, diagonal"):
        cs.build_partition("rowwise", lay)
