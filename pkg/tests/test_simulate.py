import numpy as np
import pytest

import commonshock as cs
from commonshock.arrays import ArrayLayout
from commonshock.simulate import SimSpec


def table_spec(seed=7, shock_sd=0.1, idio_sd=0.15, rounding="none", layout=None):
    lay = layout if layout is not None else ArrayLayout.full(2, 3, 3)
    n, I, J = lay.n_arrays, lay.n_rows, lay.n_cols
    rows = np.vstack([
        10000.0 * np.exp(0.02 * np.arange(I)),
        30000.0 * np.exp(-0.02 * np.arange(I)),
    ])[:n]
    cols = np.vstack([
        np.linspace(0.02, 0.15, J),
        np.linspace(0.10, 0.03, J),
    ])[:n]
    return SimSpec(
        layout=lay,
        row_effects=rows,
        col_effects=cols,
        shock_mean_log=0.15,
        shock_sd=shock_sd,
        idio_sd=idio_sd,
        seed=seed,
        rounding=rounding,
    )


def test_noiseless_product():
    spec = table_spec(shock_sd=0.0, idio_sd=0.0)
    coll = cs.simulate(spec)
    for n in (1, 2):
        for (i, j) in spec.layout.stacking_order:
            expected = (
                np.exp(0.15)
                * spec.row_effects[n - 1, i - 1]
                * spec.col_effects[n - 1, j - 1]
            )
            assert coll.value(n, i, j) == pytest.approx(expected, rel=1e-12)


def test_bit_exact_determinism():
    a = cs.simulate(table_spec(seed=123))
    b = cs.simulate(table_spec(seed=123))
    assert np.array_equal(a.values, b.values)
    c = cs.simulate(table_spec(seed=124))
    assert not np.array_equal(a.values, c.values)


def test_draws_keyed_by_identity_not_order():
    # a cell's draw depends on its identity, not on how many cells precede
    # it: the triangle's cells match the full grid's on the shared region
    full_spec = table_spec(seed=9, layout=ArrayLayout.full(2, 3, 3))
    tri_spec = table_spec(seed=9, layout=ArrayLayout.triangle(2, 3))
    full = cs.simulate(full_spec)
    tri = cs.simulate(tri_spec)
    for n in (1, 2):
        for (i, j) in tri.layout.stacking_order:
            assert tri.value(n, i, j) == full.value(n, i, j)


def test_cell_mean_matches_analytic():
    # single-cell layout: mean of ln X over seeds is the shock mean plus the
    # log effects, within Monte Carlo error
    lay = ArrayLayout.full(1, 1, 1)
    logs = []
    for seed in range(10_000):
        spec = SimSpec(
            layout=lay,
            row_effects=[[10000.0]],
            col_effects=[[0.02]],
            shock_mean_log=0.15,
            shock_sd=0.1,
            idio_sd=0.15,
            seed=seed,
        )
        logs.append(np.log(cs.simulate(spec).value(1, 1, 1)))
    logs = np.asarray(logs)
    expected = 0.15 + np.log(10000.0) + np.log(0.02)
    se = logs.std(ddof=1) / np.sqrt(logs.size)
    assert abs(logs.mean() - expected) < 3 * se


def test_cross_array_log_covariance_is_shock_variance():
    lay = ArrayLayout.full(2, 1, 1)
    d1, d2 = [], []
    for seed in range(10_000):
        spec = SimSpec(
            layout=lay,
            row_effects=[[1.0], [1.0]],
            col_effects=[[1.0], [1.0]],
            shock_mean_log=0.0,
            shock_sd=0.1,
            idio_sd=0.15,
            seed=seed,
        )
        coll = cs.simulate(spec)
        d1.append(np.log(coll.value(1, 1, 1)))
        d2.append(np.log(coll.value(2, 1, 1)))
    d1 = np.asarray(d1) - np.mean(d1)
    d2 = np.asarray(d2) - np.mean(d2)
    prods = d1 * d2
    se = prods.std(ddof=1) / np.sqrt(prods.size)
    assert abs(prods.mean() - 0.01) < 3 * se
    # and the per-cell log variance tends to shock plus idiosyncratic variance
    var1 = (d1 * d1).mean()
    se_var = (d1 * d1).std(ddof=1) / np.sqrt(d1.size)
    assert abs(var1 - (0.01 + 0.0225)) < 3 * se_var


def test_integer_rounding_floors_at_one():
    spec = SimSpec(
        layout=ArrayLayout.full(1, 2, 2),
        row_effects=[[1.0, 1.0]],
        col_effects=[[0.1, 2.0]],
        shock_mean_log=0.0,
        shock_sd=0.1,
        idio_sd=0.1,
        seed=3,
        rounding="integer",
    )
    coll = cs.simulate(spec)
    vals = coll.values[0][spec.layout.mask]
    assert np.all(vals == np.rint(vals))
    assert np.all(vals >= 1.0)


def test_spec_validation():
    lay = ArrayLayout.full(1, 2, 2)
    with pytest.raises(cs.ConfigError):
        SimSpec(lay, [[1.0, 1.0]], [[1.0, -1.0]], 0.0, 0.1, 0.1, 1)
    with pytest.raises(cs.ConfigError):
        SimSpec(lay, [[1.0, 1.0]], [[1.0, 1.0]], 0.0, -0.1, 0.1, 1)
    with pytest.raises(cs.ConfigError):
        table_spec(rounding="half-up")


class TestBalance:
    def setup_method(self):
        self.lay = ArrayLayout.full(1, 2, 3)
        self.part = cs.build_partition("row", self.lay)
        rng = np.random.default_rng(11)
        self.z = rng.uniform(0.5, 4.0, size=self.lay.cells_per_array)
        self.shocks = np.array([1.3, 0.8])

    def test_multiplicative_ratio_exactly_one(self):
        diag = cs.balance_diagnostic(self.part, self.shocks, self.z)
        np.testing.assert_array_equal(diag.mult_ratio, np.ones(2))

    def test_additive_ratio_exceeds_one_when_z_varies(self):
        diag = cs.balance_diagnostic(self.part, self.shocks, self.z)
        assert np.all(diag.add_ratio > 1.0)
        # the additive multiplier is the shock over the idiosyncratic value
        np.testing.assert_allclose(
            diag.additive, self.shocks[self.part.labels] / self.z, rtol=1e-12
        )

    def test_zero_alpha_degenerates_to_one(self):
        diag = cs.balance_diagnostic(self.part, self.shocks, self.z, alpha=[0.0, 0.0])
        np.testing.assert_array_equal(diag.mult_ratio, np.ones(2))
        np.testing.assert_array_equal(diag.add_ratio, np.ones(2))
