"""Forecast loss reserves for the bundled dataset.

Builds the forecast design over the 105 future cells of each array (the
region beyond calendar diagonal 15), propagates parameter and process error
into the predictive covariance, and aggregates reserves with standard
errors, the implied correlation between the two arrays' reserves, and the
independence counterfactual.
"""

import numpy as np

import commonshock as cs
from commonshock.datasets import load_bundled_rectangles

full = load_bundled_rectangles()
fit_coll = full.restrict_to_diagonals(15)
layout = fit_coll.layout
partition = cs.build_partition("cell", layout)
shock = cs.ShockSpec(partition=partition, include_across=True, shared_across_mean=True)
design = cs.assemble(layout, shock, "chain_ladder")
fit = cs.ml_dispersion_cellwise(cs.stack_log(fit_coll), design)

region = cs.future_cells(layout, 15)
print(f"forecast region: {len(region)} cells per array")
fd = cs.build_forecast_design(design, region)
result = cs.predict(fit, fd)

print("\n              array 1    array 2      total")
print(f"forecast    {result.reserves[0]:9.0f}  {result.reserves[1]:9.0f}  "
      f"{result.reserve_total:9.0f}")
print(f"std error   {result.std_errors[0]:9.0f}  {result.std_errors[1]:9.0f}  "
      f"{result.std_error_total:9.0f}")
print(f"CoV         {100 * result.covs[0]:8.1f}%  {100 * result.covs[1]:8.1f}%  "
      f"{100 * result.cov_total:8.1f}%")

corr = cs.reserve_correlation(result)
indep = cs.independence_counterfactual_cov(result)
print(f"\nimplied correlation between the two reserves: {corr:.3f}")
print(f"total CoV if the arrays were independent:     {100 * indep:.1f}%")

# the shared shock couples matched future cells across the arrays; compare
# a cross-array covariance block entry with and without it
n_fut = len(region)
k = region.index((15, 2))
print(f"\ncross-array predictive covariance at cell (15, 2): "
      f"{result.xi_star[k, n_fut + k]:.1f}")

# the forecast grid carries NaN everywhere except the future region
filled = np.isfinite(result.x_star[0])
print(f"future cells filled in the grid: {int(filled.sum())} of "
      f"{filled.size} (array 1)")

# holding the actual lower-triangle values against the forecasts: the
# bundled rectangles are fully observed, so the forecast quality is visible
actual = np.array([full.value(1, i, j) for (i, j) in region]).sum()
print(f"\narray 1: forecast {result.reserves[0]:.0f} vs realized "
      f"{actual:.0f} ({100 * (result.reserves[0] / actual - 1):+.1f}%)")
