"""Log-Tweedie shock algebra: distributions, correlations, GEE inputs.

When the logged observations are Tweedie rather than normal, the shock
decomposition still works component by component: each scaled shock stays in
the family with the cell's own theta, dispersions add, and correlations are
fully determined by the coefficient-of-variation ratios u and w.
"""

import numpy as np

import commonshock as cs
from commonshock.arrays import ArrayLayout
from commonshock.tweedie import ShockRatios, TweedieParams

# a gamma-type cell (p = 2) with across- and within-array shocks
cell = TweedieParams(p=2.0, theta=-1.0, lam=0.9)
shock_u = TweedieParams(p=2.0, theta=-1.5, lam=0.4)
shock_w = TweedieParams(p=2.0, theta=-0.8, lam=0.2)

coeff_u, comp_u = cs.shock_component_params(cell, shock_u)
coeff_w, comp_w = cs.shock_component_params(cell, shock_w)
print(f"admissible coefficients: alpha = {coeff_u:.4f}, beta = {coeff_w:.4f}")
print(f"scaled components keep the cell's theta: {comp_u.theta}, {comp_w.theta}")

ratios = ShockRatios.from_params(cell, shock_u, shock_w)
print(f"\nCoV ratios u = {ratios.u:.4f}, w = {ratios.w:.4f}, psi = {ratios.psi:.4f}")

# the observation's dispersion is the sum of the component dispersions,
# equivalently the idiosyncratic dispersion inflated by psi
phi = comp_u.lam + comp_w.lam + cell.lam
print(f"total dispersion: {phi:.6f} = lam * psi = {cell.lam * ratios.psi:.6f}")

m_cell, v_cell = cs.tweedie_mean_var(cell)
m_obs, v_obs = cs.log_tweedie_moments(cell, ratios)
print(f"logged-cell moments inflate by psi: mean {m_cell:.4f} -> {m_obs:.4f}, "
      f"variance {v_cell:.4f} -> {v_obs:.4f}")

# correlation structure across a small two-array collection, row-wise shocks
layout = ArrayLayout.full(2, 3, 3)
partition = cs.build_partition("row", layout)
flat = [ratios] * layout.n_observations
corr = cs.log_tweedie_correlation(partition, flat, 2)
idx = {cell_: k for k, cell_ in enumerate(layout.stacking_order)}
print("\ncorrelations under row-wise dependence:")
print(f"  same array, same row:  {corr[idx[(1, 1)], idx[(1, 3)]]:.4f}")
print(f"  across arrays, same row: {corr[idx[(1, 1)], 9 + idx[(1, 2)]]:.4f}")
print(f"  different rows:        {corr[idx[(1, 1)], idx[(2, 1)]]:.4f}")

# with equal CoVs everywhere the pattern collapses to thirds
unit = [ShockRatios(1.0, 1.0)] * layout.n_observations
simple = cs.log_tweedie_correlation(partition, unit, 2)
values = sorted({float(v) for v in np.round(simple.ravel(), 6)})
print(f"\nunit-ratio case takes values {values}")

# GEE ingredients: scaled observations whose mean is the idiosyncratic
# predictor alone, weights, and the working correlation
rng = np.random.default_rng(0)
y = rng.gamma(2.0, 1.0, size=layout.n_observations)
params = [cell] * layout.n_observations
y_check, weights, working = cs.gee_weights(y, params, flat, partition, 2)
print(f"\nGEE inputs: scaled observations y/psi (first three: {np.round(y_check[:3], 4)}),")
print(f"weights lam^(p-1) psi = {weights[0]:.4f} per cell, "
      f"working correlation {working.shape[0]} x {working.shape[1]}")
