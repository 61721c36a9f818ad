"""
The efficient deep frontier
===========================

Encode the calibration half of a synthetic market, then for each universe
size calibrate a portfolio-map with 4-fold cross-validation and score it
on the held-out half. The linear least-squares diagnostic runs first: its
in-sample error can only fall as the universe grows.
"""

import numpy as np

from deepport import PipelineSettings, build_frontier, index_target, split_by_fraction, synth_market

m = synth_market(n_assets=60, n_periods=220, n_latent=3, seed=7)
y = index_target(m)
spec = split_by_fraction(m, 0.5)
grid = [15, 25, 45, 60]

# linear, unpenalized: nested least squares
lin = build_frontier(m, y, spec, grid, PipelineSettings.linear_diagnostic())
print("linear diagnostic")
print(" n_stocks   in-sample     validation")
for p in lin.points:
    print(f" {p.n_stocks:8d}   {p.in_sample_error:.3e}   {p.epsilon_p:.3e}")

# relu auto-encoder and relu portfolio-map
deep = build_frontier(m, y, spec, grid, PipelineSettings(jobs=4))
print("\ndeep (relu)")
print(" n_stocks   epsilon_m    epsilon_p    cv error")
for p in deep.points:
    print(f" {p.n_stocks:8d}   {p.epsilon_m:.3e}   {p.epsilon_p:.3e}   {p.cv_error:.3e}")

best = deep.points[int(np.argmin(deep.epsilon_p))]
print(f"\nlowest validation error at {best.n_stocks} stocks")
