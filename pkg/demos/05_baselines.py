"""
Classical encoders
==================

Sample moments, a Black-Litterman mean pulled towards one investor view,
and a sparse linear factor model fitted by alternating lasso and least
squares.
"""

import numpy as np

from deepport import (
    ViewSpec,
    black_litterman_mean,
    factor_model_fit,
    markowitz_moments,
    synth_market,
)

m = synth_market(n_assets=6, n_periods=120, n_latent=2, seed=5)

mo = markowitz_moments(m)
print("sample mean:", np.round(mo.mean, 4))
print("vols       :", np.round(np.sqrt(np.diag(mo.covariance)), 4))

# view: the first stock returns 1% more than the second
P = np.zeros((1, m.N))
P[0, :2] = [1.0, -1.0]
for lam in (0.0, 1.0, 1e6):
    mu = black_litterman_mean(mo, ViewSpec(P, [0.01], [[1e-4]], lam))
    print(f"lambda={lam:g}: mu[0]-mu[1] = {mu[0] - mu[1]:+.4f}")

# sparse loadings on two factors
print()
for lam in (0.0, 0.05, 0.5):
    fm = factor_model_fit(m, 2, lam=lam, max_iters=200)
    print(f"lambda={lam:g}: {len(fm.objective_trace)} iterations, "
          f"objective {fm.objective_trace[-1]:.4f}, zero loadings {int(np.sum(fm.W == 0))}/{fm.W.size}")
