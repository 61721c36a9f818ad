"""
Ranking stocks by how communal they are
=======================================

Train the N -> 5 -> N auto-encoder on a synthetic latent-factor market and
rank stocks by reconstruction error. Stocks that the five hidden units
can rebuild well carry mostly shared (communal) information.
"""

import numpy as np

from deepport import (
    TrainConfig,
    rank_communal,
    reconstruction_errors,
    select_universe,
    synth_market,
    train_autoencoder,
)

m = synth_market(n_assets=40, n_periods=200, n_latent=3, seed=1)
print("market:", m.shape)

cfg = TrainConfig(learning_rate=0.2, epochs=1000, batch_size=16)
net = train_autoencoder(m, 5, cfg)
print("layer sizes:", net.sizes)

errors = reconstruction_errors(net, m)
ranking = rank_communal(errors, m.tickers)
print("\nmost communal :", ranking.order[:5])
print("least communal:", ranking.order[-5:])

# what the hidden layer cannot rebuild is mostly idiosyncratic noise, so
# the ranking should agree with per-stock residuals of a rank-3 PCA fit
D = m.values - m.values.mean(axis=0)
U, s, Vt = np.linalg.svd(D, full_matrices=False)
pca_resid = np.linalg.norm(D - (U[:, :3] * s[:3]) @ Vt[:3], axis=0)
ranks = lambda v: np.argsort(np.argsort(v))
rho = np.corrcoef(ranks(errors), ranks(pca_resid))[0, 1]
print(f"rank correlation with PCA residuals: {rho:.2f}")

# 10 most communal plus the 15 least communal
universe = select_universe(ranking, 25)
print("\n25-stock universe:", universe[:10], "+", len(universe) - 10, "more")
