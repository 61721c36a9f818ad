"""
Tracking an amended target
==========================

Replacing every index return below -5% by +5% asks the portfolio-map to
pay off in drawdowns rather than follow them. Here one stock crashes in the
validation window and we compare trackers of the plain and the amended
index.
"""

import numpy as np

from deepport import (
    PipelineSettings,
    TrainConfig,
    amend_target,
    build_frontier,
    index_target,
    split_by_fraction,
    synth_market,
)

m = synth_market(n_assets=40, n_periods=160, n_latent=3, seed=3, drawdown=(0, 140, -4.0))
y = index_target(m)
print(f"index minimum {y.values.min():.3f} at row {int(np.argmin(y.values))}")

a = amend_target(y)
changed = np.flatnonzero(a.values != y.values)
print("amended rows:", changed.tolist(), "->", a.values[changed].tolist())

fast = dict(autoencoder=TrainConfig(learning_rate=0.2, epochs=300, batch_size=16),
            calibration=TrainConfig(learning_rate=0.5, epochs=300, batch_size=16))
spec = split_by_fraction(m, 0.5)
for amend in (False, True):
    f = build_frontier(m, y, spec, [25], PipelineSettings(amend=amend, **fast))
    val = f.tracks[25]["validation"]
    i = list(val.timestamps).index(m.timestamps[140])
    print(f"\namend={amend}: epsilon_p={f.points[0].epsilon_p:.3e}")
    print(f"  crash week target={val.target[i]:+.3f} tracker={val.tracker[i]:+.3f}")
