"""
Why one rectifier helps
=======================

A benchmark ``B`` and two candidate assets. ``X3`` hugs the benchmark
except for one crash; ``X2`` is noisier everywhere. Raw distances favour
``X2``, but passing ``X3`` through f(x) = (x - 0.05)^+ + 0.05 removes the
crash and makes it the far better tracker.
"""

import numpy as np

from deepport import depth_example, offset_relu

m = depth_example(seed=0, n_periods=30, t_star=15)
B, X2, X3 = (m.column(t) for t in m.tickers)

# distances to the benchmark
eps2 = np.linalg.norm(B - X2)
eps3 = np.linalg.norm(B - X3)
eps3_star = np.linalg.norm(B - offset_relu(X3))
print(f"eps2  = {eps2:.3f}")
print(f"eps3  = {eps3:.3f}")
print(f"eps3* = {eps3_star:.3f}   (after the rectifier)")

# the crash period
t = 15
print(f"\nat t={t}: B={B[t]:.3f}  X3={X3[t]:.3f}  f(X3)={offset_relu(X3[t]):.3f}")

# short X3 once, hold two rectified X3: beats B in the crash
combo = -X3 + 2 * offset_relu(X3)
print(f"-X3 + 2 f(X3) at t={t}: {combo[t]:.3f} >= {B[t]:.3f}")
