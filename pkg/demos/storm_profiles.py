"""Recover a storm profile and the variogram from simulated rainfall-like fields.

Simulates a Smith process (Gaussian storms on a line), picks out replicates
dominated by a single storm, averages their normalised profiles and reads
off the storm width and the variogram at a few lags.

    python demos/storm_profiles.py
"""

import numpy as np

from maxrep import estimators as est
from maxrep import extract as ext
from maxrep import simulate as sim
from maxrep.grid import Grid
from maxrep.models import ShapeModel

SEED = 7

shape = ShapeModel.gaussian(1.0)
grid = Grid.parse("-8:8:0.1")
n = 8000

# each replicate stops exactly once no further storm can matter on the grid
fields = sim.replicate(lambda r: sim.simulate_m3(shape, grid, 4.0, r, keep_events=False).values,
                       n, SEED)
print(f"simulated {n} fields on {grid.size} points")

# storms peaking inside Q = [-3, 3] that dominate Q + 2, kept on offsets K
K = Grid.parse("-4:4:0.1")
a = ext.choose_threshold(n, ext.ThresholdPolicy("power", 0.45))
events = ext.extract_shapes(fields, (-3.0, 3.0), 2.0, K, a, grid)
print(f"threshold {a:.1f}: {len(events)} single-storm events")

profile = est.mean_shape(events)
t = K.axes[0]
err = np.max(np.abs(profile.values - np.exp(-t * t / 2)))
# far tails are dominated by neighbouring storms, so fit where the profile is large
core = t[np.abs(t) <= 2][:, None]
fit = est.fit_shape_beta(profile, "gaussian", locations=core)
print(f"mean profile vs exp(-t^2/2): sup error {err:.3f}")
print(f"fitted beta {fit.estimate:.3f} (true 1), R^2 {fit.diagnostics['r_squared']:.4f}")

# the inner window and its shift by h must both hold nearly all of a profile's mass
print("\n  h   theta_hat  gamma_hat  gamma_true")
for h in (0.0, 0.5, 1.0, 1.5):
    v = est.variogram_from_shapes(events, h, inner=(-4.0, 4.0 - h))
    print(f"{h:4.1f}  {v.theta:9.4f}  {v.gamma:9.4f}  {h * h:9.4f}")
