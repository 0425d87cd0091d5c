"""Moving between the storm picture and the increment picture of one process.

The Smith process can be written with storm shapes or with log-Gaussian
increments (a Brown-Resnick process with variogram h^2).  Starting from
either end we should land on the other.

    python demos/switching_representations.py
"""

import math

import numpy as np

from maxrep import simulate as sim
from maxrep import switch as sw
from maxrep.core import RngStream, frechet_cdf, ks_distance
from maxrep.grid import Grid
from maxrep.models import ShapeModel, VariogramModel

shape = ShapeModel.gaussian(1.0)

# storms -> increments: log W(t) should be N(-t^2/2, t^2)
g = Grid.parse("-1:1:0.5")
w = sw.m3_to_incremental_sample(shape, g, RngStream(1), size=50000)
print("   t   mean W   var log W   t^2")
for t, m, v in zip(g.axes[0], w.mean(axis=0), np.log(w).var(axis=0)):
    print(f"{t:4.1f}  {m:7.4f}  {v:9.4f}  {t * t:5.2f}")

# increments -> storms
g = Grid.parse("-4:4:0.05")
inc = sim.BrownResnickIncrements(VariogramModel.fbm(2.0), g, (0.0,))
fit = sw.incremental_to_m3(inc, 10000, RngStream(2))
mp = fit.mean_profile()
t = mp.grid.axes[0]
print(f"\nkept {len(fit.samples)} of {fit.n_drawn} draws")
print(f"c_hat = {fit.c:.4f} (1/sqrt(2 pi) = {1 / math.sqrt(2 * math.pi):.4f})")
print(f"mean profile vs exp(-t^2/2): sup error {np.max(np.abs(mp.values - np.exp(-t * t / 2))):.4f}")

# and back: the fitted storm law gives a max-stable field with Frechet margins
dist = fit.shape_distribution()
margin = max(abs(fit.offsets.lo[0]), fit.offsets.hi[0])
x = sim.replicate(lambda r: sim.simulate_m3(dist, Grid.parse("0:0:1"), margin, r, keep_events=False),
                  4000, 3)
print(f"resimulated margin: KS to Frechet {ks_distance(x[:, 0], frechet_cdf):.4f}")
