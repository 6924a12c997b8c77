"""Watch the particle filter localize from 900 m^2 of uncertainty.

Simulates one straight-row drive, initializes particles over a 30 m
square, and replays the log step by step, printing how the hypothesis
cloud collapses. Saves snapshots to demos/out/convergence.png.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import orchardloc as ol
from orchardloc.config import Params
from orchardloc.evaluate import (HEADING_HALFWIDTH, LARGE_AREA_SIDE,
                                 FilterReplay)
from orchardloc.motion import default_noise
from orchardloc.particle_filter import init_area

out_dir = pathlib.Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

omap = ol.generate_map(seed=0)
cfg = ol.SensorConfig()
log = ol.simulate_log(omap, ol.TrajectorySpec("straight_row", 8), cfg, seed=3)
params = Params()

start = 150
rng = np.random.default_rng(42)
replay = FilterReplay(log, omap, cfg, params.filter_params, "gnss",
                      default_noise("gnss"), rng, start)
truth0 = log.truth_pose(start)
replay.pset = init_area(ol.Vec2(truth0.x, truth0.y), LARGE_AREA_SIDE,
                        truth0.theta, HEADING_HALFWIDTH,
                        params.filter_params.particle_count, rng)
print(f"initialized {replay.pset.n} particles over a "
      f"{LARGE_AREA_SIDE:.0f} m square around {truth0}")

snapshots = {}
while replay.advance():
    step = replay.step_index - start
    if step in (1, 25, 60) or replay.converged():
        snapshots[step] = replay.pset.copy()
    if step % 20 == 0 or replay.converged():
        est = replay.estimate()
        print(f"  t+{step * 0.2:5.1f} s  traveled {replay.distance_traveled():5.2f} m"
              f"  estimate error {replay.error():6.2f} m"
              f"  converged={replay.converged()}")
    if replay.converged():
        break

print(f"\nconverged after {replay.distance_traveled():.2f} m "
      f"with {replay.error():.2f} m error"
      if replay.converged() else "\nlog ended without convergence")

fig, axes = plt.subplots(1, len(snapshots), figsize=(5 * len(snapshots), 5),
                         sharex=True, sharey=True)
for ax, (step, pset) in zip(np.atleast_1d(axes), sorted(snapshots.items())):
    i = start + step
    ax.scatter(omap.positions[:, 0], omap.positions[:, 1], s=2, c="#bbbbbb")
    ax.scatter(pset.xs, pset.ys, s=3, c=pset.weights, cmap="viridis")
    ax.plot(log.truth[i, 0], log.truth[i, 1], "r*", markersize=14)
    ax.set_title(f"step {step}")
    ax.set_xlim(truth0.x - 20, truth0.x + 20)
    ax.set_ylim(truth0.y - 20, truth0.y + 20)
    ax.set_aspect("equal")
fig.savefig(out_dir / "convergence.png", dpi=110, bbox_inches="tight")
print(f"wrote {out_dir / 'convergence.png'}")
