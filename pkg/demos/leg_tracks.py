"""Side-by-side tracks for one mission leg under each control mode.

The same spawn (same seed, same speeds, same drift) is run three times:
COLREGS behaviors alone, the safety filter alone, and the two stacked.
Top row shows the tracks over the mission circle; bottom row the minimum
pair range against time with the near-miss and collision thresholds.

Writes demos/out/leg_tracks.png. Needs the optional plotting extra.
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from barrier_fleet import MODES, default_scenario, run_leg, spawn_leg


def min_range_series(traj: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    ticks = traj.shape[0] // n
    xy = traj[: ticks * n, 2:4].reshape(ticks, n, 2)
    diff = xy[:, :, None, :] - xy[:, None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    iu = np.triu_indices(n, 1)
    return traj[: ticks * n : n, 0], dist[:, iu[0], iu[1]].min(axis=1)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=3)
    parser.add_argument("--leg", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path(__file__).parent / "out")
    args = parser.parse_args()

    fig, axes = plt.subplots(
        2, len(MODES), figsize=(15, 9), height_ratios=[3, 1], layout="constrained"
    )
    for col, mode in enumerate(MODES):
        sc = default_scenario(mode=mode, seed=args.seed)
        spawn = spawn_leg(sc.joust, args.leg)
        result = run_leg(sc.fleet, sc.joust, spawn, leg_index=args.leg,
                         record_trajectory=True)
        traj = result.trajectory
        n = sc.joust.n_vehicles

        ax = axes[0, col]
        for i in range(n):
            rows = traj[traj[:, 1] == i]
            (line,) = ax.plot(rows[:, 2], rows[:, 3], lw=1.2, label=f"vessel {i}")
            ax.plot(rows[0, 2], rows[0, 3], "o", ms=5, color=line.get_color())
        ax.add_patch(
            plt.Circle((0, 0), sc.joust.circle_diameter / 2, fill=False,
                       ls="--", color="0.6")
        )
        ax.set_aspect("equal")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        suffix = " (timed out)" if result.timed_out else ""
        ax.set_title(f"{mode}, {result.duration_s:.0f} s{suffix}")
        if col == 0:
            ax.legend(loc="upper left", fontsize=8)

        t_axis, min_r = min_range_series(traj, n)
        ax2 = axes[1, col]
        ax2.plot(t_axis, min_r, lw=1.0)
        ax2.axhline(10.0, color="tab:orange", ls=":", lw=1, label="near miss")
        ax2.axhline(3.0, color="tab:red", ls=":", lw=1, label="collision")
        ax2.set_ylim(0, None)
        ax2.set_xlabel("t [s]")
        ax2.set_ylabel("min pair range [m]")
        if col == 0:
            ax2.legend(loc="lower right", fontsize=8)
        print(f"{mode:18s} leg time {result.duration_s:7.1f} s   closest pass "
              f"{min_r.min():5.2f} m")

    args.out.mkdir(parents=True, exist_ok=True)
    target = args.out / "leg_tracks.png"
    fig.savefig(target, dpi=130)
    print(f"wrote {target}")


if __name__ == "__main__":
    main()
