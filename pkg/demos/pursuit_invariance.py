"""A filtered vessel holding its barrier against a worst-case pursuer.

The pursuer reads the ego's barrier gradient every tick and picks the
input-box corner that drives the barrier down fastest, which is the exact
adversary the constraint is built for. The ego just wants to cross the
arena. As long as the ego can out-move the pursuer, the barrier value
h = d^2 - r_safe^2 must stay nonnegative no matter how the chase unfolds.

Plots h(t) and the pair range for a bundle of random engagements.
Writes demos/out/pursuit_invariance.png.
"""

import argparse
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from barrier_fleet import (
    BarrierParams,
    ContactView,
    ControlBounds,
    ControlInput,
    QpWeights,
    VehicleSpec,
    VehicleState,
    WaypointGoal,
    filter_control,
    lie_derivative_contact,
    step,
    waypoint_control,
)
from barrier_fleet.dynamics import ZERO_DISTURBANCE

GAMMA = 2.0
R_SAFE = 15.0
DT = 0.1
EGO_BOUNDS = ControlBounds(2.0, 2.0, 1.0, 1.0)
PURSUER_BOUNDS = ControlBounds(1.0, 1.0, 0.4, 0.4)


def run_engagement(rng: np.random.Generator, ticks: int) -> np.ndarray:
    spec = VehicleSpec(gamma=GAMMA, r_safe=R_SAFE, bounds=EGO_BOUNDS,
                       rudder_gate_threshold=0.0)
    params = BarrierParams(r_safe=R_SAFE, alpha_gain=1.0)
    weights = QpWeights.for_gamma(GAMMA)

    d0 = rng.uniform(R_SAFE + 1.0, 40.0)
    bearing = rng.uniform(0.0, 2.0 * math.pi)
    ego = VehicleState(0.0, 0.0, rng.uniform(0.0, 2.0 * math.pi))
    adv = VehicleState(d0 * math.cos(bearing), d0 * math.sin(bearing),
                       rng.uniform(0.0, 2.0 * math.pi))
    # the goal sits beyond the pursuer, so the nominal course runs right at it
    goal = WaypointGoal(
        (400.0 * math.cos(bearing), 400.0 * math.sin(bearing)), 2.0
    )

    rows = np.empty((ticks, 2))
    for k in range(ticks):
        u_nom = waypoint_control(ego, goal, spec=spec)
        contact = ContactView(adv, PURSUER_BOUNDS, GAMMA, contact_id=1)
        res = filter_control(u_nom, ego, spec, [contact], params, weights)

        row = lie_derivative_contact(ego, adv, GAMMA)
        u_adv = ControlInput(
            -PURSUER_BOUNDS.thr_min if row[0] > 0 else PURSUER_BOUNDS.thr_max,
            -PURSUER_BOUNDS.rud_min if row[1] > 0 else PURSUER_BOUNDS.rud_max,
        )

        ego = step(ego, res.u_safe, ZERO_DISTURBANCE, DT, GAMMA)
        adv = step(adv, u_adv, ZERO_DISTURBANCE, DT, GAMMA)
        d = math.hypot(ego.x - adv.x, ego.y - adv.y)
        rows[k] = (d * d - R_SAFE * R_SAFE, d)
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episodes", type=int, default=12)
    parser.add_argument("--seconds", type=float, default=120.0)
    parser.add_argument("--seed", type=int, default=41)
    parser.add_argument("--out", type=Path, default=Path(__file__).parent / "out")
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    ticks = int(args.seconds / DT)
    t = np.arange(ticks) * DT

    fig, (ax_h, ax_d) = plt.subplots(2, 1, figsize=(9, 7), sharex=True,
                                     layout="constrained")
    worst = math.inf
    for _ in range(args.episodes):
        rows = run_engagement(rng, ticks)
        worst = min(worst, rows[:, 0].min())
        ax_h.plot(t, rows[:, 0], lw=0.9, alpha=0.8)
        ax_d.plot(t, rows[:, 1], lw=0.9, alpha=0.8)

    ax_h.axhline(0.0, color="tab:red", ls=":", lw=1.2)
    ax_h.set_ylabel("barrier value h [m$^2$]")
    ax_h.set_yscale("symlog", linthresh=10)
    ax_h.set_title(
        f"{args.episodes} engagements, worst h over all of them: {worst:+.3f}"
    )
    ax_d.axhline(R_SAFE, color="tab:red", ls=":", lw=1.2, label="safety radius")
    ax_d.set_ylabel("pair range [m]")
    ax_d.set_xlabel("t [s]")
    ax_d.legend(loc="upper right", fontsize=8)

    args.out.mkdir(parents=True, exist_ok=True)
    target = args.out / "pursuit_invariance.png"
    fig.savefig(target, dpi=130)
    print(f"worst barrier value {worst:+.4f} m^2 across {args.episodes} engagements")
    print(f"wrote {target}")


if __name__ == "__main__":
    main()
