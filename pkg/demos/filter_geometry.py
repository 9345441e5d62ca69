"""The safety filter's quadratic program for a single tick, drawn out.

An ego vessel threads between two nearby contacts. Each contact turns into
one halfspace on the ego's (thrust, rudder) input; the filter returns the
admissible input closest to the nominal one in the weighted norm. The plot
shows the actuator box, both constraint lines with their infeasible sides
shaded, objective contours around the nominal input, and the filtered
input pinned where the tightest constraint meets the box.

Writes demos/out/filter_geometry.png.
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
    assemble_constraints,
    solve_qp,
)

GAMMA = 2.0
R_SAFE = 15.0
BOUNDS = ControlBounds(0.0, 2.0, 1.0, 1.0)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path(__file__).parent / "out")
    args = parser.parse_args()

    spec = VehicleSpec(gamma=GAMMA, r_safe=R_SAFE, bounds=BOUNDS,
                       rudder_gate_threshold=0.0)
    params = BarrierParams(r_safe=R_SAFE, alpha_gain=1.0)
    weights = QpWeights.for_gamma(GAMMA)

    # one contact ahead to port, one ahead to starboard; full speed dead
    # ahead violates both rows, and the cheapest fix is to give up speed
    ego = VehicleState(0.0, 0.0, 0.0)
    contacts = [
        ContactView(VehicleState(18.0, 6.0, math.pi), BOUNDS, GAMMA, contact_id=1),
        ContactView(VehicleState(16.0, -10.0, 2.2), BOUNDS, GAMMA, contact_id=2),
    ]
    u_nom = ControlInput(2.0, 0.0)

    rows = assemble_constraints(ego, spec, contacts, params)
    res = solve_qp(u_nom, rows, BOUNDS, weights)

    fig, ax = plt.subplots(figsize=(8, 6), layout="constrained")
    (tl, th), (rl, rh) = BOUNDS.box()
    pad = 0.5
    u1 = np.linspace(tl - pad, th + pad, 400)
    u2 = np.linspace(rl - pad, rh + pad, 400)
    U1, U2 = np.meshgrid(u1, u2)

    # weighted-norm contours around the nominal input
    cost = weights.q_thr * (U1 - u_nom.u_thr) ** 2 + weights.q_rud * (U2 - u_nom.u_rud) ** 2
    ax.contour(U1, U2, cost, levels=8, colors="0.8", linewidths=0.7)

    for row, color in zip(rows, ("tab:orange", "tab:purple")):
        a1, a2 = float(row.a[0]), float(row.a[1])
        mask = a1 * U1 + a2 * U2 > row.b
        ax.contourf(U1, U2, mask, levels=[0.5, 1.5], colors=[color], alpha=0.15)
        if abs(a2) > abs(a1):
            ax.plot(u1, (row.b - a1 * u1) / a2, color=color, lw=1.5,
                    label=f"contact {row.contact_id}: h = {row.h_value:.0f}")
        else:
            ax.plot((row.b - a2 * u2) / a1, u2, color=color, lw=1.5,
                    label=f"contact {row.contact_id}: h = {row.h_value:.0f}")

    ax.add_patch(plt.Rectangle((tl, rl), th - tl, rh - rl, fill=False,
                               color="k", lw=1.5, label="actuator box"))
    ax.plot(u_nom.u_thr, u_nom.u_rud, "o", color="tab:blue", ms=9,
            label="nominal input")
    ax.plot(res.u_safe.u_thr, res.u_safe.u_rud, "*", color="tab:red", ms=16,
            label="filtered input")
    ax.annotate("", xy=(res.u_safe.u_thr, res.u_safe.u_rud),
                xytext=(u_nom.u_thr, u_nom.u_rud),
                arrowprops=dict(arrowstyle="->", color="0.4", lw=1.2))

    ax.set_xlim(tl - pad, th + pad)
    ax.set_ylim(rl - pad, rh + pad)
    ax.set_xlabel("thrust [m/s]")
    ax.set_ylabel("rudder rate [rad/s]")
    ax.set_title("shaded inputs would let a worst-case neighbor breach a barrier")
    ax.text(0.45, -0.55, "safe", fontsize=11, color="0.35", style="italic")
    ax.legend(loc="lower left", fontsize=8)

    args.out.mkdir(parents=True, exist_ok=True)
    target = args.out / "filter_geometry.png"
    fig.savefig(target, dpi=130)
    moved = math.hypot(res.u_safe.u_thr - u_nom.u_thr, res.u_safe.u_rud - u_nom.u_rud)
    print(f"nominal ({u_nom.u_thr:.2f}, {u_nom.u_rud:.2f}) -> "
          f"safe ({res.u_safe.u_thr:.3f}, {res.u_safe.u_rud:.3f}), moved {moved:.3f}")
    print(f"wrote {target}")


if __name__ == "__main__":
    main()
