"""Command-line front end: batch campaigns, the comparative table, serve mode.

Batch runs write their artifacts under the scenario's output directory:

    summary_{mode}_seed{seed}.json      campaign metrics, sorted keys
    grid_{mode}_seed{seed}.npy          encounter-frequency grid counts
    trajectories_{mode}_seed{seed}/     one CSV per leg (when enabled)

All files are byte-identical across repeat runs of the same scenario and
seed, whatever the worker count.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, ScenarioConfig, default_scenario, load, with_overrides
from .metrics import bin_encounters
from .sim import MODES, run_campaign

_MODE_LABELS = {
    "colregs_only": "COLREGS behaviors only",
    "cbf_only": "Only CBF",
    "colregs_plus_cbf": "COLREGS behaviors + CBF",
}
_TRAJ_HEADER = (
    "t,vehicle_id,x,y,theta,u_thr_nom,u_rud_nom,u_thr_safe,u_rud_safe,"
    "slack_total,min_h"
)


def worker_count(n_jobs: int) -> int:
    """Pool size: capped by BARRIER_FLEET_THREADS, never above the job count."""
    cap = os.cpu_count() or 1
    env = os.environ.get("BARRIER_FLEET_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ConfigError(f"BARRIER_FLEET_THREADS: not an integer: {env!r}")
    return max(1, min(cap, n_jobs))


def write_trajectories(traj_dir: Path, trajectories: list[np.ndarray]) -> None:
    traj_dir.mkdir(parents=True, exist_ok=True)
    fmt = ["%.10g", "%d"] + ["%.10g"] * 9
    for i, rows in enumerate(trajectories):
        np.savetxt(
            traj_dir / f"leg_{i:04d}.csv",
            rows,
            fmt=fmt,
            delimiter=",",
            header=_TRAJ_HEADER,
            comments="",
        )


def run_one(sc: ScenarioConfig) -> dict:
    """Run one campaign and write its artifacts; returns the summary dict."""
    res = run_campaign(
        sc.joust, ctx=sc.fleet, record_trajectories=sc.write_trajectories
    )
    summary = res.summary_dict()
    tag = f"{sc.joust.mode}_seed{sc.joust.seed}"
    sc.out_dir.mkdir(parents=True, exist_ok=True)
    with open(sc.out_dir / f"summary_{tag}.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    grid = bin_encounters(res.records, max_range=sc.joust.encounter_range)
    np.save(sc.out_dir / f"grid_{tag}.npy", grid.counts)
    if res.trajectories is not None:
        write_trajectories(sc.out_dir / f"trajectories_{tag}", res.trajectories)
    return summary


def format_table(summaries: list[dict]) -> str:
    """The comparative safety/efficiency table, one row per campaign."""
    headers = [
        "Collision Avoidance Technique",
        "V[beta]",
        "Near Misses",
        "Collisions",
        "Avg. Additional Time (%)",
        "Avg. Additional Distance (%)",
    ]
    rows = []
    for s in summaries:
        rows.append(
            [
                _MODE_LABELS.get(s["mode"], s["mode"]),
                f"{s['coverage_variance']:.2f}",
                str(s["near_misses"]),
                str(s["collisions"]),
                f"{s['avg_extra_time_pct']:.1f}",
                f"{s['avg_extra_distance_pct']:.1f}",
            ]
        )
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    lines = []
    lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip())
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [
            r[i].rjust(widths[i]) for i in range(1, len(headers))
        ]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="barrier-fleet",
        description=(
            "Multi-vessel avoidance campaigns: seeded joust missions scored "
            "for safety and efficiency, or a live human-adversary session."
        ),
    )
    p.add_argument(
        "config",
        nargs="?",
        help="scenario YAML file; shipped defaults apply when omitted",
    )
    p.add_argument("--mode", choices=MODES, help="override the avoidance mode")
    p.add_argument(
        "--legs",
        type=int,
        help="run a fixed number of legs instead of an encounter quota",
    )
    p.add_argument("--seed", type=int, help="override the campaign seed")
    p.add_argument("--vehicles", type=int, help="resize a uniform fleet")
    p.add_argument(
        "--table2",
        action="store_true",
        help="run all three modes over the same seed and print the comparison",
    )
    p.add_argument("--out", help="output directory (overrides the scenario)")
    p.add_argument(
        "--serve",
        action="store_true",
        help="run in wall-clock real time and expose the gateway protocol",
    )
    p.add_argument("--port", type=int, default=8642, help="gateway port")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            sc = load(args.config)
        else:
            sc = default_scenario()
        sc = with_overrides(
            sc,
            mode=args.mode,
            seed=args.seed,
            legs=args.legs,
            vehicles=args.vehicles,
            out_dir=args.out,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.serve:
        from .gateway import serve_scenario

        try:
            serve_scenario(sc, port=args.port)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        except OSError as exc:
            print(f"serve failed: {exc}", file=sys.stderr)
            return 3
        return 0

    if args.table2:
        jobs = [
            replace(sc, joust=replace(sc.joust, mode=m), write_trajectories=False)
            for m in MODES
        ]
    else:
        jobs = [sc]

    try:
        workers = worker_count(len(jobs))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if workers == 1:
            summaries = [run_one(job) for job in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                summaries = list(pool.map(run_one, jobs))
    except Exception as exc:  # noqa: BLE001 - campaign faults become exit 3
        print(f"campaign failed: {exc}", file=sys.stderr)
        return 3

    print(format_table(summaries))
    print(f"artifacts written to {sc.out_dir}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
