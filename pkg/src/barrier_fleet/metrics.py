"""Campaign scoring: safety counts, transit efficiency, encounter coverage.

Safety is counted per encounter record: a near miss is any pair whose range
dipped below 10 m, a collision below 3 m.  Efficiency compares each
vehicle's leg time and path length against an unobstructed straight
baseline, averaged per vehicle and then across vehicles.  Coverage bins
each encounter at its closest approach into a range/bearing polar grid
(once per vehicle view) and reports the variance of the per-bearing radial
profiles, which is zero exactly when the grid is angularly uniform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .sim import EncounterRecord, LegVehicleStats

NEAR_MISS_RANGE = 10.0
COLLISION_RANGE = 3.0


class EmptyGridError(ValueError):
    """Raised when coverage variance is requested of a grid with no samples."""


@dataclass(frozen=True, slots=True)
class MetricsSummary:
    encounters: int
    near_misses: int
    collisions: int
    avg_extra_time_pct: float
    avg_extra_distance_pct: float
    coverage_variance: float


@dataclass(frozen=True, slots=True)
class EncounterGrid:
    """Polar histogram of encounter samples.

    ``counts[k, r]`` is the number of samples in bearing bin k and range
    bin r; ``ignored`` counts samples at or beyond ``max_range``.
    """

    counts: np.ndarray
    range_bin_size: float = 0.1
    bearing_bin_size_deg: float = 1.0
    max_range: float = 32.0
    ignored: int = 0


def score_safety(
    records: Iterable["EncounterRecord"],
    near_miss_range: float = NEAR_MISS_RANGE,
    collision_range: float = COLLISION_RANGE,
) -> tuple[int, int]:
    """(near misses, collisions) over the records; a collision also counts
    as a near miss."""
    near = 0
    coll = 0
    for rec in records:
        if rec.min_range < near_miss_range:
            near += 1
        if rec.min_range < collision_range:
            coll += 1
    return near, coll


def score_efficiency(stats: Sequence["LegVehicleStats"]) -> tuple[float, float]:
    """Average extra time and extra distance, in percent of baseline.

    Per-leg percentages are averaged per vehicle first, then across
    vehicles, so a vehicle that ran more legs is not over-weighted.
    Vehicles that never reached their goal have no completion time, so
    timed-out entries are excluded; (nan, nan) when nothing completed.
    """
    if not stats:
        raise ValueError("no leg stats to score")
    by_vehicle: dict[int, list[tuple[float, float]]] = {}
    for s in stats:
        if s.timed_out:
            continue
        et = 100.0 * (s.time_s - s.baseline_time_s) / s.baseline_time_s
        ed = 100.0 * (s.distance_m - s.baseline_distance_m) / s.baseline_distance_m
        by_vehicle.setdefault(s.vehicle_id, []).append((et, ed))
    if not by_vehicle:
        return (math.nan, math.nan)
    time_means = []
    dist_means = []
    for vid in sorted(by_vehicle):
        rows = by_vehicle[vid]
        time_means.append(sum(r[0] for r in rows) / len(rows))
        dist_means.append(sum(r[1] for r in rows) / len(rows))
    return (
        sum(time_means) / len(time_means),
        sum(dist_means) / len(dist_means),
    )


def bin_encounters(
    records: Iterable["EncounterRecord"],
    range_bin_size: float = 0.1,
    bearing_bin_size_deg: float = 1.0,
    max_range: float = 32.0,
) -> EncounterGrid:
    """Bin each record once per vehicle view, at its closest approach.

    Track columns are (t, range, bearing_first, bearing_second); the row
    with the smallest range supplies the entry, so the grid holds exactly
    two entries per encounter (one for each view).  Closest approaches at
    or beyond max_range are counted in ``ignored`` rather than binned.
    """
    n_bearing = int(round(360.0 / bearing_bin_size_deg))
    n_range = int(round(max_range / range_bin_size))
    counts = np.zeros((n_bearing, n_range), dtype=np.int64)
    ignored = 0
    for rec in records:
        track = rec.relative_track
        if track.size == 0:
            continue
        row = track[np.argmin(track[:, 1])]
        if row[1] >= max_range:
            ignored += 2
            continue
        r_idx = min(int(row[1] / range_bin_size), n_range - 1)
        for col in (2, 3):
            deg = math.degrees(row[col]) % 360.0
            b_idx = int(deg / bearing_bin_size_deg) % n_bearing
            counts[b_idx, r_idx] += 1
    return EncounterGrid(
        counts=counts,
        range_bin_size=range_bin_size,
        bearing_bin_size_deg=bearing_bin_size_deg,
        max_range=max_range,
        ignored=ignored,
    )


def coverage_variance(grid: EncounterGrid) -> float:
    """Variance of per-bearing radial frequency profiles.

    Cells are normalized by the global maximum; each bearing's radial
    profile is compared against the mean profile:
    V = (1/K) sum_k ||beta_k - mu||^2.  An angularly uniform grid gives
    exactly 0.
    """
    total = int(grid.counts.sum())
    if total == 0:
        raise EmptyGridError("encounter grid is empty")
    beta = grid.counts / grid.counts.max()
    mu = beta.mean(axis=0)
    return float(((beta - mu) ** 2).sum(axis=1).mean())


def summarize(
    records: Sequence["EncounterRecord"],
    stats: Sequence["LegVehicleStats"],
    range_bin_size: float = 0.1,
    bearing_bin_size_deg: float = 1.0,
    max_range: float = 32.0,
) -> MetricsSummary:
    """One-stop summary used by campaign reports."""
    near, coll = score_safety(records)
    extra_time, extra_dist = score_efficiency(stats)
    if records:
        grid = bin_encounters(
            records, range_bin_size, bearing_bin_size_deg, max_range
        )
        variance = coverage_variance(grid)
    else:
        variance = math.nan
    return MetricsSummary(
        encounters=len(records),
        near_misses=near,
        collisions=coll,
        avg_extra_time_pct=extra_time,
        avg_extra_distance_pct=extra_dist,
        coverage_variance=variance,
    )
