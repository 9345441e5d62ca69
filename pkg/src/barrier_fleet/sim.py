"""Multi-vessel joust missions.

Vehicles spawn evenly spaced on a circle, headed inward, each bound for the
antipodal point, so every leg funnels the whole fleet through the center at
randomized speeds.  Legs repeat until an encounter quota or leg count is
reached.  Per-tick execution is synchronous: every vehicle computes its
command from the tick-start states, then all states advance together by one
Euler step.

Randomness is reproducible by construction: nominal speeds are a pure
function of (seed, speed window) where windows are fixed slices of the
mission clock, and per-leg disturbance draws come from a (seed, leg_index)
substream.  Campaign results for a given (config, seed) are therefore
bitwise identical no matter how campaigns are scheduled across workers.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .behaviors import (
    CandidateGrid,
    ColregsParams,
    ContactEstimate,
    WaypointGoal,
    blend,
    waypoint_control,
)
from .cbf import BarrierParams, ContactView
from .dynamics import (
    TWO_PI,
    ControlBounds,
    ControlInput,
    VehicleSpec,
    VehicleState,
    clamp,
    step,
    wrap_angle,
)
from .metrics import MetricsSummary, summarize
from .qp_filter import QpWeights, filter as safety_filter

MODES = ("colregs_only", "cbf_only", "colregs_plus_cbf")
POLICIES = ("autonomous", "straight_line", "external")

# Stream tags keep the per-leg and per-window substreams disjoint.
_LEG_STREAM = 7919
_SPEED_STREAM = 104729


@dataclass(frozen=True, slots=True)
class JoustConfig:
    """Mission parameters; defaults reproduce the reference campaign setup."""

    circle_diameter: float = 64.0
    n_vehicles: int = 4
    speed_range: tuple[float, float] = (1.0, 2.0)
    speed_reset_period: float = 100.0
    disturbance_range: tuple[float, float] = (0.01, 0.02)
    n_legs: int = 10
    target_encounters: int | None = None
    dt: float = 0.1
    seed: int = 0
    mode: str = "colregs_plus_cbf"
    encounter_range: float = 32.0
    capture_radius: float = 1.0
    timeout_factor: float = 4.0

    def __post_init__(self) -> None:
        if self.circle_diameter <= 0:
            raise ValueError("circle_diameter must be positive")
        if self.n_vehicles < 1:
            raise ValueError("need at least one vehicle")
        lo, hi = self.speed_range
        if not 0 < lo <= hi:
            raise ValueError("speed_range must satisfy 0 < lo <= hi")
        dlo, dhi = self.disturbance_range
        if not 0 <= dlo <= dhi:
            raise ValueError("disturbance_range must satisfy 0 <= lo <= hi")
        if self.speed_reset_period <= 0:
            raise ValueError("speed_reset_period must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.n_legs < 1:
            raise ValueError("n_legs must be at least 1")
        if self.target_encounters is not None and self.target_encounters < 1:
            raise ValueError("target_encounters must be at least 1")
        if self.encounter_range <= 0 or self.capture_radius <= 0:
            raise ValueError("encounter_range and capture_radius must be positive")
        if self.timeout_factor <= 0:
            raise ValueError("timeout_factor must be positive")


@dataclass(frozen=True, slots=True)
class FleetContext:
    """Everything about the fleet that is not mission geometry."""

    specs: list[VehicleSpec]
    policies: list[str]
    barrier: BarrierParams
    colregs: ColregsParams
    weights: QpWeights
    gain: float = 1.0

    def __post_init__(self) -> None:
        if len(self.specs) != len(self.policies):
            raise ValueError("one policy per vehicle spec required")
        for p in self.policies:
            if p not in POLICIES:
                raise ValueError(f"policy must be one of {POLICIES}")
        if self.gain <= 0:
            raise ValueError("gain must be positive")

    @classmethod
    def default(cls, n_vehicles: int) -> "FleetContext":
        spec = VehicleSpec(
            gamma=2.0,
            r_safe=15.0,
            bounds=ControlBounds(thr_min=0.0, thr_max=2.0, rud_min=1.0, rud_max=1.0),
            rudder_gate_threshold=0.25,
        )
        return cls(
            specs=[spec] * n_vehicles,
            policies=["autonomous"] * n_vehicles,
            barrier=BarrierParams(r_safe=15.0, alpha_gain=1.0),
            colregs=ColregsParams(),
            weights=QpWeights.for_gamma(2.0),
        )


@dataclass(frozen=True, slots=True)
class LegSpawn:
    states: list[VehicleState]
    goals: list[tuple[float, float]]
    speeds: list[float]
    disturbances: list[tuple[float, float]]


def spawn_leg(
    config: JoustConfig,
    leg_index: int,
    rng: np.random.Generator | None = None,
    speeds: Sequence[float] | None = None,
) -> LegSpawn:
    """Poses, goals, speeds and disturbances for one leg.

    Vehicles sit at evenly spaced angles on the circle with headings toward
    the center; goals are antipodal, and legs alternate sides so vehicle k
    shuttles back and forth across the arena.  The disturbance is a
    per-vehicle constant drift for the whole leg.
    """
    if rng is None:
        rng = np.random.default_rng([config.seed, _LEG_STREAM, leg_index])
    n = config.n_vehicles
    if speeds is None:
        lo, hi = config.speed_range
        speeds = [float(v) for v in rng.uniform(lo, hi, n)]
    else:
        speeds = [float(v) for v in speeds]
    radius = config.circle_diameter / 2.0
    states = []
    goals = []
    for k in range(n):
        phi = 2.0 * math.pi * k / n + math.pi * (leg_index % 2)
        x, y = radius * math.cos(phi), radius * math.sin(phi)
        states.append(VehicleState(x, y, wrap_angle(phi + math.pi)))
        goals.append((-x, -y))
    dlo, dhi = config.disturbance_range
    disturbances = []
    for _ in range(n):
        mag = float(rng.uniform(dlo, dhi))
        ang = float(rng.uniform(0.0, 2.0 * math.pi))
        disturbances.append((mag * math.cos(ang), mag * math.sin(ang)))
    return LegSpawn(states, goals, list(speeds), disturbances)


@dataclass(frozen=True, slots=True)
class LegVehicleStats:
    leg_index: int
    vehicle_id: int
    time_s: float
    distance_m: float
    baseline_time_s: float
    baseline_distance_m: float
    timed_out: bool


@dataclass(frozen=True, slots=True, eq=False)
class EncounterRecord:
    """One pair of vehicles that came within encounter range during a leg.

    relative_track rows are (t, range, bearing_from_first, bearing_from_second)
    sampled every tick while the pair remained inside encounter range;
    bearings are relative to each vehicle's own heading.
    """

    vehicle_pair: tuple[int, int]
    leg_index: int
    min_range: float
    relative_track: np.ndarray
    leg_time: tuple[float, float]
    leg_distance: tuple[float, float]


@dataclass(frozen=True, slots=True, eq=False)
class LegResult:
    records: list[EncounterRecord]
    stats: list[LegVehicleStats]
    trajectory: np.ndarray | None
    duration_s: float
    timed_out: bool
    final_states: list[VehicleState]


class LegEngine:
    """Tick-level execution of one leg; reused by batch runs and the live
    gateway.

    External commands arrive via :meth:`set_external` and take effect at the
    next tick boundary.  All public state attributes describe the most
    recently completed tick.
    """

    def __init__(
        self,
        ctx: FleetContext,
        config: JoustConfig,
        spawn: LegSpawn,
        leg_index: int = 0,
        start_time: float = 0.0,
        speed_lookup: Callable[[int], Sequence[float]] | None = None,
        record_trajectory: bool = False,
    ) -> None:
        n = config.n_vehicles
        if len(ctx.specs) != n or len(spawn.states) != n:
            raise ValueError("fleet size mismatch")
        self.ctx = ctx
        self.config = config
        self.leg_index = leg_index
        self.start_time = start_time
        self.n = n
        self.states: list[VehicleState] = list(spawn.states)
        self.goal_points = list(spawn.goals)
        self.speeds = list(spawn.speeds)
        self.disturbances = list(spawn.disturbances)
        self.t = 0.0
        self._speed_lookup = speed_lookup
        self._window = self._window_index()
        self._goals = self._build_goals()
        self._grid = CandidateGrid.default(max(s.bounds.thr_max for s in ctx.specs))
        self._prev_xy = [(s.x, s.y) for s in self.states]
        self._vels: list[tuple[float, float]] = [(0.0, 0.0)] * n
        self._external: list[ControlInput] = [ControlInput(0.0, 0.0)] * n
        self.captured = [False] * n
        self.capture_time = [math.nan] * n
        self.distance = [0.0] * n
        self.last_applied: list[ControlInput] = [ControlInput(0.0, 0.0)] * n
        self.last_nominal: list[ControlInput] = [ControlInput(0.0, 0.0)] * n
        self.last_slack: list[float] = [0.0] * n
        self._pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        self.min_range: dict[tuple[int, int], float] = {}
        self._tracks: dict[tuple[int, int], list[tuple[float, float, float, float]]] = {
            p: [] for p in self._pairs
        }
        for i, j in self._pairs:
            si, sj = self.states[i], self.states[j]
            self.min_range[(i, j)] = math.hypot(sj.x - si.x, sj.y - si.y)
        self.baseline_time = []
        self.baseline_distance = []
        for k in range(n):
            s, g = self.states[k], self.goal_points[k]
            d = math.hypot(g[0] - s.x, g[1] - s.y) - config.capture_radius
            self.baseline_distance.append(d)
            self.baseline_time.append(self._baseline_time(d, k))
        self.timeout_s = config.timeout_factor * max(self.baseline_time)
        self._traj_rows: list[tuple] | None = [] if record_trajectory else None

    def _window_index(self) -> int:
        return int((self.start_time + self.t) / self.config.speed_reset_period)

    def _baseline_time(self, dist: float, k: int) -> float:
        """Unobstructed straight-transit time, honoring the speed schedule.

        The reference vessel crosses ``dist`` meters along the direct course,
        switching commanded speed at the same global reset windows the real
        leg sees; without a schedule the spawn speed applies throughout.
        """
        if self._speed_lookup is None:
            return dist / self.speeds[k]
        period = self.config.speed_reset_period
        t = 0.0
        clock = self.start_time
        remaining = dist
        while remaining > 1e-12:
            w = int(clock / period)
            v = float(self._speed_lookup(w)[k])
            span = (w + 1) * period - clock
            if v * span >= remaining:
                return t + remaining / v
            t += span
            remaining -= v * span
            clock = (w + 1) * period
        return t

    def _build_goals(self) -> list[WaypointGoal]:
        return [
            WaypointGoal(self.goal_points[k], self.speeds[k], self.config.capture_radius)
            for k in range(self.n)
        ]

    def set_external(self, vehicle_id: int, u: ControlInput) -> None:
        if self.ctx.policies[vehicle_id] != "external":
            raise ValueError(f"vehicle {vehicle_id} is not externally piloted")
        self._external[vehicle_id] = u

    @property
    def all_captured(self) -> bool:
        return all(self.captured)

    @property
    def timed_out(self) -> bool:
        return self.t >= self.timeout_s and not self.all_captured

    @property
    def done(self) -> bool:
        return self.all_captured or self.t >= self.timeout_s

    def h_min(self, i: int) -> float:
        """Smallest pairwise barrier value of vehicle i at the current tick."""
        r2 = self.ctx.specs[i].r_safe ** 2
        best = math.inf
        si = self.states[i]
        for j in range(self.n):
            if j == i:
                continue
            sj = self.states[j]
            dx, dy = sj.x - si.x, sj.y - si.y
            best = min(best, dx * dx + dy * dy - r2)
        return best

    def h_pairs(self) -> list[tuple[int, int, float]]:
        out = []
        for i in range(self.n):
            r2 = self.ctx.specs[i].r_safe ** 2
            si = self.states[i]
            for j in range(self.n):
                if j == i:
                    continue
                sj = self.states[j]
                dx, dy = sj.x - si.x, sj.y - si.y
                out.append((i, j, dx * dx + dy * dy - r2))
        return out

    def tick(self) -> None:
        ctx = self.ctx
        config = self.config
        n, dt = self.n, config.dt
        states = self.states
        mode = config.mode

        w = self._window_index()
        if w != self._window and self._speed_lookup is not None:
            self._window = w
            self.speeds = [float(v) for v in self._speed_lookup(w)]
            self._goals = self._build_goals()

        ranges = {}
        for i, j in self._pairs:
            si, sj = states[i], states[j]
            ranges[(i, j)] = math.hypot(sj.x - si.x, sj.y - si.y)

        views = [
            ContactView(states[j], ctx.specs[j].bounds, ctx.specs[j].gamma, contact_id=j)
            for j in range(n)
        ]
        use_colregs = mode in ("colregs_only", "colregs_plus_cbf")
        use_filter = mode in ("cbf_only", "colregs_plus_cbf")
        estimates = None
        if use_colregs:
            estimates = [
                ContactEstimate(views[j], self._vels[j]) for j in range(n)
            ]

        applied = []
        nominals = []
        slacks = []
        for i in range(n):
            spec = ctx.specs[i]
            policy = ctx.policies[i]
            if policy == "external":
                u_nom = self._external[i]
                filtered = False
            elif self.captured[i]:
                u_nom = ControlInput(0.0, 0.0)
                filtered = use_filter
            elif policy == "straight_line":
                u_nom = waypoint_control(states[i], self._goals[i], gain=ctx.gain)
                filtered = False
            else:
                if use_colregs:
                    outer = ctx.colregs.pwt_outer_dist
                    near = [
                        estimates[j]
                        for j in range(n)
                        if j != i
                        and ranges[(i, j) if i < j else (j, i)] < outer
                    ]
                    if near:
                        u_nom = blend(
                            states[i],
                            self._goals[i],
                            near,
                            ctx.colregs,
                            grid=self._grid,
                            gain=ctx.gain,
                        )
                    else:
                        u_nom = waypoint_control(states[i], self._goals[i], gain=ctx.gain)
                else:
                    u_nom = waypoint_control(states[i], self._goals[i], gain=ctx.gain)
                filtered = use_filter
            if filtered:
                res = safety_filter(
                    u_nom,
                    states[i],
                    spec,
                    [views[j] for j in range(n) if j != i],
                    ctx.barrier,
                    ctx.weights,
                )
                u_cmd = res.u_safe
                slack_total = math.fsum(s for _, s in res.slacks)
            else:
                u_cmd = u_nom
                slack_total = 0.0
            applied.append(clamp(u_cmd, spec.bounds, spec=spec))
            nominals.append(u_nom)
            slacks.append(slack_total)

        if self._traj_rows is not None:
            for i in range(n):
                s = states[i]
                self._traj_rows.append(
                    (
                        self.t,
                        float(i),
                        s.x,
                        s.y,
                        s.theta,
                        nominals[i].u_thr,
                        nominals[i].u_rud,
                        applied[i].u_thr,
                        applied[i].u_rud,
                        slacks[i],
                        self.h_min(i),
                    )
                )

        for i in range(n):
            old = states[i]
            new = step(old, applied[i], self.disturbances[i], dt, ctx.specs[i].gamma)
            if not self.captured[i]:
                self.distance[i] += math.hypot(new.x - old.x, new.y - old.y)
            self._prev_xy[i] = (old.x, old.y)
            states[i] = new
        self._vels = [
            ((states[i].x - self._prev_xy[i][0]) / dt, (states[i].y - self._prev_xy[i][1]) / dt)
            for i in range(n)
        ]
        self.t += dt
        self.last_applied = applied
        self.last_nominal = nominals
        self.last_slack = slacks

        for i in range(n):
            if not self.captured[i]:
                g = self.goal_points[i]
                if math.hypot(g[0] - states[i].x, g[1] - states[i].y) <= config.capture_radius:
                    self.captured[i] = True
                    self.capture_time[i] = self.t

        enc = config.encounter_range
        for i, j in self._pairs:
            si, sj = states[i], states[j]
            dx, dy = sj.x - si.x, sj.y - si.y
            r = math.hypot(dx, dy)
            key = (i, j)
            if r < self.min_range[key]:
                self.min_range[key] = r
            if r < enc:
                self._tracks[key].append(
                    (
                        self.t,
                        r,
                        wrap_angle(math.atan2(dy, dx) - si.theta),
                        wrap_angle(math.atan2(-dy, -dx) - sj.theta),
                    )
                )

    def finish(self) -> LegResult:
        """Close out the leg and package records and per-vehicle stats."""
        config = self.config
        timed_out = self.timed_out
        stats = []
        for i in range(self.n):
            if self.captured[i]:
                t_i = self.capture_time[i]
                out_i = False
            else:
                t_i = self.t
                out_i = True
            stats.append(
                LegVehicleStats(
                    leg_index=self.leg_index,
                    vehicle_id=i,
                    time_s=t_i,
                    distance_m=self.distance[i],
                    baseline_time_s=self.baseline_time[i],
                    baseline_distance_m=self.baseline_distance[i],
                    timed_out=out_i,
                )
            )
        records = []
        for i, j in self._pairs:
            if self.min_range[(i, j)] < config.encounter_range:
                track = np.asarray(self._tracks[(i, j)], dtype=float)
                if track.size == 0:
                    track = track.reshape(0, 4)
                records.append(
                    EncounterRecord(
                        vehicle_pair=(i, j),
                        leg_index=self.leg_index,
                        min_range=self.min_range[(i, j)],
                        relative_track=track,
                        leg_time=(stats[i].time_s, stats[j].time_s),
                        leg_distance=(stats[i].distance_m, stats[j].distance_m),
                    )
                )
        trajectory = None
        if self._traj_rows is not None:
            trajectory = np.asarray(self._traj_rows, dtype=float)
        return LegResult(records, stats, trajectory, self.t, timed_out, list(self.states))


def run_leg(
    ctx: FleetContext,
    config: JoustConfig,
    spawn: LegSpawn,
    leg_index: int = 0,
    start_time: float = 0.0,
    speed_lookup: Callable[[int], Sequence[float]] | None = None,
    record_trajectory: bool = False,
) -> LegResult:
    """Run one leg to capture or timeout."""
    engine = LegEngine(
        ctx,
        config,
        spawn,
        leg_index=leg_index,
        start_time=start_time,
        speed_lookup=speed_lookup,
        record_trajectory=record_trajectory,
    )
    while not engine.done:
        engine.tick()
    return engine.finish()


def scripted_turn(
    final_states: Sequence[VehicleState],
    ctx: FleetContext,
    dt: float,
    start_time: float,
    record: bool = False,
) -> tuple[list[tuple] | None, float]:
    """360-degree turnaround sweep between legs.

    Scripted bookkeeping rather than simulated motion: position holds, the
    heading sweeps one full starboard turn at the vessel's rudder limit,
    and none of it counts toward leg time or distance.  Returns optional
    trajectory rows in the usual column layout and the sweep duration.
    """
    n = len(final_states)
    rates = [ctx.specs[i].bounds.rud_max for i in range(n)]
    duration = max((TWO_PI / r for r in rates if r > 0.0), default=0.0)
    ticks = int(math.ceil(duration / dt - 1e-12))
    if not record or ticks == 0:
        return None, ticks * dt
    h_floor = []  # positions hold, so each vessel's h_min is constant
    for i, si in enumerate(final_states):
        r2 = ctx.specs[i].r_safe ** 2
        best = math.inf
        for j, sj in enumerate(final_states):
            if j != i:
                dx, dy = sj.x - si.x, sj.y - si.y
                best = min(best, dx * dx + dy * dy - r2)
        h_floor.append(best)
    rows = []
    for k in range(1, ticks + 1):
        t = start_time + k * dt
        for i, s in enumerate(final_states):
            swept = min(rates[i] * k * dt, TWO_PI)
            rud = -rates[i] if swept < TWO_PI else 0.0
            rows.append(
                (
                    t,
                    float(i),
                    s.x,
                    s.y,
                    wrap_angle(s.theta - swept),
                    0.0,
                    rud,
                    0.0,
                    rud,
                    0.0,
                    h_floor[i],
                )
            )
    return rows, ticks * dt


@dataclass(frozen=True, slots=True, eq=False)
class CampaignResult:
    config: JoustConfig
    records: list[EncounterRecord]
    stats: list[LegVehicleStats]
    legs: int
    timeouts: int
    trajectories: list[np.ndarray] | None
    wall_time_s: float

    def summary(self) -> MetricsSummary:
        return summarize(
            self.records, self.stats, max_range=self.config.encounter_range
        )

    def summary_dict(self) -> dict:
        s = self.summary()
        return {
            "mode": self.config.mode,
            "seed": self.config.seed,
            "legs": self.legs,
            "timeouts": self.timeouts,
            "encounters": s.encounters,
            "near_misses": s.near_misses,
            "collisions": s.collisions,
            "avg_extra_time_pct": s.avg_extra_time_pct,
            "avg_extra_distance_pct": s.avg_extra_distance_pct,
            "coverage_variance": s.coverage_variance,
        }


def speed_schedule(config: JoustConfig) -> Callable[[int], list[float]]:
    """Nominal speeds for a given reset window, memoized.

    window w covers mission time [w*period, (w+1)*period); draws depend
    only on (seed, w), never on leg timing, so the schedule is stable.
    """
    cache: dict[int, list[float]] = {}
    lo, hi = config.speed_range

    def lookup(window: int) -> list[float]:
        if window not in cache:
            rng = np.random.default_rng([config.seed, _SPEED_STREAM, window])
            cache[window] = [float(v) for v in rng.uniform(lo, hi, config.n_vehicles)]
        return cache[window]

    return lookup


def run_campaign(
    config: JoustConfig,
    ctx: FleetContext | None = None,
    record_trajectories: bool = False,
) -> CampaignResult:
    """Run legs sequentially until the encounter quota (or leg count) is met.

    Legs share one mission clock: each leg starts where the previous one
    ended, which is what ties the speed-reset windows together.
    """
    if ctx is None:
        ctx = FleetContext.default(config.n_vehicles)
    if len(ctx.specs) != config.n_vehicles:
        raise ValueError("fleet size mismatch")
    t0 = time.perf_counter()
    lookup = speed_schedule(config)
    records: list[EncounterRecord] = []
    stats: list[LegVehicleStats] = []
    trajectories: list[np.ndarray] | None = [] if record_trajectories else None
    mission_clock = 0.0
    timeouts = 0
    leg = 0
    turn_from: list[VehicleState] | None = None
    while True:
        if config.target_encounters is not None:
            if len(records) >= config.target_encounters:
                break
        elif leg >= config.n_legs:
            break
        if turn_from is not None:
            rows, gap = scripted_turn(
                turn_from, ctx, config.dt, mission_clock, record=record_trajectories
            )
            mission_clock += gap
            if trajectories is not None and rows is not None and trajectories:
                trajectories[-1] = np.vstack(
                    [trajectories[-1], np.asarray(rows, dtype=float)]
                )
        rng = np.random.default_rng([config.seed, _LEG_STREAM, leg])
        window = int(mission_clock / config.speed_reset_period)
        spawn = spawn_leg(config, leg, rng, speeds=lookup(window))
        result = run_leg(
            ctx,
            config,
            spawn,
            leg_index=leg,
            start_time=mission_clock,
            speed_lookup=lookup,
            record_trajectory=record_trajectories,
        )
        records.extend(result.records)
        stats.extend(result.stats)
        if trajectories is not None and result.trajectory is not None:
            trajectories.append(result.trajectory)
        mission_clock += result.duration_s
        timeouts += int(result.timed_out)
        turn_from = result.final_states
        leg += 1
    return CampaignResult(
        config=config,
        records=records,
        stats=stats,
        legs=leg,
        timeouts=timeouts,
        trajectories=trajectories,
        wall_time_s=time.perf_counter() - t0,
    )
