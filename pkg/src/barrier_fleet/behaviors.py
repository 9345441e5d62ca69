"""Nominal guidance: waypoint transit and rule-of-the-road collision avoidance.

The avoidance behavior scores a grid of candidate (heading, speed) commands.
Each candidate earns a transit utility for serving the waypoint and, per
nearby contact, an avoidance utility that grows with the candidate's closest
point of approach.  Encounter roles follow the usual maritime conventions
(head-on, crossing give-way, overtaking); head-on and crossing give-way
candidates are biased toward passing the contact down the ego's port side,
which yields the customary starboard evasive turn.

Angles are math-convention: radians, counterclockwise positive, zero along
+x.  A positive relative bearing therefore means the contact lies to port.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .cbf import ContactView
from .dynamics import ControlInput, VehicleSpec, VehicleState, clamp, wrap_angle

_HEAD_ON_BEARING = math.radians(15.0)
_HEAD_ON_RECIPROCAL = math.radians(22.5)
_STERN_SECTOR = math.radians(22.5)
_CROSSING_SECTOR = math.radians(112.5)

# Guard for near-zero relative speed in closest-approach math.
_EPS_SPEED_SQ = 1e-12

_STARBOARD_PASS_BIAS = 0.75

# Shape of the transit utility's course-alignment falloff; higher keeps
# give-way maneuvers close to the direct course.
_ALIGN_EXPONENT = 2


class Role(Enum):
    HEAD_ON = "head_on"
    CROSSING_GIVE_WAY = "crossing_give_way"
    OVERTAKING = "overtaking"
    STAND_ON = "stand_on"


@dataclass(frozen=True, slots=True)
class WaypointGoal:
    """A target point with a cruise speed and an arrival capture radius."""

    target: tuple[float, float]
    desired_speed: float
    capture_radius: float = 1.0

    def __post_init__(self) -> None:
        if self.desired_speed < 0:
            raise ValueError("desired_speed must be non-negative")
        if self.capture_radius <= 0:
            raise ValueError("capture_radius must be positive")


@dataclass(frozen=True, slots=True)
class ColregsParams:
    """Avoidance-scoring parameters.

    ``pwt_outer_dist``/``pwt_inner_dist`` bound the priority-weight ramp;
    closest-approach utility ramps between ``min_util_cpa_dist`` and
    ``max_util_cpa_dist``.  ``transit_weight`` scales the goal-seeking term
    against the per-contact avoidance terms.  Distances in meters, horizon
    in seconds.
    """

    pwt_outer_dist: float = 30.0
    pwt_inner_dist: float = 20.0
    min_util_cpa_dist: float = 10.0
    max_util_cpa_dist: float = 20.0
    time_horizon: float = 60.0
    transit_weight: float = 0.6

    def __post_init__(self) -> None:
        if not 0 < self.pwt_inner_dist < self.pwt_outer_dist:
            raise ValueError("require 0 < pwt_inner_dist < pwt_outer_dist")
        if not 0 <= self.min_util_cpa_dist < self.max_util_cpa_dist:
            raise ValueError("require 0 <= min_util_cpa_dist < max_util_cpa_dist")
        if self.time_horizon <= 0:
            raise ValueError("time_horizon must be positive")
        if self.transit_weight <= 0:
            raise ValueError("transit_weight must be positive")


@dataclass(frozen=True, slots=True)
class CandidateGrid:
    """Candidate command grid: heading offsets (radians, relative to the
    direct goal bearing) and absolute speeds (m/s).

    Offsets are ordered center-out with the starboard member of each pair
    first, so argmax tie-breaking prefers small starboard deviations.
    """

    headings: np.ndarray
    speeds: np.ndarray

    def __post_init__(self) -> None:
        if len(self.headings) == 0 or len(self.speeds) == 0:
            raise ValueError("grid must be non-empty")

    @classmethod
    def default(cls, max_speed: float) -> "CandidateGrid":
        step = math.radians(5.0)
        offsets = [0.0]
        for k in range(1, 36):
            offsets.append(-k * step)
            offsets.append(k * step)
        offsets.append(math.pi)
        return cls(
            headings=np.asarray(offsets, dtype=float),
            speeds=np.linspace(0.0, max_speed, 11),
        )


@dataclass(frozen=True, slots=True)
class ContactEstimate:
    """A contact view plus the observer's velocity estimate for it (m/s)."""

    view: ContactView
    velocity: tuple[float, float]


def classify_role(ego: VehicleState, contact: VehicleState) -> Role:
    """Encounter role of the ego with respect to one contact.

    Head-on requires a near-dead-ahead contact on a near-reciprocal course;
    overtaking means the ego sits in the sector astern of the contact;
    crossing give-way means the contact bears to starboard within the
    112.5 degree sector.  Precedence: head-on, overtaking, crossing.
    """
    dx, dy = contact.x - ego.x, contact.y - ego.y
    bearing = wrap_angle(math.atan2(dy, dx) - ego.theta)
    if abs(bearing) <= _HEAD_ON_BEARING:
        if abs(wrap_angle(contact.theta - ego.theta - math.pi)) <= _HEAD_ON_RECIPROCAL:
            return Role.HEAD_ON
    stern = wrap_angle(math.atan2(-dy, -dx) - contact.theta)
    if abs(wrap_angle(stern - math.pi)) <= _STERN_SECTOR:
        return Role.OVERTAKING
    if -_CROSSING_SECTOR <= bearing < 0.0:
        return Role.CROSSING_GIVE_WAY
    return Role.STAND_ON


def priority_weight(range_m: float, params: ColregsParams) -> float:
    """Contact weight: 0 beyond pwt_outer_dist, 1 inside pwt_inner_dist."""
    w = (params.pwt_outer_dist - range_m) / (params.pwt_outer_dist - params.pwt_inner_dist)
    return min(1.0, max(0.0, w))


def waypoint_control(
    ego: VehicleState,
    goal: WaypointGoal,
    gain: float = 1.0,
    spec: VehicleSpec | None = None,
) -> ControlInput:
    """Proportional course-and-speed law toward the goal.

    Thrust holds the desired speed and ramps down inside twice the capture
    radius; rudder is proportional to the wrapped heading error.  Clamped
    to the vessel's limits when a spec is given.
    """
    dx, dy = goal.target[0] - ego.x, goal.target[1] - ego.y
    dist = math.hypot(dx, dy)
    bearing = math.atan2(dy, dx)
    u = ControlInput(
        u_thr=goal.desired_speed * min(1.0, dist / (2.0 * goal.capture_radius)),
        u_rud=gain * wrap_angle(bearing - ego.theta),
    )
    if spec is not None:
        u = clamp(u, spec.bounds, spec=spec)
    return u


def cpa(
    ego: VehicleState,
    ego_velocity: tuple[float, float],
    contact: VehicleState,
    contact_velocity: tuple[float, float],
    horizon: float,
) -> tuple[float, float]:
    """Closest point of approach under constant velocities.

    Returns (distance, time); time is clipped to [0, horizon] so diverging
    pairs report the current range at time zero.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    px, py = contact.x - ego.x, contact.y - ego.y
    vx = contact_velocity[0] - ego_velocity[0]
    vy = contact_velocity[1] - ego_velocity[1]
    pv = px * vx + py * vy
    vv = vx * vx + vy * vy
    t = float(np.clip(-pv / max(vv, _EPS_SPEED_SQ), 0.0, horizon))
    d = float(np.hypot(px + t * vx, py + t * vy))
    return d, t


def colregs_utility(
    candidate: tuple[float, float],
    ego: VehicleState,
    contact: ContactEstimate,
    params: ColregsParams,
) -> float:
    """Avoidance utility in [0, 1] of one (heading, speed) candidate.

    The closest-approach distance the candidate would achieve against the
    contact is ramped between min_util_cpa_dist and max_util_cpa_dist; for
    head-on and crossing give-way encounters, candidates that let the
    contact pass down the ego's port side keep full utility while
    starboard-side passes are discounted.
    """
    psi, speed = candidate
    cs = contact.view.state
    px, py = cs.x - ego.x, cs.y - ego.y
    cos_psi, sin_psi = np.cos(psi), np.sin(psi)
    rvx = contact.velocity[0] - speed * cos_psi
    rvy = contact.velocity[1] - speed * sin_psi
    pv = px * rvx + py * rvy
    vv = rvx * rvx + rvy * rvy
    t = np.clip(-pv / np.maximum(vv, _EPS_SPEED_SQ), 0.0, params.time_horizon)
    rx, ry = px + t * rvx, py + t * rvy
    d = np.hypot(rx, ry)
    base = np.clip(
        (d - params.min_util_cpa_dist)
        / (params.max_util_cpa_dist - params.min_util_cpa_dist),
        0.0,
        1.0,
    )
    role = classify_role(ego, cs)
    if role in (Role.HEAD_ON, Role.CROSSING_GIVE_WAY):
        side = cos_psi * ry - sin_psi * rx
        bias = np.where(side > 0.0, 1.0, _STARBOARD_PASS_BIAS)
        return float(base * bias)
    return float(base)


def blend(
    ego: VehicleState,
    goal: WaypointGoal,
    contacts: Sequence[ContactEstimate],
    params: ColregsParams,
    grid: CandidateGrid | None = None,
    gain: float = 1.0,
    spec: VehicleSpec | None = None,
) -> ControlInput:
    """Score the candidate grid and command the best (heading, speed).

    score = transit_weight * transit_utility + sum_j w_j * avoidance_utility_j,
    with w_j the range-based priority weight.  With no contact inside
    pwt_outer_dist this reduces exactly to waypoint_control.  Ties break
    toward the lowest heading index, then the lowest speed index.
    """
    weighted = []
    for est in contacts:
        cs = est.view.state
        rng = math.hypot(cs.x - ego.x, cs.y - ego.y)
        w = priority_weight(rng, params)
        if w > 0.0:
            weighted.append((est, w))
    if not weighted:
        return waypoint_control(ego, goal, gain=gain, spec=spec)

    if grid is None:
        if spec is None:
            raise ValueError("blend needs a candidate grid or a vehicle spec")
        grid = CandidateGrid.default(spec.bounds.thr_max)

    dx, dy = goal.target[0] - ego.x, goal.target[1] - ego.y
    dist = math.hypot(dx, dy)
    bearing_goal = math.atan2(dy, dx)
    v_des = goal.desired_speed * min(1.0, dist / (2.0 * goal.capture_radius))

    off = grid.headings
    spd = grid.speeds
    psi = np.arctan2(np.sin(bearing_goal + off), np.cos(bearing_goal + off))
    cos_psi, sin_psi = np.cos(psi)[:, None], np.sin(psi)[:, None]
    # Course deviation is punished harder than speed deviation: a vessel
    # giving way should prefer a modest slowdown over a wide detour.
    align = (0.5 * (1.0 + np.cos(off))) ** _ALIGN_EXPONENT
    # Tent spans the desired speed itself so a full stop earns zero transit
    # utility whenever the vessel still wants to move; two stopped vessels
    # facing each other would otherwise tie with sidestepping and deadlock.
    span = max(float(v_des), 1e-9)
    speed_pref = np.clip(1.0 - np.abs(spd - v_des) / span, 0.0, 1.0)
    score = params.transit_weight * align[:, None] * speed_pref[None, :]

    vx = spd[None, :] * cos_psi
    vy = spd[None, :] * sin_psi
    for est, w in weighted:
        cs = est.view.state
        px, py = cs.x - ego.x, cs.y - ego.y
        rvx = est.velocity[0] - vx
        rvy = est.velocity[1] - vy
        pv = px * rvx + py * rvy
        vv = rvx * rvx + rvy * rvy
        t = np.clip(-pv / np.maximum(vv, _EPS_SPEED_SQ), 0.0, params.time_horizon)
        rx, ry = px + t * rvx, py + t * rvy
        d = np.hypot(rx, ry)
        base = np.clip(
            (d - params.min_util_cpa_dist)
            / (params.max_util_cpa_dist - params.min_util_cpa_dist),
            0.0,
            1.0,
        )
        role = classify_role(ego, cs)
        if role in (Role.HEAD_ON, Role.CROSSING_GIVE_WAY):
            side = cos_psi * ry - sin_psi * rx
            util = base * np.where(side > 0.0, 1.0, _STARBOARD_PASS_BIAS)
        else:
            util = base
        score = score + w * util

    i, j = divmod(int(np.argmax(score)), score.shape[1])
    u = ControlInput(
        u_thr=float(spd[j]),
        u_rud=gain * wrap_angle(float(psi[i]) - ego.theta),
    )
    if spec is not None:
        u = clamp(u, spec.bounds, spec=spec)
    return u
