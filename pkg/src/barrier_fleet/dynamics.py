"""Planar control-point kinematics for surface vessels.

A vessel is reduced to the pose of its control point, a reference point a
fixed distance ``gamma`` ahead of the hull pivot.  With ``gamma > 0`` the
rudder command moves the control point sideways, so both inputs appear in
the position derivative; ``gamma = 0`` recovers the classic unicycle.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    t = math.fmod(theta, TWO_PI)
    if t <= -math.pi:
        t += TWO_PI
    elif t > math.pi:
        t -= TWO_PI
    return t


@dataclass(frozen=True, slots=True)
class VehicleState:
    """Pose of a vessel's control point: east, north, heading (rad)."""

    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError(f"non-finite state ({self.x}, {self.y}, {self.theta})")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True, slots=True)
class ControlInput:
    """Thrust / rudder command pair.

    ``u_thr`` is the commanded control-point forward speed in m/s and
    ``u_rud`` the commanded yaw rate in rad/s.  Saturation is clamp()'s
    job, not the constructor's.
    """

    u_thr: float
    u_rud: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.u_thr) and math.isfinite(self.u_rud)):
            raise ValueError(f"non-finite control ({self.u_thr}, {self.u_rud})")


@dataclass(frozen=True, slots=True)
class ControlBounds:
    """Box of admissible inputs.

    ``thr_min`` and ``rud_min`` are magnitudes of the negative-side limits,
    so the admissible box is [-thr_min, thr_max] x [-rud_min, rud_max].
    """

    thr_min: float
    thr_max: float
    rud_min: float
    rud_max: float

    def __post_init__(self) -> None:
        if self.thr_min < 0 or self.rud_min < 0:
            raise ValueError("reverse limits are stored as magnitudes and must be >= 0")
        # Upper limits may be zero: a gated rudder collapses to no authority,
        # and a stationary contact is modeled by the degenerate box {0} x {0}.
        if self.thr_max < 0:
            raise ValueError("thr_max must be >= 0")
        if self.rud_max < 0:
            raise ValueError("rud_max must be >= 0")

    def box(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """((thr_lo, thr_hi), (rud_lo, rud_hi)) with signed lower limits."""
        return (-self.thr_min, self.thr_max), (-self.rud_min, self.rud_max)


@dataclass(frozen=True, slots=True)
class VehicleSpec:
    """Per-vessel geometry, safety radius, actuation box and rudder gate."""

    gamma: float
    r_safe: float
    bounds: ControlBounds
    rudder_gate_threshold: float = 0.25

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma < self.r_safe):
            raise ValueError(
                f"control-point offset must satisfy 0 < gamma < r_safe, "
                f"got gamma={self.gamma}, r_safe={self.r_safe}"
            )
        if not (0.0 <= self.rudder_gate_threshold <= 1.0):
            raise ValueError("rudder_gate_threshold must lie in [0, 1]")
        if self.gamma * self.bounds.rud_max < self.bounds.thr_max:
            warnings.warn(
                "gamma * rud_max < thr_max: the vessel cannot always move its "
                "control point as fast as a same-spec neighbor, so the "
                "worst-case safety guarantee does not apply",
                stacklevel=2,
            )

    def assumption_holds(self) -> bool:
        """True when the vessel can out-run a same-spec neighbor's control point."""
        return self.gamma * self.bounds.rud_max >= self.bounds.thr_max


def g_matrix(state: VehicleState, gamma: float) -> np.ndarray:
    """Input matrix mapping (u_thr, u_rud) to (dx, dy, dtheta)."""
    c = math.cos(state.theta)
    s = math.sin(state.theta)
    return np.array([[c, -gamma * s], [s, gamma * c], [0.0, 1.0]])


def effective_rudder_limit(u_thr: float, bounds: ControlBounds, gate_threshold: float) -> float:
    """Rudder authority available at a given thrust level.

    Differential-thrust vessels lose turning authority at low thrust; the
    gate is a linear ramp from zero thrust up to ``gate_threshold * thr_max``.
    A threshold of 0 disables the gate.
    """
    knee = gate_threshold * bounds.thr_max
    if knee <= 0.0:
        return bounds.rud_max
    return bounds.rud_max * min(1.0, abs(u_thr) / knee)


def clamp(
    u: ControlInput,
    bounds: ControlBounds,
    spec: VehicleSpec | None = None,
    current_u_thr: float | None = None,
) -> ControlInput:
    """Saturate a command into the admissible box, applying the rudder gate.

    The gate is evaluated at the clipped commanded thrust unless
    ``current_u_thr`` supplies the vessel's actual thrust level.  Without a
    ``spec`` (or with gate threshold 0) this is a plain box clip.
    """
    (thr_lo, thr_hi), (rud_lo, rud_hi) = bounds.box()
    u_thr = min(max(u.u_thr, thr_lo), thr_hi)
    if spec is not None and spec.rudder_gate_threshold > 0.0:
        gate_thr = u_thr if current_u_thr is None else min(max(current_u_thr, thr_lo), thr_hi)
        r_eff = effective_rudder_limit(gate_thr, bounds, spec.rudder_gate_threshold)
        rud_lo, rud_hi = -min(r_eff, -rud_lo), min(r_eff, rud_hi)
    u_rud = min(max(u.u_rud, rud_lo), rud_hi)
    if u_thr == u.u_thr and u_rud == u.u_rud:
        return u
    return ControlInput(u_thr, u_rud)


def step(
    state: VehicleState,
    u: ControlInput,
    disturbance: np.ndarray | tuple[float, float],
    dt: float,
    gamma: float,
) -> VehicleState:
    """Forward-Euler update of the control-point pose.

    The disturbance is a translational drift in m/s (wind/current); it does
    not act on the heading.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    c = math.cos(state.theta)
    s = math.sin(state.theta)
    dx, dy = float(disturbance[0]), float(disturbance[1])
    return VehicleState(
        state.x + dt * (c * u.u_thr - gamma * s * u.u_rud + dx),
        state.y + dt * (s * u.u_thr + gamma * c * u.u_rud + dy),
        state.theta + dt * u.u_rud,
    )


ZERO_DISTURBANCE = (0.0, 0.0)
