"""Pairwise barrier functions and the worst-case neighbor bound.

Safety between a pair of vessels is the superlevel set of

    h(ego, contact) = dx^2 + dy^2 - r_safe^2

measured between control points.  Each vessel turns every observed
neighbor into one linear constraint on its own input: the neighbor's
contribution to dh/dt is replaced by the minimum it could achieve over its
admissible input box, so no knowledge of the neighbor's actual control is
needed.  The stack of those constraints is the safe input set handed to
the QP filter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ControlBounds, VehicleSpec, VehicleState

_HEADING_SWEEP = np.deg2rad(np.arange(0.0, 360.0, 1.0))


@dataclass(frozen=True, slots=True)
class BarrierParams:
    """Fleet-wide barrier shape: safety radius and linear class-K gain."""

    r_safe: float = 15.0
    alpha_gain: float = 1.0

    def __post_init__(self) -> None:
        if self.r_safe <= 0 or self.alpha_gain <= 0:
            raise ValueError("r_safe and alpha_gain must be positive")


@dataclass(frozen=True, slots=True)
class ContactView:
    """What the ego vessel knows about one neighbor.

    Only the observed pose and the (possibly over-approximated) input box
    are required; controls are never exchanged.  ``heading_known=False``
    marks a sensing dropout, in which case the worst-case bound additionally
    minimizes over all neighbor headings.
    """

    state: VehicleState
    bounds: ControlBounds
    gamma: float
    contact_id: int = 0
    heading_known: bool = True


@dataclass(frozen=True, slots=True)
class PairwiseConstraint:
    """One halfspace a . u <= b on the ego input, from one neighbor."""

    a: np.ndarray
    b: float
    h_value: float
    contact_id: int

    def satisfied_by(self, u_thr: float, u_rud: float, tol: float = 0.0) -> bool:
        return self.a[0] * u_thr + self.a[1] * u_rud <= self.b + tol


def h_pair(ego: VehicleState, contact: VehicleState, r_safe: float) -> float:
    """Squared control-point separation minus the squared safety radius."""
    dx = ego.x - contact.x
    dy = ego.y - contact.y
    return dx * dx + dy * dy - r_safe * r_safe


def _lie_row(dx: float, dy: float, theta: float, gamma: float) -> tuple[float, float]:
    # [2dx, 2dy, 0] . g(theta, gamma), written out.
    c = math.cos(theta)
    s = math.sin(theta)
    return 2.0 * (dx * c + dy * s), 2.0 * gamma * (dy * c - dx * s)


def lie_derivative_ego(ego: VehicleState, contact: VehicleState, gamma: float) -> np.ndarray:
    """Row vector d h_pair/du for the ego vessel's input."""
    row = _lie_row(ego.x - contact.x, ego.y - contact.y, ego.theta, gamma)
    return np.array(row)


def lie_derivative_contact(ego: VehicleState, contact: VehicleState, gamma: float) -> np.ndarray:
    """Row vector d h_pair/du for the neighbor's input (roles swapped)."""
    row = _lie_row(contact.x - ego.x, contact.y - ego.y, contact.theta, gamma)
    return np.array(row)


def _box_min(c1: float, c2: float, bounds: ControlBounds) -> float:
    (tl, th), (rl, rh) = bounds.box()
    return min(c1 * tl, c1 * th) + min(c2 * rl, c2 * rh)


def zeta_min(contact: ContactView, ego: VehicleState) -> float:
    """Worst-case neighbor contribution to dh/dt.

    Closed-form minimum of the neighbor's Lie derivative over its input
    box; a box objective is separable so each axis is minimized at one of
    its two limits.  With an unknown neighbor heading the minimum is taken
    over a 1-degree heading sweep as a conservative fallback.
    """
    dx = contact.state.x - ego.x
    dy = contact.state.y - ego.y
    if contact.heading_known:
        c1, c2 = _lie_row(dx, dy, contact.state.theta, contact.gamma)
        return _box_min(c1, c2, contact.bounds)
    cos = np.cos(_HEADING_SWEEP)
    sin = np.sin(_HEADING_SWEEP)
    c1 = 2.0 * (dx * cos + dy * sin)
    c2 = 2.0 * contact.gamma * (dy * cos - dx * sin)
    (tl, th), (rl, rh) = contact.bounds.box()
    vals = np.minimum(c1 * tl, c1 * th) + np.minimum(c2 * rl, c2 * rh)
    return float(vals.min())


def build_constraint(
    ego: VehicleState,
    ego_spec: VehicleSpec,
    contact: ContactView,
    params: BarrierParams,
) -> PairwiseConstraint:
    """Linear ego-input constraint guaranteeing dh/dt >= -alpha(h) against
    a worst-case neighbor.

    The barrier uses the ego vessel's own safety radius, which may differ
    per platform; ``params`` supplies the class-K gain.
    """
    h = h_pair(ego, contact.state, ego_spec.r_safe)
    a1, a2 = _lie_row(ego.x - contact.state.x, ego.y - contact.state.y, ego.theta, ego_spec.gamma)
    b = zeta_min(contact, ego) + params.alpha_gain * h
    return PairwiseConstraint(a=np.array([-a1, -a2]), b=b, h_value=h, contact_id=contact.contact_id)


def assemble_constraints(
    ego: VehicleState,
    ego_spec: VehicleSpec,
    contacts: list[ContactView],
    params: BarrierParams,
) -> list[PairwiseConstraint]:
    """One constraint per observed neighbor, ordered by contact id."""
    ordered = sorted(contacts, key=lambda c: c.contact_id)
    return [build_constraint(ego, ego_spec, c, params) for c in ordered]
