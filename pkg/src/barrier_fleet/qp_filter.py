"""Safety filter: minimally modify a nominal control to satisfy all pairwise
barrier constraints.

The per-tick problem is a tiny, strictly convex QP: two decision variables
(thrust and rudder), a box of actuator limits, and one halfspace per
neighbor.  It is solved exactly by enumerating KKT candidates: with two
variables the minimizer is either the nominal input, the Q-norm projection
onto one constraint boundary, or the intersection of two boundaries.  When
the constraint set is infeasible, slack variables with a high quadratic
penalty are introduced for exactly the troublesome rows, dilating the safe
set just enough to admit a best-effort command.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

from .cbf import BarrierParams, ContactView, PairwiseConstraint, assemble_constraints
from .dynamics import ControlBounds, ControlInput, VehicleSpec, VehicleState, effective_rudder_limit

_TOL = 1e-9


class QpInternalError(RuntimeError):
    """The fully slacked problem failed; indicates a solver bug, not a model state."""


@dataclass(frozen=True, slots=True)
class QpWeights:
    """Objective weights: deviation penalties and the per-slack penalty.

    ``q_rud`` defaults to gamma^2 = 4 so both deviation terms are measured
    in control-point velocity units; the slack penalty must dominate both.
    """

    q_thr: float = 1.0
    q_rud: float = 4.0
    slack_penalty: float = 4.0e6

    def __post_init__(self) -> None:
        if min(self.q_thr, self.q_rud, self.slack_penalty) <= 0:
            raise ValueError("all weights must be positive")
        if self.slack_penalty < 100.0 * max(self.q_thr, self.q_rud):
            raise ValueError("slack_penalty must dominate the deviation weights")

    @classmethod
    def for_gamma(cls, gamma: float, q_thr: float = 1.0) -> "QpWeights":
        q_rud = q_thr * gamma * gamma
        return cls(q_thr=q_thr, q_rud=q_rud, slack_penalty=1.0e6 * max(q_thr, q_rud))


@dataclass(frozen=True, slots=True)
class FilterResult:
    u_safe: ControlInput
    slacks: list[tuple[int, float]]
    active_set: list[int]
    modified: bool
    objective_value: float
    kkt_residual: float = 0.0


# A row is (a1, a2, b, row_id); row_id < 0 marks actuator-box rows.
_Row = tuple[float, float, float, int]
_BOX_ID_BASE = -1


def _box_rows(bounds: ControlBounds) -> list[_Row]:
    (tl, th), (rl, rh) = bounds.box()
    return [
        (1.0, 0.0, th, -1),
        (-1.0, 0.0, -tl, -2),
        (0.0, 1.0, rh, -3),
        (0.0, -1.0, -rl, -4),
    ]


def _feasible(u1: float, u2: float, rows: list[_Row], tol: float = _TOL) -> bool:
    for a1, a2, b, _ in rows:
        if a1 * u1 + a2 * u2 - b > tol * max(1.0, abs(b)):
            return False
    return True


def _qp2d(
    g11: float,
    g12: float,
    g22: float,
    q1: float,
    q2: float,
    rows: list[_Row],
) -> tuple[float, float, dict[int, float]] | None:
    """Exact minimizer of 0.5 u'Gu + q'u subject to a.u <= b rows.

    Returns (u1, u2, multipliers keyed by row position) or None when the
    rows are jointly infeasible.  G must be symmetric positive definite.
    """
    det = g11 * g22 - g12 * g12
    i11, i12, i22 = g22 / det, -g12 / det, g11 / det
    u01 = -(i11 * q1 + i12 * q2)
    u02 = -(i12 * q1 + i22 * q2)
    if _feasible(u01, u02, rows):
        return u01, u02, {}

    def objective(u1: float, u2: float) -> float:
        return 0.5 * (g11 * u1 * u1 + 2 * g12 * u1 * u2 + g22 * u2 * u2) + q1 * u1 + q2 * u2

    best: tuple[float, float, float, dict[int, float]] | None = None

    # Single active constraint: minimize along each boundary line directly
    # (u = b a/|a|^2 + t d with d ⟂ a); this stays accurate when G is
    # ill-conditioned, where the G-inverse projection loses digits.
    for idx, (a1, a2, b, _) in enumerate(rows):
        na = a1 * a1 + a2 * a2
        if na <= 0.0:
            continue
        px, py = b * a1 / na, b * a2 / na
        dx, dy = -a2, a1
        dgd = g11 * dx * dx + 2.0 * g12 * dx * dy + g22 * dy * dy
        if dgd <= 0.0:
            continue
        t = -(dx * (g11 * px + g12 * py + q1) + dy * (g12 * px + g22 * py + q2)) / dgd
        u1, u2 = px + t * dx, py + t * dy
        r1 = g11 * u1 + g12 * u2 + q1
        r2 = g12 * u1 + g22 * u2 + q2
        lam = -(a1 * r1 + a2 * r2) / na
        if lam < -_TOL * max(1.0, math.hypot(r1, r2)):
            continue
        if _feasible(u1, u2, rows):
            f = objective(u1, u2)
            if best is None or f < best[0]:
                best = (f, u1, u2, {idx: max(lam, 0.0)})

    # Two active constraints: boundary intersections (vertices).
    for (i, ri), (j, rj) in combinations(enumerate(rows), 2):
        a1, a2, b1, _ = ri
        c1, c2, b2, _ = rj
        d = a1 * c2 - a2 * c1
        scale = max(abs(a1), abs(a2)) * max(abs(c1), abs(c2))
        if abs(d) <= 1e-12 * max(1.0, scale):
            continue
        u1 = (b1 * c2 - a2 * b2) / d
        u2 = (a1 * b2 - b1 * c1) / d
        if not _feasible(u1, u2, rows):
            continue
        # Multipliers from G u + q + A' lam = 0.
        r1 = -(g11 * u1 + g12 * u2 + q1)
        r2 = -(g12 * u1 + g22 * u2 + q2)
        lam1 = (r1 * c2 - r2 * c1) / d
        lam2 = (a1 * r2 - a2 * r1) / d
        lam_scale = max(1.0, abs(r1), abs(r2))
        if lam1 < -_TOL * lam_scale or lam2 < -_TOL * lam_scale:
            continue
        f = objective(u1, u2)
        if best is None or f < best[0]:
            best = (f, u1, u2, {i: lam1, j: lam2})

    if best is None:
        return None
    _, u1, u2, lam = best
    return u1, u2, lam


def _hinge_pattern_solve(
    q_diag: tuple[float, float],
    u_ref: tuple[float, float],
    hard: list[_Row],
    hinged: list[_Row],
    rho: float,
) -> tuple[float, float] | None:
    """Minimize (u-ref)'Q(u-ref) + rho * sum max(0, a.u-b)^2 over the hard rows.

    Solved by enumerating which hinge terms are engaged; the objective is
    C1 and convex, so any pattern whose smooth solution is consistent with
    it is the global minimizer.  Returns None when the hard rows alone are
    infeasible.
    """
    qt, qr = q_diag
    base = _qp2d(2 * qt, 0.0, 2 * qr, -2 * qt * u_ref[0], -2 * qr * u_ref[1], hard)
    if base is None:
        return None
    if not hinged:
        return base[0], base[1]

    n = len(hinged)
    patterns = sorted(range(1 << n), key=lambda m: (bin(m).count("1"), m))
    for mask in patterns:
        g11, g12, g22 = 2 * qt, 0.0, 2 * qr
        q1, q2 = -2 * qt * u_ref[0], -2 * qr * u_ref[1]
        for k in range(n):
            if mask >> k & 1:
                a1, a2, b, _ = hinged[k]
                g11 += 2 * rho * a1 * a1
                g12 += 2 * rho * a1 * a2
                g22 += 2 * rho * a2 * a2
                q1 -= 2 * rho * b * a1
                q2 -= 2 * rho * b * a2
        sol = _qp2d(g11, g12, g22, q1, q2, hard)
        if sol is None:
            return None
        u1, u2, _ = sol
        consistent = True
        for k, (a1, a2, b, _) in enumerate(hinged):
            margin = a1 * u1 + a2 * u2 - b
            tol = _TOL * max(1.0, abs(b))
            engaged = bool(mask >> k & 1)
            if engaged and margin < -tol:
                consistent = False
                break
            if not engaged and margin > tol:
                consistent = False
                break
        if consistent:
            return u1, u2
    raise QpInternalError("no consistent hinge pattern found")


def _kkt_residual(
    g: tuple[float, float, float],
    q: tuple[float, float],
    u: tuple[float, float],
    rows: list[_Row],
    lam: dict[int, float],
) -> float:
    g11, g12, g22 = g
    r1 = g11 * u[0] + g12 * u[1] + q[0]
    r2 = g12 * u[0] + g22 * u[1] + q[1]
    comp = 0.0
    primal = 0.0
    for idx, (a1, a2, b, _) in enumerate(rows):
        margin = a1 * u[0] + a2 * u[1] - b
        primal = max(primal, margin / max(1.0, abs(b)))
        lam_i = lam.get(idx, 0.0)
        r1 += lam_i * a1
        r2 += lam_i * a2
        comp = max(comp, abs(lam_i * margin) / max(1.0, abs(b), abs(lam_i)))
    scale = max(1.0, abs(q[0]), abs(q[1]), g11 * abs(u[0]), g22 * abs(u[1]))
    return max(math.hypot(r1, r2) / scale, comp, primal)


def solve_qp(
    u_nom: ControlInput,
    constraints: list[PairwiseConstraint],
    bounds: ControlBounds,
    weights: QpWeights,
) -> FilterResult:
    """Project the nominal input onto the safe set in the Q-norm.

    Feasible problems are solved exactly; infeasible ones escalate by
    slacking only the rows still violated at the least-squares violation
    point, repeating until the remaining hard rows admit a solution.  The
    actuator box is never slacked.
    """
    pair_rows: list[_Row] = [
        (float(c.a[0]), float(c.a[1]), float(c.b), c.contact_id) for c in constraints
    ]
    box = _box_rows(bounds)
    qt, qr = weights.q_thr, weights.q_rud

    # Exact pass-through: a nominal input already inside every constraint
    # is returned bit-for-bit.
    if _feasible(u_nom.u_thr, u_nom.u_rud, pair_rows + box, tol=0.0):
        return FilterResult(u_nom, [], [], False, 0.0, 0.0)

    g = (2 * qt, 0.0, 2 * qr)
    q = (-2 * qt * u_nom.u_thr, -2 * qr * u_nom.u_rud)
    sol = _qp2d(*g, *q, pair_rows + box)
    if sol is not None:
        u1, u2, lam = sol
        rows = pair_rows + box
        active = sorted(
            rows[i][3] for i in lam if rows[i][3] >= 0 and lam[i] > _TOL
        )
        dev1, dev2 = u1 - u_nom.u_thr, u2 - u_nom.u_rud
        return FilterResult(
            u_safe=ControlInput(u1, u2),
            slacks=[],
            active_set=active,
            modified=(u1 != u_nom.u_thr or u2 != u_nom.u_rud),
            objective_value=qt * dev1 * dev1 + qr * dev2 * dev2,
            kkt_residual=_kkt_residual(g, q, (u1, u2), rows, lam),
        )

    # Infeasible: escalate slacks until the hard rows admit a solution.
    u_ref = (u_nom.u_thr, u_nom.u_rud)
    slacked: dict[int, _Row] = {}
    hard = list(pair_rows)
    for _ in range(len(pair_rows) + 1):
        # The probe only identifies which rows to slack, so a mild pull
        # toward u_nom keeps its sub-problems well conditioned.
        ls = _hinge_pattern_solve((1e-4, 1e-4), u_ref, box, hard, 1.0)
        if ls is None:
            raise QpInternalError("actuator box is empty")
        newly = [
            r for r in hard if r[0] * ls[0] + r[1] * ls[1] - r[2] > _TOL * max(1.0, abs(r[2]))
        ]
        if not newly:
            raise QpInternalError("escalation made no progress")
        for r in newly:
            slacked[id(r)] = r
        hard = [r for r in hard if id(r) not in slacked]
        hinged = list(slacked.values())
        u = _hinge_pattern_solve((qt, qr), u_ref, hard + box, hinged, weights.slack_penalty)
        if u is not None:
            break
    else:
        raise QpInternalError("slack escalation failed to terminate")

    u1, u2 = u
    slacks = []
    for a1, a2, b, rid in hinged:
        slacks.append((rid, max(0.0, a1 * u1 + a2 * u2 - b)))
    slacks.sort(key=lambda t: t[0])
    dev1, dev2 = u1 - u_nom.u_thr, u2 - u_nom.u_rud
    obj = qt * dev1 * dev1 + qr * dev2 * dev2 + weights.slack_penalty * sum(
        s * s for _, s in slacks
    )
    tight = [
        rid
        for a1, a2, b, rid in hard
        if rid >= 0 and abs(a1 * u1 + a2 * u2 - b) <= 1e-7 * max(1.0, abs(b))
    ]
    active = sorted(set(tight) | {rid for rid, s in slacks if s > 0.0})
    # Residual of the reduced problem (slacks eliminated analytically).
    g11, g12, g22 = 2 * qt, 0.0, 2 * qr
    q1, q2 = -2 * qt * u_ref[0], -2 * qr * u_ref[1]
    rho = weights.slack_penalty
    for a1, a2, b, _ in hinged:
        if a1 * u1 + a2 * u2 - b > 0.0:
            g11 += 2 * rho * a1 * a1
            g12 += 2 * rho * a1 * a2
            g22 += 2 * rho * a2 * a2
            q1 -= 2 * rho * b * a1
            q2 -= 2 * rho * b * a2
    resolved = _qp2d(g11, g12, g22, q1, q2, hard + box)
    lam = resolved[2] if resolved is not None else {}
    residual = _kkt_residual((g11, g12, g22), (q1, q2), (u1, u2), hard + box, lam)
    return FilterResult(
        u_safe=ControlInput(u1, u2),
        slacks=slacks,
        active_set=active,
        modified=True,
        objective_value=obj,
        kkt_residual=residual,
    )


def filter(
    u_nom: ControlInput,
    ego: VehicleState,
    ego_spec: VehicleSpec,
    contacts: list[ContactView],
    params: BarrierParams,
    weights: QpWeights,
) -> FilterResult:
    """Assemble pairwise constraints for every contact and solve the filter QP.

    The rudder limit fed to the QP is the gated authority at the nominal
    thrust (one tick of lag relative to the executed thrust; the final
    actuation clamp applies the exact gate).
    """
    constraints = assemble_constraints(ego, ego_spec, contacts, params)
    bounds = ego_spec.bounds
    if ego_spec.rudder_gate_threshold > 0.0:
        (tl, th), (rl, rh) = bounds.box()
        thr = min(max(u_nom.u_thr, tl), th)
        r_eff = effective_rudder_limit(thr, bounds, ego_spec.rudder_gate_threshold)
        bounds = ControlBounds(
            thr_min=-tl, thr_max=th, rud_min=min(-rl, r_eff), rud_max=min(rh, r_eff)
        )
    return solve_qp(u_nom, constraints, bounds, weights)
