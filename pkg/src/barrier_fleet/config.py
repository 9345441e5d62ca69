"""Scenario files: one YAML document describing mission, fleet, and outputs.

Every mapping and key is validated on load; anything unrecognized is
rejected with the dotted path to the offending entry so a typo like
``colregs.transit_wieght`` points at itself rather than at a default
silently taking over.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .behaviors import ColregsParams
from .cbf import BarrierParams
from .dynamics import ControlBounds, VehicleSpec
from .qp_filter import QpWeights
from .sim import POLICIES, FleetContext, JoustConfig


class ConfigError(ValueError):
    """Invalid scenario file; the message carries the dotted key path."""


_JOUST_KEYS = {
    "mode",
    "seed",
    "n_legs",
    "target_encounters",
    "circle_diameter",
    "n_vehicles",
    "speed_range",
    "speed_reset_period",
    "disturbance_range",
    "dt",
    "encounter_range",
    "capture_radius",
    "timeout_factor",
}
_BARRIER_KEYS = {"r_safe", "alpha_gain"}
_COLREGS_KEYS = {
    "pwt_outer_dist",
    "pwt_inner_dist",
    "min_util_cpa_dist",
    "max_util_cpa_dist",
    "time_horizon",
    "transit_weight",
}
_QP_KEYS = {"q_thr", "q_rud", "slack_penalty"}
_FLEET_KEYS = {"gain"}
_VEHICLE_KEYS = {
    "policy",
    "gamma",
    "r_safe",
    "rudder_gate_threshold",
    "rudder_gate_model",
    "bounds",
}
_BOUNDS_KEYS = {"thr_min", "thr_max", "rud_min", "rud_max"}
_OUTPUT_KEYS = {"directory", "trajectories"}
_TOP_KEYS = {"joust", "barrier", "colregs", "qp", "fleet", "vehicles", "output"}


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    """Everything a batch run or a serve session needs."""

    joust: JoustConfig
    fleet: FleetContext
    out_dir: Path
    write_trajectories: bool = True


def _reject_unknown(table: Mapping[str, Any], allowed: set[str], path: str) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key" if path else f"{key}: unknown key")


def _number(table: Mapping[str, Any], key: str, path: str) -> float:
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {type(v).__name__}")
    return float(v)


def _integer(table: Mapping[str, Any], key: str, path: str) -> int:
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {type(v).__name__}")
    return v


def _pair(table: Mapping[str, Any], key: str, path: str) -> tuple[float, float]:
    v = table[key]
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(f"{path}.{key}: expected a 2-element array")
    for item in v:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ConfigError(f"{path}.{key}: expected numeric entries")
    return float(v[0]), float(v[1])


def _string(table: Mapping[str, Any], key: str, path: str) -> str:
    v = table[key]
    if not isinstance(v, str):
        raise ConfigError(f"{path}.{key}: expected a string, got {type(v).__name__}")
    return v


def _boolean(table: Mapping[str, Any], key: str, path: str) -> bool:
    v = table[key]
    if not isinstance(v, bool):
        raise ConfigError(f"{path}.{key}: expected a boolean, got {type(v).__name__}")
    return v


def _require_table(raw: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    v = raw.get(key) or {}
    if not isinstance(v, dict):
        raise ConfigError(f"{key}: expected a mapping")
    return v


def _build_joust(raw: Mapping[str, Any], n_vehicles_hint: int | None) -> JoustConfig:
    _reject_unknown(raw, _JOUST_KEYS, "joust")
    kwargs: dict[str, Any] = {}
    if "mode" in raw:
        kwargs["mode"] = _string(raw, "mode", "joust")
    for key in ("seed", "n_legs", "target_encounters", "n_vehicles"):
        if key in raw:
            kwargs[key] = _integer(raw, key, "joust")
    for key in (
        "circle_diameter",
        "speed_reset_period",
        "dt",
        "encounter_range",
        "capture_radius",
        "timeout_factor",
    ):
        if key in raw:
            kwargs[key] = _number(raw, key, "joust")
    for key in ("speed_range", "disturbance_range"):
        if key in raw:
            kwargs[key] = _pair(raw, key, "joust")
    if "n_vehicles" not in kwargs and n_vehicles_hint is not None:
        kwargs["n_vehicles"] = n_vehicles_hint
    try:
        return JoustConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"joust: {exc}") from exc


def _build_vehicle(
    raw: Mapping[str, Any], index: int, barrier: BarrierParams
) -> tuple[VehicleSpec, str]:
    path = f"vehicles[{index}]"
    _reject_unknown(raw, _VEHICLE_KEYS, path)
    policy = _string(raw, "policy", path) if "policy" in raw else "autonomous"
    if policy not in POLICIES:
        raise ConfigError(f"{path}.policy: must be one of {sorted(POLICIES)}")
    gamma = _number(raw, "gamma", path) if "gamma" in raw else 2.0
    r_safe = _number(raw, "r_safe", path) if "r_safe" in raw else barrier.r_safe
    gate = (
        _number(raw, "rudder_gate_threshold", path)
        if "rudder_gate_threshold" in raw
        else 0.25
    )
    # Only one thruster-gate mapping exists; the key is accepted so scenario
    # files can pin it explicitly and fail loudly if a different model is
    # ever requested.
    if "rudder_gate_model" in raw:
        model = _string(raw, "rudder_gate_model", path)
        if model != "linear_ramp_v1":
            raise ConfigError(
                f"{path}.rudder_gate_model: unknown model {model!r} "
                "(only 'linear_ramp_v1' is implemented)"
            )
    bounds_raw = raw.get("bounds") or {}
    if not isinstance(bounds_raw, dict):
        raise ConfigError(f"{path}.bounds: expected a mapping")
    _reject_unknown(bounds_raw, _BOUNDS_KEYS, f"{path}.bounds")
    bkw = {k: _number(bounds_raw, k, f"{path}.bounds") for k in bounds_raw}
    defaults = {"thr_min": 0.0, "thr_max": 2.0, "rud_min": 1.0, "rud_max": 1.0}
    defaults.update(bkw)
    try:
        spec = VehicleSpec(
            gamma=gamma,
            r_safe=r_safe,
            bounds=ControlBounds(**defaults),
            rudder_gate_threshold=gate,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return spec, policy


def from_dict(raw: Mapping[str, Any], base_dir: Path | None = None) -> ScenarioConfig:
    """Build a validated ScenarioConfig from a parsed YAML document."""
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a mapping")
    _reject_unknown(raw, _TOP_KEYS, "")

    barrier_raw = _require_table(raw, "barrier")
    _reject_unknown(barrier_raw, _BARRIER_KEYS, "barrier")
    try:
        barrier = BarrierParams(
            **{k: _number(barrier_raw, k, "barrier") for k in barrier_raw}
        )
    except ValueError as exc:
        raise ConfigError(f"barrier: {exc}") from exc

    colregs_raw = _require_table(raw, "colregs")
    _reject_unknown(colregs_raw, _COLREGS_KEYS, "colregs")
    try:
        colregs = ColregsParams(
            **{k: _number(colregs_raw, k, "colregs") for k in colregs_raw}
        )
    except ValueError as exc:
        raise ConfigError(f"colregs: {exc}") from exc

    qp_raw = _require_table(raw, "qp")
    _reject_unknown(qp_raw, _QP_KEYS, "qp")
    try:
        weights = QpWeights(**{k: _number(qp_raw, k, "qp") for k in qp_raw})
    except ValueError as exc:
        raise ConfigError(f"qp: {exc}") from exc

    fleet_raw = _require_table(raw, "fleet")
    _reject_unknown(fleet_raw, _FLEET_KEYS, "fleet")
    gain = _number(fleet_raw, "gain", "fleet") if "gain" in fleet_raw else 1.0

    vehicles_raw = raw.get("vehicles") or []
    if not isinstance(vehicles_raw, list):
        raise ConfigError("vehicles: expected a list of mappings")

    joust = _build_joust(
        _require_table(raw, "joust"),
        n_vehicles_hint=len(vehicles_raw) if vehicles_raw else None,
    )

    if vehicles_raw:
        if len(vehicles_raw) != joust.n_vehicles:
            raise ConfigError(
                f"vehicles: {len(vehicles_raw)} entries but joust.n_vehicles "
                f"= {joust.n_vehicles}"
            )
        specs = []
        policies = []
        for i, entry in enumerate(vehicles_raw):
            if not isinstance(entry, dict):
                raise ConfigError(f"vehicles[{i}]: expected a mapping")
            spec, policy = _build_vehicle(entry, i, barrier)
            specs.append(spec)
            policies.append(policy)
    else:
        spec, policy = _build_vehicle({}, 0, barrier)
        specs = [spec] * joust.n_vehicles
        policies = [policy] * joust.n_vehicles

    try:
        fleet = FleetContext(
            specs=specs,
            policies=policies,
            barrier=barrier,
            colregs=colregs,
            weights=weights,
            gain=gain,
        )
    except ValueError as exc:
        raise ConfigError(f"fleet: {exc}") from exc

    output_raw = _require_table(raw, "output")
    _reject_unknown(output_raw, _OUTPUT_KEYS, "output")
    directory = (
        _string(output_raw, "directory", "output")
        if "directory" in output_raw
        else "runs"
    )
    out_dir = Path(directory)
    if base_dir is not None and not out_dir.is_absolute():
        out_dir = base_dir / out_dir
    write_traj = (
        _boolean(output_raw, "trajectories", "output")
        if "trajectories" in output_raw
        else True
    )
    return ScenarioConfig(
        joust=joust, fleet=fleet, out_dir=out_dir, write_trajectories=write_traj
    )


def with_overrides(
    sc: ScenarioConfig,
    mode: str | None = None,
    seed: int | None = None,
    legs: int | None = None,
    vehicles: int | None = None,
    out_dir: str | Path | None = None,
) -> ScenarioConfig:
    """Apply command-line overrides to a loaded scenario.

    ``legs`` switches the campaign to a fixed leg count (clearing any
    encounter quota).  ``vehicles`` resizes a uniform fleet; a scenario
    with per-vehicle entries can only be resized to its own size.
    """
    from dataclasses import replace

    joust_kwargs: dict[str, Any] = {}
    if mode is not None:
        joust_kwargs["mode"] = mode
    if seed is not None:
        joust_kwargs["seed"] = seed
    if legs is not None:
        joust_kwargs["n_legs"] = legs
        joust_kwargs["target_encounters"] = None
    fleet = sc.fleet
    if vehicles is not None and vehicles != sc.joust.n_vehicles:
        uniform = (
            all(s == fleet.specs[0] for s in fleet.specs)
            and all(p == "autonomous" for p in fleet.policies)
        )
        if not uniform:
            raise ConfigError(
                "--vehicles cannot resize a fleet with per-vehicle entries"
            )
        joust_kwargs["n_vehicles"] = vehicles
        fleet = FleetContext(
            specs=[fleet.specs[0]] * vehicles,
            policies=["autonomous"] * vehicles,
            barrier=fleet.barrier,
            colregs=fleet.colregs,
            weights=fleet.weights,
            gain=fleet.gain,
        )
    try:
        joust = replace(sc.joust, **joust_kwargs) if joust_kwargs else sc.joust
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ScenarioConfig(
        joust=joust,
        fleet=fleet,
        out_dir=Path(out_dir) if out_dir is not None else sc.out_dir,
        write_trajectories=sc.write_trajectories,
    )


def load(path: str | Path) -> ScenarioConfig:
    """Parse and validate a scenario file.

    Raises ConfigError for anything wrong with the file: syntax errors keep
    the parser's line/column message, semantic errors name the dotted key.
    """
    p = Path(path)
    try:
        with open(p, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{p}: no such file") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    if raw is None:
        raw = {}
    return from_dict(raw, base_dir=p.parent)


def default_scenario(
    mode: str = "colregs_plus_cbf",
    seed: int = 0,
    n_vehicles: int = 4,
    target_encounters: int | None = 5000,
    n_legs: int | None = None,
    out_dir: str | Path = "runs",
) -> ScenarioConfig:
    """The shipped defaults, no file needed; used when the CLI gets no config."""
    kwargs: dict[str, Any] = {
        "mode": mode,
        "seed": seed,
        "n_vehicles": n_vehicles,
    }
    if n_legs is not None:
        kwargs["n_legs"] = n_legs
    else:
        kwargs["target_encounters"] = target_encounters
    joust = JoustConfig(**kwargs)
    return ScenarioConfig(
        joust=joust,
        fleet=FleetContext.default(n_vehicles),
        out_dir=Path(out_dir),
        write_trajectories=True,
    )
