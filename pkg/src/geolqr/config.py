"""Scenario configuration: a single JSON object, strictly validated.

Top-level keys: command, cost, sim, inertia, initial, goal, reference,
controller, avoidance, output. Unknown keys at any level are errors, and
errors carry the dotted path of the offending field. Angles are radians,
time is seconds. Rotations are given as 9 numbers row-major and must already
be orthogonal within 1e-6; they are rejected, never re-orthonormalized.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

COMMANDS = ("gains", "regulate", "track", "avoid", "check")
GAIN_SOURCES = ("are", "dre")
A_MATRIX_MODES = ("published-regulation", "published-tracking", "reconciled")

ROTATION_TOL = 1e-6

# Per-command defaults: the published regulation table was produced with
# alpha = 0.5, the tracking table with alpha = 1, gamma = -2.
_COMMAND_COST_DEFAULTS = {
    "gains": (0.5, -1.0),
    "regulate": (0.5, -1.0),
    "track": (1.0, -2.0),
    "avoid": (1.0, 0.0),
    "check": (0.5, -1.0),
}
_COMMAND_T_END = {"regulate": 20.0, "track": 50.0}
_COMMAND_MODE = {"track": "published-tracking"}


def _require_object(value, path):
    if not isinstance(value, dict):
        raise ValidationError(path, f"expected an object, got {type(value).__name__}")
    return value


def _reject_unknown(obj: dict, allowed, path):
    for key in obj:
        if key not in allowed:
            raise ValidationError(f"{path}.{key}" if path else key, "unknown key")


def _number(obj, key, path, default=None):
    if key not in obj:
        if default is None:
            raise ValidationError(f"{path}.{key}", "missing required value")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{path}.{key}", "expected a number")
    if not math.isfinite(value):
        raise ValidationError(f"{path}.{key}", "must be finite")
    return float(value)


def _vector(obj, key, path, length, default=None):
    if key not in obj:
        if default is None:
            raise ValidationError(f"{path}.{key}", "missing required value")
        return np.asarray(default, dtype=float)
    value = obj[key]
    if (not isinstance(value, list) or len(value) != length
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                       for x in value)):
        raise ValidationError(f"{path}.{key}", f"expected a list of {length} numbers")
    arr = np.asarray(value, dtype=float)
    if not np.isfinite(arr).all():
        raise ValidationError(f"{path}.{key}", "entries must be finite")
    return arr


def _rotation(obj, key, path, default_identity=True):
    if key not in obj:
        if default_identity:
            return np.eye(3)
        raise ValidationError(f"{path}.{key}", "missing required value")
    arr = _vector(obj, key, path, 9).reshape(3, 3)
    defect = np.linalg.norm(arr.T @ arr - np.eye(3))
    if defect > ROTATION_TOL:
        raise ValidationError(f"{path}.{key}",
                              f"not orthogonal (defect {defect:.3g} > {ROTATION_TOL:g})")
    if abs(np.linalg.det(arr) - 1.0) > ROTATION_TOL:
        raise ValidationError(f"{path}.{key}", "determinant differs from +1")
    return arr


@dataclass
class CostConfig:
    alpha: float
    gamma: float
    q_weights: np.ndarray


@dataclass
class SimConfig:
    h: float
    t_end: float


@dataclass
class InitialConfig:
    rotation: np.ndarray
    omega: np.ndarray


@dataclass
class GoalConfig:
    rotation: np.ndarray


@dataclass
class ReferenceConfig:
    """Per-axis polynomial coefficients of the reference angular velocity,
    ascending order, plus the initial reference rotation."""

    omega_coeffs: list
    r0: np.ndarray

    def omega(self, t: float) -> np.ndarray:
        return np.array([sum(c * t ** k for k, c in enumerate(axis))
                         for axis in self.omega_coeffs])

    def omega_dot(self, t: float) -> np.ndarray:
        return np.array([sum(k * c * t ** (k - 1) for k, c in enumerate(axis) if k >= 1)
                         for axis in self.omega_coeffs])


@dataclass
class ControllerSettings:
    gain_source: str
    feedforward_accel_term: bool
    a_matrix_mode: str


@dataclass
class ObstacleSpec:
    center: np.ndarray
    radius: float


@dataclass
class AvoidanceSpec:
    dimension: int
    q0: np.ndarray
    v0: np.ndarray
    target: np.ndarray
    horizon: float
    obstacles: list


@dataclass
class OutputConfig:
    directory: str
    decimation: int


@dataclass
class ScenarioConfig:
    command: str
    cost: CostConfig
    sim: SimConfig
    inertia: np.ndarray
    initial: InitialConfig
    goal: GoalConfig
    reference: ReferenceConfig
    controller: ControllerSettings
    avoidance: AvoidanceSpec | None
    output: OutputConfig


def _parse_cost(obj, command) -> CostConfig:
    section = _require_object(obj.get("cost", {}), "cost")
    _reject_unknown(section, ("alpha", "gamma", "q_weights"), "cost")
    d_alpha, d_gamma = _COMMAND_COST_DEFAULTS[command]
    alpha = _number(section, "alpha", "cost", default=d_alpha)
    if alpha <= 0.0:
        raise ValidationError("cost.alpha", "must be positive")
    gamma = _number(section, "gamma", "cost", default=d_gamma)
    if "q_weights" in section:
        rows = section["q_weights"]
        if not (isinstance(rows, list) and len(rows) == 2
                and all(isinstance(r, list) and len(r) == 2 for r in rows)):
            raise ValidationError("cost.q_weights", "expected a 2x2 nested list")
        q = np.asarray(rows, dtype=float)
        if not np.isfinite(q).all():
            raise ValidationError("cost.q_weights", "entries must be finite")
        if abs(q[0, 1] - q[1, 0]) > 1e-12 or np.linalg.eigvalsh(q).min() < -1e-12:
            raise ValidationError("cost.q_weights", "must be symmetric PSD")
    else:
        q = np.eye(2)
    return CostConfig(alpha, gamma, q)


def _parse_sim(obj, command) -> SimConfig:
    section = _require_object(obj.get("sim", {}), "sim")
    _reject_unknown(section, ("h", "t_end"), "sim")
    h = _number(section, "h", "sim", default=1e-3)
    if not 0.0 < h <= 0.01:
        raise ValidationError("sim.h", "must satisfy 0 < h <= 0.01")
    t_end = _number(section, "t_end", "sim", default=_COMMAND_T_END.get(command, 20.0))
    if t_end <= 0.0:
        raise ValidationError("sim.t_end", "must be positive")
    return SimConfig(h, t_end)


def _parse_inertia(obj) -> np.ndarray:
    if "inertia" not in obj:
        return np.eye(3)
    rows = obj["inertia"]
    if not (isinstance(rows, list) and len(rows) == 3
            and all(isinstance(r, list) and len(r) == 3 for r in rows)):
        raise ValidationError("inertia", "expected a 3x3 nested list")
    j = np.asarray(rows, dtype=float)
    if not np.isfinite(j).all():
        raise ValidationError("inertia", "entries must be finite")
    if np.abs(j - j.T).max() > 1e-12:
        raise ValidationError("inertia", "must be symmetric")
    if np.linalg.eigvalsh(j).min() <= 0.0:
        raise ValidationError("inertia", "must be positive definite")
    return j


def _parse_initial(obj) -> InitialConfig:
    section = _require_object(obj.get("initial", {}), "initial")
    _reject_unknown(section, ("rotation", "omega"), "initial")
    return InitialConfig(
        rotation=_rotation(section, "rotation", "initial"),
        omega=_vector(section, "omega", "initial", 3, default=[0.0, 0.0, 0.0]),
    )


def _parse_goal(obj) -> GoalConfig:
    section = _require_object(obj.get("goal", {}), "goal")
    _reject_unknown(section, ("rotation",), "goal")
    return GoalConfig(rotation=_rotation(section, "rotation", "goal"))


def _parse_reference(obj) -> ReferenceConfig:
    section = _require_object(obj.get("reference", {}), "reference")
    _reject_unknown(section, ("omega_coeffs", "r0"), "reference")
    if "omega_coeffs" in section:
        coeffs = section["omega_coeffs"]
        if not (isinstance(coeffs, list) and len(coeffs) == 3
                and all(isinstance(axis, list) and axis
                        and all(isinstance(c, (int, float)) and not isinstance(c, bool)
                                and math.isfinite(c) for c in axis)
                        for axis in coeffs)):
            raise ValidationError("reference.omega_coeffs",
                                  "expected 3 lists of finite coefficients")
        coeffs = [[float(c) for c in axis] for axis in coeffs]
    else:
        coeffs = [[0.0, 0.5], [0.0, 0.3], [0.0, 0.4]]
    return ReferenceConfig(omega_coeffs=coeffs,
                           r0=_rotation(section, "r0", "reference"))


def _parse_controller(obj, command) -> ControllerSettings:
    section = _require_object(obj.get("controller", {}), "controller")
    _reject_unknown(section, ("gain_source", "feedforward_accel_term", "a_matrix_mode"),
                    "controller")
    source = section.get("gain_source", "are")
    if source not in GAIN_SOURCES:
        raise ValidationError("controller.gain_source",
                              f"expected one of {GAIN_SOURCES}")
    accel = section.get("feedforward_accel_term", False)
    if not isinstance(accel, bool):
        raise ValidationError("controller.feedforward_accel_term", "expected a boolean")
    mode = section.get("a_matrix_mode",
                       _COMMAND_MODE.get(command, "published-regulation"))
    if mode not in A_MATRIX_MODES:
        raise ValidationError("controller.a_matrix_mode",
                              f"expected one of {A_MATRIX_MODES}")
    return ControllerSettings(source, accel, mode)


def _parse_avoidance(obj, command) -> AvoidanceSpec | None:
    if "avoidance" not in obj:
        if command == "avoid":
            raise ValidationError("avoidance", "required for the avoid command")
        return None
    section = _require_object(obj["avoidance"], "avoidance")
    _reject_unknown(section, ("dimension", "q0", "v0", "target", "horizon", "obstacles"),
                    "avoidance")
    dim = section.get("dimension")
    if not isinstance(dim, int) or isinstance(dim, bool) or not 1 <= dim <= 3:
        raise ValidationError("avoidance.dimension", "expected an integer in [1, 3]")
    q0 = _vector(section, "q0", "avoidance", dim)
    v0 = _vector(section, "v0", "avoidance", dim, default=[0.0] * dim)
    target = _vector(section, "target", "avoidance", dim)
    horizon = _number(section, "horizon", "avoidance", default=1.0)
    if horizon <= 0.0:
        raise ValidationError("avoidance.horizon", "must be positive")
    obstacles = []
    raw = section.get("obstacles", [])
    if not isinstance(raw, list):
        raise ValidationError("avoidance.obstacles", "expected a list")
    for i, entry in enumerate(raw):
        path = f"avoidance.obstacles[{i}]"
        entry = _require_object(entry, path)
        _reject_unknown(entry, ("center", "radius"), path)
        center = _vector(entry, "center", path, dim)
        radius = _number(entry, "radius", path)
        if radius <= 0.0:
            raise ValidationError(f"{path}.radius", "must be positive")
        if float((q0 - center) @ (q0 - center)) <= radius ** 2:
            raise ValidationError(path, "initial configuration inside obstacle")
        obstacles.append(ObstacleSpec(center, radius))
    return AvoidanceSpec(dim, q0, v0, target, horizon, obstacles)


def _parse_output(obj) -> OutputConfig:
    section = _require_object(obj.get("output", {}), "output")
    _reject_unknown(section, ("directory", "decimation"), "output")
    directory = section.get("directory", ".")
    if not isinstance(directory, str):
        raise ValidationError("output.directory", "expected a string")
    decimation = section.get("decimation", 10)
    if not isinstance(decimation, int) or isinstance(decimation, bool) or decimation < 1:
        raise ValidationError("output.decimation", "expected a positive integer")
    return OutputConfig(directory, decimation)


def parse_config(text: str) -> ScenarioConfig:
    """Parse and fully validate a scenario configuration.

    Raises:
        ParseError: malformed JSON, non-finite literals, or a non-object root.
        ValidationError: any schema violation, naming the field path.
    """
    def _no_constants(name):
        raise ParseError(f"non-finite literal {name!r} not allowed")

    try:
        obj = json.loads(text, parse_constant=_no_constants)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ParseError("top level must be a JSON object")

    _reject_unknown(obj, ("command", "cost", "sim", "inertia", "initial", "goal",
                          "reference", "controller", "avoidance", "output"), "")
    command = obj.get("command")
    if command not in COMMANDS:
        raise ValidationError("command", f"expected one of {COMMANDS}")

    return ScenarioConfig(
        command=command,
        cost=_parse_cost(obj, command),
        sim=_parse_sim(obj, command),
        inertia=_parse_inertia(obj),
        initial=_parse_initial(obj),
        goal=_parse_goal(obj),
        reference=_parse_reference(obj),
        controller=_parse_controller(obj, command),
        avoidance=_parse_avoidance(obj, command),
        output=_parse_output(obj),
    )


def default_config(command: str = "check") -> ScenarioConfig:
    """Config with every default filled, used by the bare check command."""
    return parse_config(json.dumps({"command": command}))
