"""Elementary actions turned into uniform member line loads.

Slab and wall panels hand their pressure to the four bounding members:
the two short sides take ``P * l / 4`` and the two long sides
``P * l / (2 L) * (L - l / 2)``, which together carry exactly ``P * l * L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .fem import LineLoad
from .rng import substream
from .structgen import FrameModel

GRAVITY = 9.81  # m/s^2
AIR_DENSITY = 1.25  # kg/m^3
SNOW_SHAPE_COEFF = 0.8  # flat roofs
SNOW_GROUND_RANGE = (600.0, 5600.0)  # Pa
FLOOR_PRESSURE_RANGE = (2000.0, 5000.0)  # Pa
WIND_SPEED_RANGE = (25.0, 31.0)  # m/s

DOWN = (0.0, 0.0, -1.0)


@dataclass(frozen=True)
class ExpositionCategory:
    name: str
    k: float
    z0: float
    z_min: float


EXPOSITION = {
    "I": ExpositionCategory("I", 0.17, 0.01, 2.0),
    "II": ExpositionCategory("II", 0.19, 0.05, 4.0),
    "III": ExpositionCategory("III", 0.20, 0.10, 5.0),
    "IV": ExpositionCategory("IV", 0.22, 0.30, 8.0),
    "V": ExpositionCategory("V", 0.23, 0.70, 12.0),
}


class Face(str, Enum):
    WINDWARD = "windward"
    LEEWARD = "leeward"
    LATERAL = "lateral"


WIND_DIRECTIONS = {
    "+x": (1, 0, 0),
    "-x": (-1, 0, 0),
    "+y": (0, 1, 0),
    "-y": (0, -1, 0),
}


@dataclass(frozen=True)
class SelfWeight:
    kind = "self_weight"

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class VerticalPressure:
    pressure: float  # Pa
    kind = "vertical_pressure"

    def params(self) -> dict:
        return {"pressure": self.pressure}


@dataclass(frozen=True)
class Wind:
    speed: float  # m/s
    category: str  # key of EXPOSITION
    direction: str  # key of WIND_DIRECTIONS
    kind = "wind"

    def __post_init__(self):
        if self.category not in EXPOSITION:
            raise ValueError(f"unknown exposition category {self.category!r}")
        if self.direction not in WIND_DIRECTIONS:
            raise ValueError(f"unknown wind direction {self.direction!r}")

    def params(self) -> dict:
        return {"speed": self.speed, "category": self.category, "direction": self.direction}


@dataclass(frozen=True)
class Snow:
    ground_load: float  # p0, Pa
    kind = "snow"

    @property
    def in_range(self) -> bool:
        lo, hi = SNOW_GROUND_RANGE
        return lo <= self.ground_load <= hi

    def params(self) -> dict:
        return {"ground_load": self.ground_load}


ElementaryAction = Union[SelfWeight, VerticalPressure, Wind, Snow]
ACTION_KINDS = ("self_weight", "vertical_pressure", "wind", "snow")


def action_from_params(kind: str, params: dict) -> ElementaryAction:
    if kind == "self_weight":
        return SelfWeight()
    if kind == "vertical_pressure":
        return VerticalPressure(float(params["pressure"]))
    if kind == "wind":
        return Wind(float(params["speed"]), str(params["category"]), str(params["direction"]))
    if kind == "snow":
        return Snow(float(params["ground_load"]))
    raise ValueError(f"unknown action kind {kind!r}")


def sample_action(seed: int, attempt: int = 0) -> ElementaryAction:
    rng = substream(seed, "loads", attempt)
    kind = ACTION_KINDS[int(rng.integers(len(ACTION_KINDS)))]
    if kind == "self_weight":
        return SelfWeight()
    if kind == "vertical_pressure":
        return VerticalPressure(float(rng.uniform(*FLOOR_PRESSURE_RANGE)))
    if kind == "wind":
        speed = float(rng.uniform(*WIND_SPEED_RANGE))
        category = list(EXPOSITION)[int(rng.integers(len(EXPOSITION)))]
        direction = list(WIND_DIRECTIONS)[int(rng.integers(len(WIND_DIRECTIONS)))]
        return Wind(speed, category, direction)
    return Snow(float(rng.uniform(*SNOW_GROUND_RANGE)))


def self_weight_line_load(params) -> float:
    return GRAVITY * params.density * params.width * params.height


def slab_line_loads(pressure: float, short: float, long: float) -> tuple[float, float]:
    """Uniform loads (N/m) on the short and long sides of a rectangular panel."""
    if not 0 < short <= long:
        raise ValueError("need 0 < short <= long")
    p_short = pressure * short / 4.0
    p_long = pressure * short / (2.0 * long) * (long - short / 2.0)
    return p_short, p_long


def exposition_coefficient(z: float, cat: ExpositionCategory | str) -> float:
    if isinstance(cat, str):
        cat = EXPOSITION[cat]
    if z < 0:
        raise ValueError("altitude must be non-negative")
    t = math.log(max(z, cat.z_min) / cat.z0)
    return cat.k**2 * t * (7.0 + t)


def pressure_coefficient(face: Face | str, h: float, d: float) -> float:
    if h <= 0 or d <= 0:
        raise ValueError("h and d must be positive")
    r = h / d
    face = Face(face)
    if face is Face.WINDWARD:
        # 0.7 + 0.1 r, written so the two branches agree exactly at r = 1
        return 0.8 - 0.1 * (1.0 - r) if r <= 1 else 0.8
    if face is Face.LEEWARD:
        return -0.3 - 0.2 * r if r <= 1 else -0.5 - 0.05 * (r - 1)
    return -0.5 - 0.8 * r if r <= 0.5 else -0.9


def wind_pressure(z_top: float, speed: float, cat, face, h: float, d: float) -> float:
    """Signed wind pressure (Pa) on a panel whose top is at ``z_top``.

    Positive values push on the face, negative values are suction.
    """
    return 0.5 * AIR_DENSITY * speed**2 * exposition_coefficient(z_top, cat) * pressure_coefficient(face, h, d)


def snow_pressure(ground_load: float) -> float:
    return ground_load * SNOW_SHAPE_COEFF


def _panel_loads(pressure, short, long, short_members, long_members, direction) -> list[LineLoad]:
    p_short, p_long = slab_line_loads(abs(pressure), short, long)
    sign = 1.0 if pressure >= 0 else -1.0
    d = tuple(sign * c for c in direction)
    return [LineLoad(int(m), p_short, d) for m in short_members] + [
        LineLoad(int(m), p_long, d) for m in long_members
    ]


def classify_face(normal, wind_dir) -> Face:
    dot = sum(a * b for a, b in zip(normal, wind_dir))
    if dot < 0:
        return Face.WINDWARD
    if dot > 0:
        return Face.LEEWARD
    return Face.LATERAL


def structure_extent(frame: FrameModel, axis: int) -> float:
    c = frame.nodes[:, axis]
    return float(c.max() - c.min())


def action_to_member_loads(frame: FrameModel, action: ElementaryAction) -> list[LineLoad]:
    if isinstance(action, SelfWeight):
        p = self_weight_line_load(frame.params)
        return [LineLoad(m, p, DOWN) for m in range(frame.n_members)]

    if isinstance(action, (VerticalPressure, Snow)):
        if isinstance(action, Snow):
            pressure, roof = snow_pressure(action.ground_load), True
        else:
            pressure, roof = action.pressure, False
        loads = []
        for s in frame.slabs:
            if s.is_roof == roof:
                loads += _panel_loads(pressure, s.short, s.long, s.short_members, s.long_members, DOWN)
        return loads

    if isinstance(action, Wind):
        wdir = WIND_DIRECTIONS[action.direction]
        axis = 0 if wdir[0] else 1
        h = float(frame.nodes[:, 2].max())
        d = structure_extent(frame, axis)
        loads = []
        for w in frame.walls:
            face = classify_face(w.normal, wdir)
            p = wind_pressure(w.z_top, action.speed, action.category, face, h, d)
            # Pressure acts against the outward normal, suction along it.
            inward = tuple(-float(c) for c in w.normal)
            if w.width <= w.height:
                short, long, sm, lm = w.width, w.height, w.horizontal_members, w.vertical_members
            else:
                short, long, sm, lm = w.height, w.width, w.vertical_members, w.horizontal_members
            loads += _panel_loads(p, short, long, sm, lm, inward)
        return loads

    raise TypeError(f"unsupported action {action!r}")


def combine_actions(solutions) -> np.ndarray:
    """Weighted sum of per-action solutions, given as ``(weight, vector)`` pairs."""
    solutions = list(solutions)
    if not solutions:
        raise ValueError("nothing to combine")
    n = len(solutions[0][1])
    out = np.zeros(n)
    for weight, u in solutions:
        u = np.asarray(u, dtype=float)
        if len(u) != n:
            raise ValueError("solution vectors differ in length")
        out += weight * u
    return out
