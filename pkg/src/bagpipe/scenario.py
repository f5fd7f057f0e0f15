"""Test-case enumeration and toy kinematic bag synthesis.

Cases are the cartesian product of named variables (barrier position,
speed class, motion) minus filtered-out combinations. Each case can be
synthesized into a bag of `/ego/pose` and `/barrier/pose` messages with
a simple Euler-integrated constant-speed model.

Pose payload (32 bytes): x, y, yaw, speed as four IEEE-754 f64 LE.
"""

from __future__ import annotations

import itertools
import math
import os
import struct
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from bagpipe.bag import BagSummary, BagWriter, MessageRecord, open_writer
from bagpipe.stores import DiskStore

EGO_TOPIC = "/ego/pose"
BARRIER_TOPIC = "/barrier/pose"

POSE = struct.Struct("<dddd")

# barrier start offsets from the ego, metres; +x ahead, +y left
GRID_OFFSET_M = 10.0
_POSITION_OFFSETS = {
    "left-front": (GRID_OFFSET_M, GRID_OFFSET_M),
    "left": (0.0, GRID_OFFSET_M),
    "left-rear": (-GRID_OFFSET_M, GRID_OFFSET_M),
    "front": (GRID_OFFSET_M, 0.0),
    "rear": (-GRID_OFFSET_M, 0.0),
    "right-front": (GRID_OFFSET_M, -GRID_OFFSET_M),
    "right": (0.0, -GRID_OFFSET_M),
    "right-rear": (-GRID_OFFSET_M, -GRID_OFFSET_M),
}

_REAR_POSITIONS = frozenset({"rear", "left-rear", "right-rear"})


@dataclass(frozen=True, slots=True)
class ScenarioVariable:
    name: str
    values: tuple[str, ...]

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable name is empty")
        if not self.values:
            raise ValueError(f"variable {self.name!r} has no values")
        if len(set(self.values)) != len(self.values):
            raise ValueError(f"variable {self.name!r} has duplicate values")
        object.__setattr__(self, "values", tuple(self.values))


@dataclass(frozen=True, slots=True)
class ScenarioCase:
    """One (variable, value) assignment per declared variable, in order."""

    assignments: tuple[tuple[str, str], ...]

    def __getitem__(self, name: str) -> str:
        for key, value in self.assignments:
            if key == name:
                return value
        raise KeyError(name)

    def get(self, name: str, default: str | None = None) -> str | None:
        try:
            return self[name]
        except KeyError:
            return default

    def as_dict(self) -> dict[str, str]:
        return dict(self.assignments)


def barrier_defaults() -> tuple[ScenarioVariable, ...]:
    return (
        ScenarioVariable(
            "position",
            (
                "left-front",
                "left",
                "left-rear",
                "front",
                "rear",
                "right-front",
                "right",
                "right-rear",
            ),
        ),
        ScenarioVariable("speed", ("faster", "equal", "slower")),
        ScenarioVariable("motion", ("straight", "left-turn", "right-turn")),
    )


def default_filter(case: ScenarioCase) -> bool:
    """Drop rear-positioned slower barriers: they fall behind and never interact."""
    return not (case["position"] in _REAR_POSITIONS and case["speed"] == "slower")


def enumerate_cases(
    variables: Sequence[ScenarioVariable],
    predicate: Callable[[ScenarioCase], bool] | None = None,
) -> list[ScenarioCase]:
    """Cartesian product in declared-variable order, minus rejected cases."""
    names = [v.name for v in variables]
    if len(set(names)) != len(names):
        raise ValueError("duplicate variable names")
    cases = []
    for combo in itertools.product(*(v.values for v in variables)):
        case = ScenarioCase(tuple(zip(names, combo)))
        if predicate is None or predicate(case):
            cases.append(case)
    return cases


@dataclass(frozen=True, slots=True)
class SynthesisParams:
    duration_s: float = 10.0
    step_ms: int = 100
    ego_speed: float = 10.0
    speed_delta: float = 2.0
    yaw_rate: float = 0.2

    def __post_init__(self):
        if self.duration_s < 0:
            raise ValueError("duration_s must be >= 0")
        if self.step_ms <= 0:
            raise ValueError("step_ms must be positive")

    @property
    def steps(self) -> int:
        return int(round(self.duration_s * 1000.0 / self.step_ms))


def _barrier_speed(speed_class: str, params: SynthesisParams) -> float:
    if speed_class == "faster":
        return params.ego_speed + params.speed_delta
    if speed_class == "equal":
        return params.ego_speed
    if speed_class == "slower":
        return params.ego_speed - params.speed_delta
    raise ValueError(f"unknown speed class {speed_class!r}")


def _barrier_yaw_rate(motion: str, params: SynthesisParams) -> float:
    if motion == "straight":
        return 0.0
    if motion == "left-turn":
        return params.yaw_rate
    if motion == "right-turn":
        return -params.yaw_rate
    raise ValueError(f"unknown motion {motion!r}")


def synthesize_bag(
    case: ScenarioCase, params: SynthesisParams, writer: BagWriter
) -> BagSummary:
    """One pose per vehicle per step; ego straight at constant speed.

    Poses are recorded before integrating, so each step's displacement
    magnitude is exactly speed * dt. Yaw updates after displacement.
    """
    try:
        position = case["position"]
        speed_class = case["speed"]
        motion = case["motion"]
    except KeyError as exc:
        raise ValueError(f"case is missing variable {exc.args[0]!r}") from exc
    try:
        bx, by = _POSITION_OFFSETS[position]
    except KeyError:
        raise ValueError(f"unknown position {position!r}") from None
    barrier_speed = _barrier_speed(speed_class, params)
    barrier_yaw_rate = _barrier_yaw_rate(motion, params)

    dt = params.step_ms / 1000.0
    step_ns = params.step_ms * 1_000_000
    ego_x = 0.0
    ego_speed = params.ego_speed
    barrier_yaw = 0.0
    for index in range(params.steps):
        timestamp = index * step_ns
        writer.append(
            MessageRecord(EGO_TOPIC, timestamp, POSE.pack(ego_x, 0.0, 0.0, ego_speed))
        )
        writer.append(
            MessageRecord(
                BARRIER_TOPIC, timestamp, POSE.pack(bx, by, barrier_yaw, barrier_speed)
            )
        )
        ego_x += ego_speed * dt
        bx += barrier_speed * math.cos(barrier_yaw) * dt
        by += barrier_speed * math.sin(barrier_yaw) * dt
        barrier_yaw += barrier_yaw_rate * dt
    return writer.seal()


def generate_suite(
    variables: Sequence[ScenarioVariable],
    predicate: Callable[[ScenarioCase], bool] | None,
    params: SynthesisParams,
    out_dir: str,
) -> str:
    """One bag per case plus a manifest; returns the manifest path.

    Manifest: UTF-8, LF endings, `index<TAB>name=value` per case, in
    case order; bags are named `case-<4-digit index>.dbag`.
    """
    cases = enumerate_cases(variables, predicate)
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    for index, case in enumerate(cases):
        bag_path = os.path.join(out_dir, f"case-{index:04d}.dbag")
        if os.path.exists(bag_path):
            os.unlink(bag_path)
        with DiskStore.create(bag_path) as store:
            synthesize_bag(case, params, open_writer(store))
        pairs = "\t".join(f"{name}={value}" for name, value in case.assignments)
        lines.append(f"{index}\t{pairs}" if pairs else f"{index}")
    manifest_path = os.path.join(out_dir, "manifest.tsv")
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as sink:
        for line in lines:
            sink.write(line + "\n")
    return manifest_path
