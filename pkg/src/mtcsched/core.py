"""Domain types shared by the assigner, simulator and surrogate.

Durations are seconds (floats) at the API surface; the simulator converts them
to integer nanosecond ticks internally.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

TICKS_PER_SECOND = 1_000_000_000


def to_ticks(seconds: float) -> int:
    return int(round(seconds * TICKS_PER_SECOND))


class PriorityClass(enum.IntEnum):
    HP = 0
    RP = 1
    LP = 2

    @classmethod
    def parse(cls, value) -> "PriorityClass":
        if isinstance(value, PriorityClass):
            return value
        if isinstance(value, str):
            return cls[value.strip().upper()]
        return cls(int(value))


POISSON = "poisson"
QUASI_PERIODIC = "quasi_periodic"


@dataclass(frozen=True)
class DeviceProfile:
    id: int
    cls: PriorityClass
    rate: float
    pattern: str = POISSON
    jitter: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cls", PriorityClass.parse(self.cls))
        if self.pattern not in (POISSON, QUASI_PERIODIC):
            raise ValueError(f"unknown arrival pattern {self.pattern!r}")


@dataclass(frozen=True)
class ProtocolParams:
    n_m: int
    r_h: int
    r_r: int
    r_l: int
    t_m: float = 9e-6
    t_x: float = 133e-6

    @property
    def cycles(self) -> tuple[int, int, int]:
        return (self.r_h, self.r_r, self.r_l)

    def cycle_of(self, cls: PriorityClass) -> int:
        return self.cycles[int(cls)]

    @property
    def slot_full(self) -> float:
        return self.n_m * self.t_m + self.t_x

    @property
    def slot_idle(self) -> float:
        return self.n_m * self.t_m


@dataclass(frozen=True)
class QosSpec:
    delta: tuple[float, float, float]
    rho: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "delta", tuple(float(d) for d in self.delta))
        object.__setattr__(self, "rho", tuple(float(r) for r in self.rho))

    def delay_of(self, cls: PriorityClass) -> float:
        return self.delta[int(cls)]

    def collision_of(self, cls: PriorityClass) -> float:
        return self.rho[int(cls)]


@dataclass
class MiniSlotState:
    """Scheduler bookkeeping for the mini-slot under a slot's cursor."""

    q_c: float = 0.0
    lambda_agg: float = 0.0
    gamma: float = 0.0
    tau: float = 1.0
    occupants: list[int] = field(default_factory=list)
    occupant_rate_sum: float = 0.0


@dataclass
class Assignment:
    """Anchor (slot, mini-slot) per device; both 1-based, ``None`` if unassigned.

    ``fail_device`` is the id at which the delay check aborted (flag F),
    ``collision_blocked`` marks a pass that ran out of mini-slots.
    """

    anchors: dict[int, tuple[int, int] | None]
    classes: dict[int, PriorityClass]
    success: bool = False
    n_assigned: int = 0
    fail_device: int | None = None
    collision_blocked: bool = False

    def rows(self) -> list[tuple[int, str, int, int]]:
        out = []
        for dev in sorted(self.anchors):
            a = self.anchors[dev]
            slot, mini = a if a is not None else (0, 0)
            out.append((dev, self.classes[dev].name, slot, mini))
        return out


def owned_slots(cls: PriorityClass, slot: int, params: ProtocolParams) -> list[int]:
    """All slot positions (1-based, within an LP cycle) owned through an anchor."""
    if cls == PriorityClass.LP:
        return [slot]
    step = params.cycle_of(cls)
    return list(range(slot, params.r_l + 1, step))


def ownership_table(assignment: Assignment, params: ProtocolParams) -> dict[tuple[int, int], list[int]]:
    cells: dict[tuple[int, int], list[int]] = {}
    for dev, anchor in assignment.anchors.items():
        if anchor is None:
            continue
        slot, mini = anchor
        for p in owned_slots(assignment.classes[dev], slot, params):
            cells.setdefault((p, mini), []).append(dev)
    return cells


@dataclass
class ValidationResult:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_params(params: ProtocolParams) -> list[str]:
    errs = []
    if params.n_m < 1:
        errs.append("n_m must be >= 1")
    if min(params.cycles) < 1:
        errs.append("cycle lengths must be >= 1")
    else:
        if params.r_r % params.r_h:
            errs.append("r_r not multiple of r_h")
        if params.r_l % params.r_r:
            errs.append("r_l not multiple of r_r")
    if params.t_m <= 0 or params.t_x <= 0:
        errs.append("t_m and t_x must be positive")
    return errs


def validate_scenario(
    profiles: Sequence[DeviceProfile],
    params: ProtocolParams,
    qos: QosSpec | None = None,
    assignment: Assignment | None = None,
) -> ValidationResult:
    res = ValidationResult()
    res.violations.extend(validate_params(params))
    if not profiles:
        res.warnings.append("no devices")
    ids = [p.id for p in profiles]
    if len(set(ids)) != len(ids):
        res.violations.append("duplicate device ids")
    elif ids and sorted(ids) != list(range(1, len(ids) + 1)):
        res.violations.append("device ids must be dense 1..D")
    for p in profiles:
        if not p.rate > 0:
            res.violations.append(f"device {p.id}: nonpositive rate")
        if not 0 <= p.jitter < 1:
            res.violations.append(f"device {p.id}: jitter fraction outside [0,1)")
    if qos is not None:
        if any(d <= 0 for d in qos.delta):
            res.violations.append("delay thresholds must be positive")
        if any(not 0 <= r <= 1 for r in qos.rho):
            res.violations.append("collision thresholds must lie in [0,1]")
    if profiles and params.t_x > 0:
        load = sum(p.rate for p in profiles) * params.t_x
        if load >= 1:
            res.warnings.append(f"offered load {load:.3f} >= 1; cycle length undefined")
    if assignment is not None and not validate_params(params):
        res.violations.extend(_check_assignment(profiles, params, assignment))
    return res


def _check_assignment(profiles: Iterable[DeviceProfile], params: ProtocolParams,
                      assignment: Assignment) -> list[str]:
    errs = []
    known = {p.id: p.cls for p in profiles}
    for dev, anchor in assignment.anchors.items():
        if dev not in known:
            errs.append(f"device {dev}: not in scenario")
            continue
        if assignment.classes.get(dev) != known[dev]:
            errs.append(f"device {dev}: class mismatch")
        if anchor is None:
            continue
        slot, mini = anchor
        limit = params.cycle_of(known[dev])
        if not 1 <= slot <= limit:
            errs.append(f"device {dev}: slot {slot} outside 1..{limit}")
        if not 1 <= mini <= params.n_m:
            errs.append(f"device {dev}: mini-slot {mini} outside 1..{params.n_m}")
    if errs:
        return errs
    for (p, m), devs in sorted(ownership_table(assignment, params).items()):
        kinds = {assignment.classes[d] for d in devs}
        if len(kinds) > 1:
            errs.append(f"slot {p} mini-slot {m}: mixed classes "
                        + "/".join(k.name for k in sorted(kinds)))
    return errs


def class_members(profiles: Iterable[DeviceProfile]) -> Mapping[PriorityClass, list[DeviceProfile]]:
    out: dict[PriorityClass, list[DeviceProfile]] = {c: [] for c in PriorityClass}
    for p in profiles:
        out[p.cls].append(p)
    return out
