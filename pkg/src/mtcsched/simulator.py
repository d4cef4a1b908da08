"""Discrete-event simulation of the mini-slot MAC.

Each slot starts with ``n_m`` sensing mini-slots. The lowest mini-slot holding
a device with a head-of-line packet (present at the slot boundary) claims the
slot; every ready device of that mini-slot starts transmitting right after it,
so two or more ready devices collide and their packets are lost. A packet sent
from mini-slot m departs at ``slot_start + m*t_m + t_x``. A claimed slot lasts
``n_m*t_m + t_x``; an unclaimed one is cut to ``n_m*t_m`` under SyncCS.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .core import (
    TICKS_PER_SECOND,
    Assignment,
    DeviceProfile,
    PriorityClass,
    ProtocolParams,
    QosSpec,
    ownership_table,
    to_ticks,
)
from .traffic import device_arrivals


@dataclass(frozen=True)
class SimOptions:
    duration: float = 2000.0
    seed: int = 0
    buffer: bool = True
    synccs: bool = True
    smsa: bool = True
    warmup: float | None = None
    frames: int | None = None
    random_phase: bool = False

    def __post_init__(self):
        if self.frames is None and self.duration <= self.warmup_seconds:
            raise ValueError("duration must exceed warmup")

    @property
    def warmup_seconds(self) -> float:
        if self.warmup is not None:
            return self.warmup
        return 0.0 if self.frames is not None else 0.05 * self.duration


@dataclass
class DeviceStats:
    device_id: int
    cls: PriorityClass
    mean_delay: float
    max_delay: float
    collision_prob: float
    generated: int
    delivered: int
    collided: int
    dropped: int
    queued: int
    qos_met: bool = True


@dataclass
class ClassStats:
    devices: int
    mean_delay: float
    max_delay: float
    mean_collision: float
    max_collision: float
    qos_met: bool


@dataclass
class PerfReport:
    devices: list[DeviceStats]
    classes: dict[str, ClassStats]
    sim_time: float
    lp_cycles: int
    mean_lp_cycle: float
    slots: int
    claims: list[int] = field(default_factory=list)

    def device(self, device_id: int) -> DeviceStats:
        for d in self.devices:
            if d.device_id == device_id:
                return d
        raise KeyError(device_id)

    @property
    def qos_met(self) -> bool:
        return all(c.qos_met for c in self.classes.values())

    def summary(self) -> dict:
        return {
            "sim_time": self.sim_time,
            "lp_cycles": self.lp_cycles,
            "mean_lp_cycle": self.mean_lp_cycle,
            "slots": self.slots,
            "claims": list(self.claims),
            "qos_met": self.qos_met,
            "classes": {k: asdict(v) for k, v in self.classes.items()},
        }


def build_cells(assignment: Assignment, params: ProtocolParams,
                index: dict[int, int]) -> tuple[np.ndarray, np.ndarray]:
    table = ownership_table(assignment, params)
    ptr = np.zeros(params.r_l * params.n_m + 1, dtype=np.int64)
    devs: list[int] = []
    for pos in range(1, params.r_l + 1):
        for m in range(1, params.n_m + 1):
            members = sorted(table.get((pos, m), []))
            devs.extend(index[d] for d in members)
            ptr[(pos - 1) * params.n_m + m] = len(devs)
    return ptr, np.asarray(devs, dtype=np.int64)


def _arrival_ticks(profiles, horizon, options):
    parts = [np.round(device_arrivals(p, horizon, options.seed, options.random_phase)
                      * TICKS_PER_SECOND).astype(np.int64) for p in profiles]
    off = np.zeros(len(parts) + 1, dtype=np.int64)
    off[1:] = np.cumsum([len(x) for x in parts])
    arr = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    return arr, off


def simulate(
    profiles: Sequence[DeviceProfile],
    params: ProtocolParams,
    assignment: Assignment,
    options: SimOptions = SimOptions(),
    qos: QosSpec | None = None,
) -> PerfReport:
    profiles = list(profiles)
    index = {p.id: i for i, p in enumerate(profiles)}
    cell_ptr, cell_dev = build_cells(assignment, params, index)
    if options.frames is not None:
        horizon = options.frames * params.r_l * params.slot_full
        max_cycles = int(options.frames)
    else:
        horizon = options.duration
        max_cycles = -1
    arr, off = _arrival_ticks(profiles, horizon, options)
    n = len(profiles)
    ptr = np.zeros(n, dtype=np.int64)
    outcome = np.zeros(arr.size, dtype=np.int8)
    delay_sum = np.zeros(n, dtype=np.int64)
    delay_max = np.zeros(n, dtype=np.int64)
    claims = np.zeros(params.n_m + 1, dtype=np.int64)
    warmup = to_ticks(options.warmup_seconds)
    end, cycles, cycle_sum, _, n_slots = _kernels.run_slots(
        params.n_m, params.r_l, cell_ptr, cell_dev, arr, off,
        np.int64(to_ticks(params.t_m)), np.int64(to_ticks(params.t_x)),
        options.synccs, options.buffer, np.int64(to_ticks(horizon)),
        max_cycles, np.int64(warmup),
        ptr, outcome, delay_sum, delay_max, claims,
    )
    end = int(end)

    stats = []
    for i, p in enumerate(profiles):
        a = arr[off[i]:off[i + 1]]
        oc = outcome[off[i]:off[i + 1]].copy()
        if not options.buffer:
            # the held packet stays queued, later arrivals overflow
            pending = np.flatnonzero((oc == 0) & (a < end))
            oc[pending[1:]] = 3
        window = (a >= warmup) & (a < end)
        counts = np.bincount(oc[window], minlength=4)
        dv, cl = int(counts[1]), int(counts[2])
        tx = dv + cl
        stats.append(DeviceStats(
            device_id=p.id,
            cls=p.cls,
            mean_delay=delay_sum[i] / dv / TICKS_PER_SECOND if dv else math.nan,
            max_delay=delay_max[i] / TICKS_PER_SECOND if dv else math.nan,
            collision_prob=cl / tx if tx else 0.0,
            generated=int(window.sum()),
            delivered=dv,
            collided=cl,
            dropped=int(counts[3]),
            queued=int(counts[0]),
        ))
    classes = aggregate(stats, qos)
    return PerfReport(
        devices=stats,
        classes=classes,
        sim_time=end / TICKS_PER_SECOND,
        lp_cycles=int(cycles),
        mean_lp_cycle=(cycle_sum / cycles / TICKS_PER_SECOND) if cycles else math.nan,
        slots=int(n_slots),
        claims=[int(c) for c in claims],
    )


def aggregate(stats: list[DeviceStats], qos: QosSpec | None) -> dict[str, ClassStats]:
    out = {}
    for cls in PriorityClass:
        rows = [s for s in stats if s.cls == cls]
        if qos is not None:
            for s in rows:
                delay_ok = s.mean_delay <= qos.delay_of(cls) if s.delivered else s.generated == 0
                s.qos_met = bool(delay_ok and s.collision_prob <= qos.collision_of(cls))
        if not rows:
            out[cls.name] = ClassStats(0, 0.0, 0.0, 0.0, 0.0, True)
            continue
        delays = np.array([s.mean_delay for s in rows if s.delivered])
        colls = np.array([s.collision_prob for s in rows])
        out[cls.name] = ClassStats(
            devices=len(rows),
            mean_delay=float(delays.mean()) if delays.size else 0.0,
            max_delay=float(delays.max()) if delays.size else 0.0,
            mean_collision=float(colls.mean()),
            max_collision=float(colls.max()),
            qos_met=all(s.qos_met for s in rows),
        )
    return out
