"""Greedy slot/mini-slot assignment per priority class, plus an exhaustive oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analytic import (
    CycleLengths,
    adf_estimate,
    collision_after_add,
    derive_cycles,
    overall_delay,
)
from .core import (
    Assignment,
    DeviceProfile,
    MiniSlotState,
    PriorityClass,
    ProtocolParams,
    QosSpec,
    class_members,
    owned_slots,
)
from .analytic import state_after_add

_EPS = 1e-12


class CapExceeded(ValueError):
    pass


@dataclass
class PerfEstimates:
    """Per-device estimates recorded when each device was committed."""

    cycles: CycleLengths | None
    delay: dict[int, float] = field(default_factory=dict)
    collision_commit: dict[int, float] = field(default_factory=dict)
    collision_final: dict[int, float] = field(default_factory=dict)


@dataclass
class SlotBoard:
    """Cursor state for every slot of an LP cycle (0-based slot index)."""

    n_m: int
    cursor: np.ndarray
    gamma: np.ndarray
    tau: np.ndarray
    q: np.ndarray
    lam: np.ndarray
    occ_rate: np.ndarray
    occ_count: np.ndarray
    cell_q: dict[tuple[int, int], float] = field(default_factory=dict)

    @classmethod
    def fresh(cls, n_slots: int, n_m: int) -> "SlotBoard":
        return cls(
            n_m=n_m,
            cursor=np.ones(n_slots, dtype=np.int64),
            gamma=np.zeros(n_slots),
            tau=np.ones(n_slots),
            q=np.zeros(n_slots),
            lam=np.zeros(n_slots),
            occ_rate=np.zeros(n_slots),
            occ_count=np.zeros(n_slots, dtype=np.int64),
        )

    def advance(self, slots: np.ndarray) -> None:
        self.cursor[slots] += 1
        self.tau[slots] = np.exp(self.gamma[slots])
        self.q[slots] = 0.0
        self.lam[slots] = 0.0
        self.occ_rate[slots] = 0.0
        self.occ_count[slots] = 0

    def replicate(self, base: int, upto: int) -> None:
        """Copy cursor, Γ and τ of slots [0, base) onto congruent slots [base, upto)."""
        src = np.arange(base, upto) % base
        dst = np.arange(base, upto)
        self.cursor[dst] = self.cursor[src]
        self.gamma[dst] = self.gamma[src]
        self.tau[dst] = self.tau[src]


@dataclass
class ClassPassResult:
    anchors: dict[int, tuple[int, int]]
    n_assigned: int
    fail_device: int | None = None
    collision_blocked: bool = False


def core_assign(
    devices: Sequence[DeviceProfile],
    pool: Sequence[int],
    board: SlotBoard,
    t_f: float,
    t_x: float,
    tau0: float,
    delta: float,
    rho: float,
    estimates: PerfEstimates | None = None,
    guard: float = 1.0,
) -> ClassPassResult:
    """Assign one class, in the given order, to the cursor mini-slots of ``pool``.

    ``pool`` holds 0-based slot indices; ``board`` is updated in place.
    """
    pool_arr = np.asarray(sorted(pool), dtype=np.int64)
    anchors: dict[int, tuple[int, int]] = {}
    n_m = board.n_m
    for dev in devices:
        lam = dev.rate
        while True:
            if pool_arr.size == 0:
                return ClassPassResult(anchors, len(anchors), collision_blocked=True)
            delays = (board.tau[pool_arr] - 1.0) * t_f + t_x + tau0
            if delays.min() > delta:
                return ClassPassResult(anchors, len(anchors), fail_device=dev.id)
            feasible = pool_arr[delays <= delta]
            first = board.occ_count[feasible] == 0
            qbar = np.where(first, 0.0, 1.0 - (1.0 - board.q[feasible]) * (1.0 - t_f * lam))
            np.clip(qbar, 0.0, 1.0, out=qbar)
            k = int(np.argmin(qbar))
            if guard * qbar[k] > rho:
                open_slots = feasible[board.cursor[feasible] < n_m]
                if open_slots.size == 0:
                    return ClassPassResult(anchors, len(anchors), collision_blocked=True)
                pool_arr = open_slots
                board.advance(pool_arr)
                continue
            slot = int(feasible[k])
            mini = int(board.cursor[slot])
            anchors[dev.id] = (slot + 1, mini)
            state = MiniSlotState(
                q_c=float(board.q[slot]),
                lambda_agg=float(board.lam[slot]),
                gamma=float(board.gamma[slot]),
                tau=float(board.tau[slot]),
                occupants=[0] * int(board.occ_count[slot]),
                occupant_rate_sum=float(board.occ_rate[slot]),
            )
            new, _ = state_after_add(state, lam, t_f, dev.id)
            board.q[slot] = float(qbar[k])
            board.lam[slot] = new.lambda_agg
            board.gamma[slot] = new.gamma
            board.occ_rate[slot] = new.occupant_rate_sum
            board.occ_count[slot] += 1
            board.cell_q[(slot + 1, mini)] = float(qbar[k])
            if estimates is not None:
                estimates.delay[dev.id] = float(delays[pool_arr == slot][0])
                estimates.collision_commit[dev.id] = float(qbar[k])
            break
    return ClassPassResult(anchors, len(anchors))


def sort_by_rate(devices: Sequence[DeviceProfile]) -> list[DeviceProfile]:
    return sorted(devices, key=lambda d: (d.rate, d.id))


def overall_assign(
    profiles: Sequence[DeviceProfile],
    params: ProtocolParams,
    qos: QosSpec,
    guard: float = 1.0,
) -> tuple[Assignment, PerfEstimates]:
    """Run the HP, RP and LP passes in turn, extending the slot pool between them.

    Raises ``OverloadError`` when the aggregate load leaves no idle channel time.
    """
    cycles = derive_cycles(params, [p.rate for p in profiles])
    members = class_members(profiles)
    est = PerfEstimates(cycles=cycles)
    classes = {p.id: p.cls for p in profiles}
    anchors: dict[int, tuple[int, int] | None] = {p.id: None for p in profiles}
    assignment = Assignment(anchors=anchors, classes=classes)
    board = SlotBoard.fresh(params.r_l, params.n_m)

    prev_cycle = None
    for cls in PriorityClass:
        r = params.cycle_of(cls)
        if prev_cycle is None:
            pool = np.arange(r)
        else:
            # step past mini-slots the previous class holds; empty cursors stay put
            held = np.resize(board.occ_count[:prev_cycle] > 0, r)
            board.replicate(prev_cycle, r)
            board.advance(np.flatnonzero(held))
            pool = np.flatnonzero(board.cursor[:r] <= params.n_m)
        devices = sort_by_rate(members[cls])
        res = core_assign(
            devices, pool, board,
            t_f=cycles.frame(cls), t_x=params.t_x, tau0=cycles.tau0(cls),
            delta=qos.delay_of(cls), rho=qos.collision_of(cls),
            estimates=est, guard=guard,
        )
        anchors.update(res.anchors)
        assignment.n_assigned += res.n_assigned
        if res.n_assigned < len(devices):
            assignment.fail_device = res.fail_device
            assignment.collision_blocked = res.collision_blocked
            break
        prev_cycle = r

    assignment.success = assignment.n_assigned == len(profiles)
    for dev, anchor in anchors.items():
        if anchor is not None:
            est.collision_final[dev] = board.cell_q[anchor]
    return assignment, est


# -- exhaustive oracle -------------------------------------------------------

BRUTE_CAPS = {"devices": 8, "n_m": 3, "r_l": 4}


def evaluate_assignment(
    profiles: Sequence[DeviceProfile],
    params: ProtocolParams,
    qos: QosSpec,
    anchors: dict[int, tuple[int, int] | None],
    cycles: CycleLengths | None = None,
    guard: float = 1.0,
) -> tuple[bool, dict[int, float], dict[int, float]]:
    """Score a complete assignment with the same estimators the greedy uses.

    Returns (feasible, delay estimate per device, collision estimate per device).
    Replicated ownership is expanded and each device takes its worst replica.
    """
    if cycles is None:
        cycles = derive_cycles(params, [p.rate for p in profiles])
    by_id = {p.id: p for p in profiles}
    if any(anchors.get(p.id) is None for p in profiles):
        return False, {}, {}
    cells: dict[int, dict[int, list[DeviceProfile]]] = {}
    for dev, (slot, mini) in anchors.items():
        p = by_id[dev]
        for pos in owned_slots(p.cls, slot, params):
            cells.setdefault(pos, {}).setdefault(mini, []).append(p)
    delay: dict[int, float] = {}
    coll: dict[int, float] = {}
    for pos, minis in cells.items():
        gamma = 0.0
        for m in sorted(minis):
            occ = sort_by_rate(minis[m])
            if len({d.cls for d in occ}) > 1:
                return False, {}, {}
            cls = occ[0].cls
            t_f = cycles.frame(cls)
            tau = adf_estimate(gamma)
            state = MiniSlotState(gamma=gamma, tau=tau)
            for d in occ:
                state, _ = state_after_add(state, d.rate, t_f, d.id)
            gamma = state.gamma
            d_est = overall_delay(tau, t_f, params.t_x, cycles.tau0(cls))
            for d in occ:
                delay[d.id] = max(delay.get(d.id, 0.0), d_est)
                coll[d.id] = max(coll.get(d.id, 0.0), state.q_c)
    ok = all(
        delay[p.id] <= qos.delay_of(p.cls) + _EPS
        and guard * coll[p.id] <= qos.collision_of(p.cls) + _EPS
        for p in profiles
    )
    return ok, delay, coll


def brute_force_assign(
    profiles: Sequence[DeviceProfile],
    params: ProtocolParams,
    qos: QosSpec,
    caps: dict[str, int] | None = None,
    guard: float = 1.0,
) -> Assignment | None:
    """Depth-first search over every class-respecting assignment.

    Returns the first assignment meeting every threshold, or ``None`` when the
    capped instance is infeasible under the estimators.
    """
    caps = {**BRUTE_CAPS, **(caps or {})}
    if len(profiles) > caps["devices"] or params.n_m > caps["n_m"] or params.r_l > caps["r_l"]:
        raise CapExceeded(
            f"instance (D={len(profiles)}, n_m={params.n_m}, r_l={params.r_l}) exceeds {caps}")
    classes = {p.id: p.cls for p in profiles}
    if not profiles:
        return Assignment(anchors={}, classes={}, success=True)
    cycles = derive_cycles(params, [p.rate for p in profiles])
    for p in profiles:
        # tau >= 1, so this bound holds for every mini-slot
        if params.t_x + cycles.tau0(p.cls) > qos.delay_of(p.cls) + _EPS:
            return None

    order = sorted(profiles, key=lambda d: (int(d.cls), -d.rate, d.id))
    n_m = params.n_m
    cell_class: dict[tuple[int, int], PriorityClass] = {}
    cell_rates: dict[tuple[int, int], list[float]] = {}
    pos_load = [0] * (params.r_l + 1)
    anchors: dict[int, tuple[int, int] | None] = {}
    prunable = all(cycles.frame(p.cls) * p.rate <= 1 for p in profiles)
    parent = {PriorityClass.HP: 1, PriorityClass.RP: params.r_h, PriorityClass.LP: params.r_r}

    def cell_collision(rates: list[float], t_f: float) -> float:
        if len(rates) < 2:
            return 0.0
        rs = sorted(rates)
        prod = 1.0
        for r in rs[1:]:
            prod *= 1.0 - t_f * r
        return 1.0 - prod

    def dfs(k: int) -> bool:
        if k == len(order):
            ok, _, _ = evaluate_assignment(profiles, params, qos, anchors, cycles, guard)
            return ok
        dev = order[k]
        t_f = cycles.frame(dev.cls)
        rho = qos.collision_of(dev.cls)
        tried_empty: set[int] = set()
        for slot in range(1, params.cycle_of(dev.cls) + 1):
            positions = owned_slots(dev.cls, slot, params)
            if all(pos_load[p] == 0 for p in positions):
                key = (slot - 1) % parent[dev.cls]
                if key in tried_empty:
                    continue
                tried_empty.add(key)
            for mini in range(1, n_m + 1):
                cells = [(p, mini) for p in positions]
                if any(cell_class.get(c, dev.cls) != dev.cls for c in cells):
                    continue
                if prunable:
                    rates = cell_rates.get(cells[0], []) + [dev.rate]
                    if guard * cell_collision(rates, t_f) > rho + _EPS:
                        continue
                added = []
                for c in cells:
                    if c not in cell_class:
                        cell_class[c] = dev.cls
                        added.append(c)
                    cell_rates.setdefault(c, []).append(dev.rate)
                    pos_load[c[0]] += 1
                anchors[dev.id] = (slot, mini)
                if dfs(k + 1):
                    return True
                del anchors[dev.id]
                for c in cells:
                    cell_rates[c].pop()
                    pos_load[c[0]] -= 1
                for c in added:
                    del cell_class[c]
        return False

    if not dfs(0):
        return None
    return Assignment(anchors=dict(anchors), classes=classes, success=True,
                      n_assigned=len(profiles))


def estimate_table(assignment: Assignment, est: PerfEstimates) -> list[tuple]:
    rows = []
    for dev, cls, slot, mini in assignment.rows():
        rows.append((dev, cls, slot, mini,
                     est.delay.get(dev, math.nan), est.collision_final.get(dev, math.nan)))
    return rows
