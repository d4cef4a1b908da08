"""Closed-form estimators behind the device assignment.

The access-delay-in-frames estimate (``adf_estimate``) is a surrogate: the
number of packets waiting in the preceding mini-slots of a slot is treated as
Poisson with mean ``gamma``, so the slot is lost to an earlier mini-slot with
probability ``1 - exp(-gamma)`` per cycle and the wait is geometric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

from .core import MiniSlotState, PriorityClass, ProtocolParams, to_ticks


class OverloadError(ValueError):
    """Aggregate traffic fills the channel (sum(rate) * t_x >= 1)."""


class InvalidState(ValueError):
    pass


@dataclass(frozen=True)
class CycleLengths:
    t_f_h: float
    t_f_r: float
    t_f_l: float

    @property
    def tau0_h(self) -> float:
        return self.t_f_h / 2

    @property
    def tau0_r(self) -> float:
        return self.t_f_r / 2

    @property
    def tau0_l(self) -> float:
        return self.t_f_l / 2

    def frame(self, cls: PriorityClass) -> float:
        return (self.t_f_h, self.t_f_r, self.t_f_l)[int(cls)]

    def tau0(self, cls: PriorityClass) -> float:
        return self.frame(cls) / 2


def max_hp_cycle(delta_h: float, n_m: int, t_m: float, t_x: float) -> int:
    """Largest HP cycle (in slots) whose half-cycle wait fits in ``delta_h``."""
    # integer ticks keep the floor exact at the boundary
    slot = n_m * to_ticks(t_m) + to_ticks(t_x)
    return (2 * to_ticks(delta_h)) // slot


def lp_cycle_length(r_l: int, n_m: int, t_m: float, t_x: float, rates: Iterable[float]) -> float:
    load = math.fsum(rates) * t_x
    if load >= 1:
        raise OverloadError(f"offered load {load:.4f} >= 1")
    return r_l * n_m * t_m / (1 - load)


def derive_cycles(params: ProtocolParams, rates: Iterable[float]) -> CycleLengths:
    t_l = lp_cycle_length(params.r_l, params.n_m, params.t_m, params.t_x, rates)
    return CycleLengths(
        t_f_h=t_l * (params.r_h / params.r_l),
        t_f_r=t_l * (params.r_r / params.r_l),
        t_f_l=t_l,
    )


def fixed_frame_length(n_slots: int, params: ProtocolParams) -> float:
    """Frame length when idle slots are not truncated (no SyncCS)."""
    return n_slots * params.slot_full


def adf_estimate(gamma_preceding: float) -> float:
    if gamma_preceding < 0:
        raise ValueError("gamma must be non-negative")
    return math.exp(gamma_preceding)


def overall_delay(tau: float, t_f: float, t_x: float, tau0: float) -> float:
    return (tau - 1.0) * t_f + t_x + tau0


def collision_after_add(q_c_current: float, t_f: float, rate: float, first: bool = False) -> float:
    if first:
        return 0.0
    q = 1.0 - (1.0 - q_c_current) * (1.0 - t_f * rate)
    return min(max(q, 0.0), 1.0)


def state_after_add(state: MiniSlotState, rate: float, t_f: float,
                    device: int = 0) -> tuple[MiniSlotState, float]:
    """Commit one device to the mini-slot described by ``state``.

    Returns the updated state and the device's expected number of
    simultaneous transmitters ``n_c``.
    """
    occupants = [*state.occupants, device]
    if not state.occupants:
        return replace(
            state,
            q_c=0.0,
            lambda_agg=rate,
            gamma=state.gamma + t_f * rate,
            occupants=occupants,
            occupant_rate_sum=rate,
        ), 1.0
    q_new = collision_after_add(state.q_c, t_f, rate)
    n_c = 1.0 + state.tau * t_f * state.occupant_rate_sum
    if n_c < 1:
        raise InvalidState(f"n_c={n_c} < 1")
    share = 1.0 - q_new / n_c
    return replace(
        state,
        q_c=q_new,
        lambda_agg=state.lambda_agg + rate * share,
        gamma=state.gamma + t_f * rate * share,
        occupants=occupants,
        occupant_rate_sum=state.occupant_rate_sum + rate,
    ), n_c
