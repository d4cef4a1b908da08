"""Independent reference arithmetic for the estimator tests (exact rationals)."""

from __future__ import annotations

import math
from fractions import Fraction as F

US = F(1, 1_000_000)
MS = F(1, 1000)


def max_hp_cycle(delta_h, n_m, t_m, t_x) -> int:
    return math.floor(2 * F(delta_h) / (n_m * F(t_m) + F(t_x)))


def lp_cycle(r_l, n_m, t_m, t_x, total_rate) -> F:
    return r_l * n_m * F(t_m) / (1 - F(total_rate) * F(t_x))


def collision_add(q, t_f, lam) -> F:
    return 1 - (1 - F(q)) * (1 - F(t_f) * F(lam))


def shared_add(occupant_rates, tau, t_f, lam, q_prev=0):
    """(q, n_c, Λ increment, Γ increment) for a device joining an occupied mini-slot."""
    q = collision_add(q_prev, t_f, lam)
    n_c = 1 + F(tau) * F(t_f) * sum(F(r) for r in occupant_rates)
    share = 1 - q / n_c
    return q, n_c, F(lam) * share, F(t_f) * F(lam) * share


def overall_delay(tau, t_f, t_x, tau0) -> F:
    return (F(tau) - 1) * F(t_f) + F(t_x) + F(tau0)


def rel(a, b) -> float:
    a, b = float(a), float(b)
    return abs(a - b) / max(abs(b), 1e-300)
