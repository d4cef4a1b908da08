"""Rank candidate protocol parameters by the trained model's predictions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..assigner import overall_assign
from ..analytic import OverloadError
from ..core import DeviceProfile, PriorityClass, ProtocolParams, QosSpec, validate_params
from ..simulator import SimOptions, simulate
from .encoding import encode_profile, feature_row
from .network import Model


class NoFeasibleCandidate(RuntimeError):
    pass


@dataclass
class Candidate:
    params: ProtocolParams
    predicted: np.ndarray
    slack: float


def thresholds(qos: QosSpec) -> np.ndarray:
    """Per-label limits in label order (max/mean delay, max/mean collision per class)."""
    out = []
    for c in PriorityClass:
        d, r = qos.delay_of(c), qos.collision_of(c)
        out += [d, d, r, r]
    return np.asarray(out)


def select_params(profiles: Sequence[DeviceProfile], candidates: Sequence[ProtocolParams],
                  model: Model, qos: QosSpec, lambda_range: tuple[float, float] | None = None
                  ) -> list[Candidate]:
    """Feasible candidates, best first: largest worst-case relative slack, then smaller n_m."""
    valid = [p for p in candidates if not validate_params(p)]
    if not valid:
        raise NoFeasibleCandidate("no candidate passes parameter validation")
    intervals = (model.spec.n_inputs - 4) // 3
    lo, hi = lambda_range or tuple(model.manifest.get("rate_range", (1.0, 5.0)))
    enc = encode_profile(profiles, intervals, lo, hi)
    preds = model.predict(np.stack([feature_row(enc, p) for p in valid]))
    limit = thresholds(qos)
    kept = []
    for p, y in zip(valid, preds):
        if y[-1] >= 0.5:
            continue
        if np.any(y[:12] > limit):
            continue
        slack = float(np.min((limit - y[:12]) / limit))
        kept.append(Candidate(p, y, slack))
    if not kept:
        raise NoFeasibleCandidate(f"all {len(valid)} candidates predicted to miss QoS")
    kept.sort(key=lambda c: (-c.slack, c.params.n_m))
    return kept


def closed_loop_check(profiles: Sequence[DeviceProfile], params: ProtocolParams, qos: QosSpec,
                      duration: float = 20.0, seed: int = 0) -> bool:
    """Assign and simulate the chosen parameters; True if every device met its QoS."""
    try:
        assignment, _ = overall_assign(profiles, params, qos)
    except OverloadError:
        return False
    if not assignment.success:
        return False
    rep = simulate(profiles, params, assignment,
                   SimOptions(duration=duration, seed=seed, random_phase=True), qos)
    return rep.qos_met
