"""Histogram encoding of a device population into a fixed-width feature row."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import DeviceProfile, PriorityClass, ProtocolParams

DEFAULT_INTERVALS = 16
PARAM_FEATURES = ("n_m", "r_h", "r_r", "r_l")


class RangeError(ValueError):
    pass


@dataclass(frozen=True)
class ProfileEncoding:
    c_h: np.ndarray
    c_r: np.ndarray
    c_l: np.ndarray
    lambda_min: float
    lambda_max: float

    @property
    def intervals(self) -> int:
        return len(self.c_h)

    def counts(self, cls: PriorityClass) -> np.ndarray:
        return (self.c_h, self.c_r, self.c_l)[int(cls)]


def encode_profile(profiles: Sequence[DeviceProfile], intervals: int = DEFAULT_INTERVALS,
                   lambda_min: float = 1.0, lambda_max: float = 5.0) -> ProfileEncoding:
    """Per-class device counts over equal-width rate bins; the last bin is closed."""
    if intervals < 1:
        raise ValueError("need at least one interval")
    if not lambda_max > lambda_min:
        raise ValueError("lambda_max must exceed lambda_min")
    width = (lambda_max - lambda_min) / intervals
    counts = np.zeros((3, intervals), dtype=np.int64)
    for p in profiles:
        if not lambda_min <= p.rate <= lambda_max:
            raise RangeError(f"device {p.id} rate {p.rate} outside [{lambda_min}, {lambda_max}]")
        k = min(int((p.rate - lambda_min) / width), intervals - 1)
        counts[int(p.cls), k] += 1
    return ProfileEncoding(counts[0], counts[1], counts[2], lambda_min, lambda_max)


def feature_row(enc: ProfileEncoding, params: ProtocolParams) -> np.ndarray:
    return np.concatenate([
        enc.c_h, enc.c_r, enc.c_l,
        [params.n_m, params.r_h, params.r_r, params.r_l],
    ]).astype(float)


def feature_names(intervals: int = DEFAULT_INTERVALS) -> list[str]:
    names = [f"c_{c}{k}" for c in "hrl" for k in range(1, intervals + 1)]
    return names + list(PARAM_FEATURES)
