"""Per-device packet arrival streams (Poisson and jittered periodic)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import POISSON, DeviceProfile


@dataclass(frozen=True)
class ArrivalStream:
    device: int
    times: np.ndarray

    def __len__(self) -> int:
        return len(self.times)


def device_seed(scenario_seed: int, device_id: int) -> np.random.SeedSequence:
    # keyed on (scenario, device) so adding devices leaves existing streams untouched
    return np.random.SeedSequence([int(scenario_seed) & (2**64 - 1), int(device_id)])


def gen_poisson(rate: float, duration: float, seed) -> np.ndarray:
    if rate < 0 or duration <= 0:
        raise ValueError("need rate >= 0 and duration > 0")
    if rate == 0:
        return np.empty(0)
    rng = np.random.default_rng(seed)
    expected = rate * duration
    chunk = int(expected + 6 * np.sqrt(expected) + 16)
    parts = []
    t = 0.0
    while t < duration:
        gaps = rng.exponential(1.0 / rate, size=chunk)
        times = t + np.cumsum(gaps)
        parts.append(times)
        t = times[-1]
    times = np.concatenate(parts)
    return times[times < duration]


def gen_quasi_periodic(rate: float, jitter: float, duration: float, seed,
                       random_phase: bool = False) -> np.ndarray:
    """k-th arrival at (k + u_k - phase)/rate with u_k ~ U[-jitter, jitter]."""
    if not 0 <= jitter < 0.5:
        raise ValueError("jitter fraction must lie in [0, 0.5)")
    if rate <= 0 or duration <= 0:
        raise ValueError("need rate > 0 and duration > 0")
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0.0, 1.0) if random_phase else 0.0
    n = int(np.floor(duration * rate + phase + jitter)) + 1
    k = np.arange(1, n + 1, dtype=float)
    u = rng.uniform(-jitter, jitter, size=n) if jitter > 0 else 0.0
    times = (k + u - phase) / rate
    times = np.sort(times)
    return times[(times >= 0) & (times < duration)]


def device_arrivals(profile: DeviceProfile, duration: float, scenario_seed: int,
                    random_phase: bool = False) -> np.ndarray:
    ss = device_seed(scenario_seed, profile.id)
    if profile.pattern == POISSON:
        return gen_poisson(profile.rate, duration, ss)
    return gen_quasi_periodic(profile.rate, profile.jitter, duration, ss, random_phase)


def scenario_arrivals(profiles: Sequence[DeviceProfile], duration: float, scenario_seed: int,
                      random_phase: bool = False) -> list[ArrivalStream]:
    return [ArrivalStream(p.id, device_arrivals(p, duration, scenario_seed, random_phase))
            for p in profiles]


def write_streams(streams: Iterable[ArrivalStream], path) -> None:
    with Path(path).open("w") as fh:
        fh.write("device_id,timestamp\n")
        for s in streams:
            for t in s.times:
                fh.write(f"{s.device},{float(t)!r}\n")


def read_streams(path) -> list[ArrivalStream]:
    rows: dict[int, list[float]] = {}
    with Path(path).open() as fh:
        next(fh)
        for line in fh:
            dev, ts = line.strip().split(",")
            rows.setdefault(int(dev), []).append(float(ts))
    return [ArrivalStream(d, np.asarray(v)) for d, v in sorted(rows.items())]
