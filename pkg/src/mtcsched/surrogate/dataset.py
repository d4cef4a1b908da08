"""Training data: sampled populations x parameter settings -> 13 performance labels."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..analytic import OverloadError
from ..assigner import PerfEstimates, overall_assign
from ..core import (
    POISSON,
    QUASI_PERIODIC,
    Assignment,
    DeviceProfile,
    PriorityClass,
    ProtocolParams,
    QosSpec,
)
from ..simulator import PerfReport, SimOptions, simulate
from .encoding import DEFAULT_INTERVALS, encode_profile, feature_names, feature_row

STATS = ("max_delay", "mean_delay", "max_collision", "mean_collision")
LABEL_NAMES = [f"{c.name.lower()}_{s}" for c in PriorityClass for s in STATS] + ["infeasible"]


@dataclass(frozen=True)
class ScenarioSampler:
    """Random mixed-class populations.

    Each population draws its own rate sub-interval inside ``rate_range`` (at
    least ``min_span`` wide) so that the rate histograms differ between draws.
    """

    devices: tuple[int, int] = (200, 1400)
    hp_share: tuple[float, float] = (0.02, 0.10)
    rp_share: tuple[float, float] = (0.2, 0.5)
    rate_range: tuple[float, float] = (1.0, 5.0)
    min_span: float = 0.5
    poisson_share: float = 0.5
    jitter: float = 0.05

    def sample(self, seed) -> list[DeviceProfile]:
        rng = np.random.default_rng(seed)
        n = int(rng.integers(self.devices[0], self.devices[1] + 1))
        n_h = int(round(n * rng.uniform(*self.hp_share)))
        n_r = int(round(n * rng.uniform(*self.rp_share)))
        counts = (n_h, n_r, n - n_h - n_r)
        lo_all, hi_all = self.rate_range
        span = rng.uniform(min(self.min_span, hi_all - lo_all), hi_all - lo_all)
        lo = rng.uniform(lo_all, hi_all - span)
        rates = rng.uniform(lo, lo + span, n)
        cls = np.repeat([0, 1, 2], counts)
        poisson = rng.random(n) < self.poisson_share
        return [
            DeviceProfile(i + 1, PriorityClass(int(cls[i])), float(rates[i]),
                          POISSON if poisson[i] else QUASI_PERIODIC,
                          0.0 if poisson[i] else self.jitter)
            for i in range(n)
        ]

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


DEFAULT_GRID = tuple(ProtocolParams(n_m, 5, r_r, 270) for n_m in (6, 8, 10) for r_r in (45, 90))


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str]
    label_names: list[str] = field(default_factory=lambda: list(LABEL_NAMES))
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.features)


def labels_from_report(report: PerfReport) -> np.ndarray:
    out = []
    for c in PriorityClass:
        s = report.classes[c.name]
        out += [s.max_delay, s.mean_delay, s.max_collision, s.mean_collision]
    return np.asarray(out + [0.0])


def labels_from_estimates(profiles: Sequence[DeviceProfile], assignment: Assignment | None,
                          est: PerfEstimates | None) -> np.ndarray:
    """Labels for a failed attempt: whatever the assigner committed, zeros elsewhere."""
    out = []
    for c in PriorityClass:
        d, q = [], []
        if assignment is not None and est is not None:
            for p in profiles:
                if p.cls == c and assignment.anchors.get(p.id) is not None:
                    d.append(est.delay[p.id])
                    q.append(est.collision_final[p.id])
        if d:
            out += [max(d), float(np.mean(d)), max(q), float(np.mean(q))]
        else:
            out += [0.0, 0.0, 0.0, 0.0]
    return np.asarray(out + [1.0])


def evaluate_entry(profiles, params: ProtocolParams, qos: QosSpec, duration: float,
                   sims: int, seed: int) -> np.ndarray:
    try:
        assignment, est = overall_assign(profiles, params, qos)
    except OverloadError:
        return labels_from_estimates(profiles, None, None)
    if not assignment.success:
        return labels_from_estimates(profiles, assignment, est)
    rows = [labels_from_report(simulate(profiles, params, assignment,
                                        SimOptions(duration=duration, seed=seed + k, random_phase=True),
                                        qos))
            for k in range(sims)]
    return np.mean(rows, axis=0)


def _profile_block(args):
    sampler, grid, qos, duration, sims, seed, k, intervals, rate_range = args
    profiles = sampler.sample([seed, k])
    enc = encode_profile(profiles, intervals, *rate_range)
    feats, labs = [], []
    for j, params in enumerate(grid):
        feats.append(feature_row(enc, params))
        labs.append(evaluate_entry(profiles, params, qos, duration, sims,
                                   seed=int(np.random.SeedSequence([seed, k, j]).generate_state(1)[0])))
    return np.asarray(feats), np.asarray(labs)


def generate_dataset(sampler: ScenarioSampler, grid: Sequence[ProtocolParams], n_profiles: int,
                     qos: QosSpec, sims_per_entry: int = 1, duration: float = 20.0,
                     seed: int = 0, intervals: int = DEFAULT_INTERVALS, workers: int = 1,
                     progress=None) -> Dataset:
    """One entry per (profile, parameter setting); results come back in input order."""
    if not grid:
        raise ValueError("parameter grid is empty")
    jobs = [(sampler, tuple(grid), qos, duration, sims_per_entry, seed, k, intervals,
             sampler.rate_range) for k in range(n_profiles)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            blocks = list(pool.map(_profile_block, jobs, chunksize=4))
    else:
        blocks = []
        for k, job in enumerate(jobs):
            blocks.append(_profile_block(job))
            if progress and (k + 1) % 50 == 0:
                progress(k + 1, n_profiles)
    feats = np.concatenate([b[0] for b in blocks]) if blocks else np.empty((0, 3 * intervals + 4))
    labs = np.concatenate([b[1] for b in blocks]) if blocks else np.empty((0, len(LABEL_NAMES)))
    meta = {
        "sampler": sampler.to_dict(),
        "grid": [[p.n_m, p.r_h, p.r_r, p.r_l] for p in grid],
        "qos": {"delta": list(qos.delta), "rho": list(qos.rho)},
        "n_profiles": n_profiles,
        "sims_per_entry": sims_per_entry,
        "duration": duration,
        "seed": seed,
        "intervals": intervals,
    }
    return Dataset(feats, labs, feature_names(intervals), list(LABEL_NAMES), meta)


def bit_fraction(ds: Dataset) -> float:
    return float(np.mean(ds.labels[:, -1])) if len(ds) else math.nan
