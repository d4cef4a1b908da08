"""Baked-in experiment presets and their plot-ready tables.

Every runner returns a :class:`Table` (header plus rows) that serializes to
comma-separated text. The single-slot presets put all devices into slot 1 of
a 100-slot frame and simulate a fixed number of frames; the end-to-end presets
generate a mixed-class population, run the assignment and simulate it.
"""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .analytic import adf_estimate, overall_delay, state_after_add
from .assigner import PerfEstimates, overall_assign
from .core import (
    POISSON,
    QUASI_PERIODIC,
    Assignment,
    DeviceProfile,
    MiniSlotState,
    PriorityClass,
    ProtocolParams,
    QosSpec,
)
from .simulator import PerfReport, SimOptions, simulate


@dataclass
class Table:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(x) for x in r])
        return buf.getvalue()

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def where(self, **match) -> "Table":
        idx = {self.columns.index(k): v for k, v in match.items()}
        return Table(list(self.columns), [r for r in self.rows if all(r[k] == v for k, v in idx.items())])


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


# ---------------------------------------------------------------- single slot

@dataclass(frozen=True)
class SlotSettings:
    """Settings for the single-slot mini-slot delay experiments."""

    n_m: int = 10
    slots: int = 100
    per_minislot: int = 1
    rate_range: tuple[float, float] = (0.2, 1.0)
    t_m: float = 9e-6
    t_x: float = 133e-6
    frames: int = 20000
    repeats: int = 16
    seed: int = 0
    buffer: bool = True
    synccs: bool = False


def draw_rates(settings: SlotSettings, draw: int) -> np.ndarray:
    lo, hi = settings.rate_range
    rng = np.random.default_rng([settings.seed, draw])
    return np.sort(rng.uniform(lo, hi, settings.n_m * settings.per_minislot))


def single_slot_scenario(rates: Sequence[float], settings: SlotSettings
                         ) -> tuple[list[DeviceProfile], ProtocolParams, Assignment]:
    """Poisson devices in slot 1, lower rates in earlier mini-slots."""
    rates = np.sort(np.asarray(rates, dtype=float))
    profs = [DeviceProfile(i + 1, PriorityClass.LP, float(x), POISSON) for i, x in enumerate(rates)]
    s = settings.slots
    params = ProtocolParams(settings.n_m, s, s, s, settings.t_m, settings.t_x)
    anchors = {p.id: (1, i // settings.per_minislot + 1) for i, p in enumerate(profs)}
    a = Assignment(anchors, {p.id: p.cls for p in profs}, True, len(profs))
    return profs, params, a


def _slot_run(settings: SlotSettings, rates, run_seed: int) -> PerfReport:
    profs, params, a = single_slot_scenario(rates, settings)
    opts = SimOptions(frames=settings.frames, seed=run_seed,
                      synccs=settings.synccs, buffer=settings.buffer)
    return simulate(profs, params, a, opts)


def minislot_delays(settings: SlotSettings, redraw_rates: bool = True) -> np.ndarray:
    """Per-device mean delay (s), shape (n_m, per_minislot), pooled over repeats.

    With ``redraw_rates`` every repeat draws fresh rates; otherwise the rates of
    draw 0 are reused and only the arrival streams change.
    """
    n = settings.n_m * settings.per_minislot
    total = np.zeros(n)
    count = np.zeros(n)
    for k in range(settings.repeats):
        rates = draw_rates(settings, k if redraw_rates else 0)
        rep = _slot_run(settings, rates, settings.seed * 100003 + k)
        for i, s in enumerate(rep.devices):
            if s.delivered:
                total[i] += s.mean_delay * s.delivered
                count[i] += s.delivered
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = total / count
    return mean.reshape(settings.n_m, settings.per_minislot)


FIG2_MODES = {
    "mscs_nobuffer": dict(synccs=False, buffer=False),
    "mscs_buffer": dict(synccs=False, buffer=True),
    "mscs_synccs_buffer": dict(synccs=True, buffer=True),
}


def replicate_fig2(settings: SlotSettings = SlotSettings()) -> Table:
    """Mean delay per mini-slot for the three sensing/buffer configurations."""
    table = Table(["mode", "mini_slot", "mean_delay_ms"])
    for mode, kw in FIG2_MODES.items():
        d = minislot_delays(replace(settings, per_minislot=1, **kw))[:, 0]
        for m, v in enumerate(d, start=1):
            table.rows.append((mode, m, v * 1e3))
    return table


def analytic_minislot_delays(rates: np.ndarray, settings: SlotSettings) -> np.ndarray:
    """Estimator delay per mini-slot for a fixed (not truncated) frame."""
    t_f = settings.slots * (settings.n_m * settings.t_m + settings.t_x)
    gamma = 0.0
    out = []
    for group in np.asarray(rates).reshape(settings.n_m, -1):
        tau = adf_estimate(gamma)
        st = MiniSlotState(gamma=gamma, tau=tau)
        for r in np.sort(group):
            st, _ = state_after_add(st, float(r), t_f)
        gamma = st.gamma
        out.append(overall_delay(tau, t_f, settings.t_x, t_f / 2))
    return np.asarray(out)


SMSA_DEFAULT = SlotSettings(per_minislot=7, repeats=60)


def replicate_smsa(settings: SlotSettings = SMSA_DEFAULT) -> Table:
    """Per-device delay with several devices sharing each mini-slot."""
    rates = draw_rates(settings, 0)
    d = minislot_delays(settings, redraw_rates=False)
    est = analytic_minislot_delays(rates, settings)
    table = Table(["mini_slot", "device", "rate", "mean_delay_ms", "analytic_ms"])
    per = settings.per_minislot
    for m in range(settings.n_m):
        for j in range(per):
            table.rows.append((m + 1, m * per + j + 1, float(rates[m * per + j]),
                               d[m, j] * 1e3, est[m] * 1e3))
    return table


def smsa_spread(table: Table) -> dict[int, float]:
    """Max relative spread of device delays within each mini-slot."""
    out: dict[int, list[float]] = {}
    for m, d in zip(table.column("mini_slot"), table.column("mean_delay_ms")):
        out.setdefault(m, []).append(d)
    return {m: (max(v) - min(v)) / min(v) for m, v in out.items()}


FIG4A = replace(SMSA_DEFAULT, t_m=7e-6)
FIG4B = replace(SMSA_DEFAULT, slots=5, rate_range=(1.0, 5.0))


# ----------------------------------------------------------------- end to end

@dataclass(frozen=True)
class PopulationSpec:
    counts: tuple[int, int, int] = (50, 450, 500)
    rate_range: tuple[float, float] = (1.0, 5.0)
    poisson_share: float = 0.5
    jitter: float = 0.05


def generate_population(spec: PopulationSpec, seed: int) -> list[DeviceProfile]:
    """Class blocks in HP, RP, LP order; a random subset is Poisson."""
    rng = np.random.default_rng([seed, 7])
    total = sum(spec.counts)
    cls = np.repeat([0, 1, 2], spec.counts)
    rates = rng.uniform(*spec.rate_range, total)
    poisson = np.zeros(total, dtype=bool)
    poisson[rng.permutation(total)[: int(round(total * spec.poisson_share))]] = True
    return [
        DeviceProfile(
            i + 1, PriorityClass(int(cls[i])), float(rates[i]),
            POISSON if poisson[i] else QUASI_PERIODIC,
            0.0 if poisson[i] else spec.jitter,
        )
        for i in range(total)
    ]


@dataclass(frozen=True)
class EndToEndPreset:
    population: PopulationSpec
    params: ProtocolParams
    qos: QosSpec
    duration: float = 2000.0
    seed: int = 0


MIXED_QOS = QosSpec((1e-3, 10e-3, 80e-3), (0.015, 0.06, 0.10))

FIG5A = EndToEndPreset(PopulationSpec(), ProtocolParams(8, 5, 45, 270), MIXED_QOS)
FIG5B = replace(FIG5A, params=ProtocolParams(8, 5, 35, 140))
FIG6 = EndToEndPreset(PopulationSpec(counts=(350, 0, 0)), ProtocolParams(4, 6, 6, 6), MIXED_QOS)


@dataclass
class EndToEndResult:
    profiles: list[DeviceProfile]
    assignment: Assignment
    estimates: PerfEstimates
    report: PerfReport | None

    def table(self) -> Table:
        t = Table(["device_id", "class", "slot", "mini_slot", "rate",
                   "est_delay_ms", "est_collision", "mean_delay_ms", "collision_prob"])
        for p in self.profiles:
            anchor = self.assignment.anchors.get(p.id) or (0, 0)
            s = self.report.device(p.id) if self.report else None
            t.rows.append((
                p.id, p.cls.name, anchor[0], anchor[1], p.rate,
                self.estimates.delay.get(p.id, float("nan")) * 1e3,
                self.estimates.collision_final.get(p.id, float("nan")),
                s.mean_delay * 1e3 if s else float("nan"),
                s.collision_prob if s else float("nan"),
            ))
        return t


def run_end_to_end(preset: EndToEndPreset, simulate_run: bool = True) -> EndToEndResult:
    profiles = generate_population(preset.population, preset.seed)
    assignment, est = overall_assign(profiles, preset.params, preset.qos)
    report = None
    if simulate_run and assignment.success:
        opts = SimOptions(duration=preset.duration, seed=preset.seed, random_phase=True)
        report = simulate(profiles, preset.params, assignment, opts, preset.qos)
    return EndToEndResult(profiles, assignment, est, report)


def _slot_runner(settings: SlotSettings) -> Callable[[], Table]:
    return lambda: replicate_smsa(settings)


FIGURES: dict[str, Callable[[], Table]] = {
    "fig2a": lambda: replicate_fig2(SlotSettings(rate_range=(0.2, 1.0))),
    "fig2b": lambda: replicate_fig2(SlotSettings(rate_range=(1.0, 5.0))),
    "fig3a": _slot_runner(replace(SMSA_DEFAULT, buffer=False)),
    "fig3b": _slot_runner(SMSA_DEFAULT),
    "fig4a": _slot_runner(FIG4A),
    "fig4b": _slot_runner(FIG4B),
    "fig5a": lambda: run_end_to_end(FIG5A).table(),
    "fig5b": lambda: run_end_to_end(FIG5B).table(),
    "fig6": lambda: run_end_to_end(FIG6).table(),
}


def replicate(name: str) -> Table:
    try:
        runner = FIGURES[name]
    except KeyError:
        raise KeyError(f"unknown figure {name!r}; choose from {sorted(FIGURES)}") from None
    return runner()
