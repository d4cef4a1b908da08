from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from mtcsched.core import PriorityClass, validate_scenario
from mtcsched.figures import (
    FIG4A,
    FIG4B,
    FIG5A,
    FIG6,
    FIGURES,
    SMSA_DEFAULT,
    PopulationSpec,
    SlotSettings,
    Table,
    analytic_minislot_delays,
    draw_rates,
    generate_population,
    minislot_delays,
    replicate,
    replicate_fig2,
    single_slot_scenario,
)


def test_table_helpers():
    t = Table(["a", "b"], [(1, 0.5), (2, 0.25), (1, 1.0)])
    assert t.column("b") == [0.5, 0.25, 1.0]
    assert t.where(a=1).column("b") == [0.5, 1.0]
    assert t.to_csv().splitlines() == ["a,b", "1,0.5", "2,0.25", "1,1.0"]


def test_presets():
    assert FIG4A.t_m == 7e-6 and FIG4A.per_minislot == 7
    assert FIG4B.slots == 5 and FIG4B.rate_range == (1.0, 5.0)
    assert SMSA_DEFAULT.n_m * SMSA_DEFAULT.per_minislot == 70
    assert (FIG5A.params.n_m, FIG5A.params.r_r, FIG5A.params.r_l) == (8, 45, 270)
    assert FIG6.population.counts == (350, 0, 0)
    assert set(FIGURES) == {f"fig{k}" for k in ("2a", "2b", "3a", "3b", "4a", "4b", "5a", "5b", "6")}


def test_draws_are_sorted_and_seeded():
    s = SlotSettings()
    a, b = draw_rates(s, 3), draw_rates(s, 3)
    assert np.array_equal(a, b) and np.all(np.diff(a) >= 0)
    assert a.min() >= 0.2 and a.max() <= 1.0
    assert not np.array_equal(a, draw_rates(s, 4))


def test_single_slot_layout():
    s = SlotSettings(per_minislot=7)
    profs, params, a = single_slot_scenario(draw_rates(s, 0), s)
    assert len(profs) == 70
    assert {a.anchors[p.id][0] for p in profs} == {1}
    assert [a.anchors[p.id][1] for p in profs[:8]] == [1] * 7 + [2]
    assert all(p.cls == PriorityClass.LP for p in profs)


def test_generated_population():
    profs = generate_population(PopulationSpec(), 0)
    counts = [sum(p.cls == c for p in profs) for c in PriorityClass]
    assert counts == [50, 450, 500]
    assert sum(p.pattern == "poisson" for p in profs) == 500
    assert validate_scenario(profs, FIG5A.params, FIG5A.qos).ok
    assert [p.rate for p in profs] == [p.rate for p in generate_population(PopulationSpec(), 0)]


def test_analytic_delays_increase():
    s = SlotSettings()
    d = analytic_minislot_delays(draw_rates(s, 0), s)
    assert d.shape == (10,)
    assert np.all(np.diff(d) > 0)


def test_small_fig2_shape():
    s = SlotSettings(frames=300, repeats=2)
    t = replicate_fig2(s)
    assert len(t.rows) == 30
    assert set(t.column("mode")) == {"mscs_nobuffer", "mscs_buffer", "mscs_synccs_buffer"}


def test_minislot_delays_shape_and_spread():
    s = replace(SMSA_DEFAULT, frames=300, repeats=2)
    d = minislot_delays(s)
    assert d.shape == (10, 7)
    assert np.all(np.isfinite(d))


def test_unknown_figure():
    with pytest.raises(KeyError):
        replicate("fig9")
