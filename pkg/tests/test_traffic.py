from __future__ import annotations

import numpy as np
import pytest

from mtcsched.core import DeviceProfile, PriorityClass, QUASI_PERIODIC
from mtcsched.traffic import (
    device_arrivals,
    gen_poisson,
    gen_quasi_periodic,
    read_streams,
    scenario_arrivals,
    write_streams,
)


def test_poisson_zero_rate():
    assert gen_poisson(0.0, 100.0, 1).size == 0


@pytest.mark.parametrize("seed", [0, 1, 2, 12345])
def test_poisson_count(seed):
    n = gen_poisson(3.0, 2000.0, seed).size
    assert 5768 <= n <= 6232


def test_poisson_deterministic_and_sorted():
    a = gen_poisson(3.0, 100.0, 9)
    b = gen_poisson(3.0, 100.0, 9)
    assert a.tobytes() == b.tobytes()
    assert np.all(np.diff(a) > 0)
    assert a.min() >= 0 and a.max() < 100.0


def test_poisson_mean_gap():
    t = gen_poisson(2.0, 60000.0, 3)
    assert t.size > 100_000
    assert np.mean(np.diff(t)) == pytest.approx(0.5, rel=0.02)


def test_periodic_no_jitter():
    np.testing.assert_allclose(gen_quasi_periodic(2.0, 0.0, 2.0, 0), [0.5, 1.0, 1.5])


def test_periodic_jitter_gaps():
    t = gen_quasi_periodic(1.0, 0.05, 5000.0, 4)
    gaps = np.diff(t)
    assert gaps.min() >= 0.90 - 1e-12 and gaps.max() <= 1.10 + 1e-12


@pytest.mark.parametrize("seed", [0, 5])
def test_periodic_count(seed):
    assert abs(gen_quasi_periodic(5.0, 0.05, 2000.0, seed).size - 10000) <= 1


def test_periodic_random_phase_within_horizon():
    t = gen_quasi_periodic(5.0, 0.05, 100.0, 1, random_phase=True)
    assert t.min() >= 0 and t.max() < 100.0
    assert abs(t.size - 500) <= 1


def test_periodic_bad_jitter():
    with pytest.raises(ValueError):
        gen_quasi_periodic(1.0, 0.5, 10.0, 0)


def test_adding_device_keeps_streams():
    a = [DeviceProfile(1, PriorityClass.HP, 2.0), DeviceProfile(2, PriorityClass.LP, 3.0, QUASI_PERIODIC, 0.05)]
    b = a + [DeviceProfile(3, PriorityClass.RP, 1.0)]
    sa = scenario_arrivals(a, 50.0, 7)
    sb = scenario_arrivals(b, 50.0, 7)
    for x, y in zip(sa, sb):
        assert x.times.tobytes() == y.times.tobytes()
    assert device_arrivals(a[0], 50.0, 8).tobytes() != sa[0].times.tobytes()


def test_stream_csv_round_trip(tmp_path):
    profs = [DeviceProfile(1, PriorityClass.HP, 2.0), DeviceProfile(2, PriorityClass.LP, 3.0)]
    s = scenario_arrivals(profs, 20.0, 1)
    write_streams(s, tmp_path / "a.csv")
    back = read_streams(tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text().startswith("device_id,timestamp\n")
    for x, y in zip(s, back):
        assert x.device == y.device
        assert x.times.tobytes() == y.times.tobytes()
