from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randsplit.engine import SeedConfig, TimeDistribution, initial_frame, run_trajectory
from randsplit.lyapunov import (
    convergence_trace,
    default_burn_in,
    estimate_spectrum,
    estimate_sum,
    normal_log_factor,
)
from randsplit.models import EulerModel, LorenzModel

EXP = TimeDistribution("exp", 1.0)


class SingleShear(LorenzModel):
    """Lorenz sphere driven by its first field only: a pure differential rotation."""

    def __init__(self, n: int = 4):
        super().__init__(n)
        self.fields = self.fields[:1]
        self.kinds, self.idx, self.coef = self.kinds[:1], self.idx[:1], self.coef[:1]


def test_default_burn_in():
    assert default_burn_in(1_000_000) == 10_000
    assert default_burn_in(100_000) == 1000
    assert default_burn_in(5000) == 500


def test_zero_h_gives_zero_exponents():
    m = LorenzModel(4)
    est = estimate_spectrum(m, TimeDistribution("exp", 0.0), SeedConfig(0), 500, k=3, burn_in=0)
    assert np.all(est.exponents == 0.0)
    assert estimate_sum(m, TimeDistribution("exp", 0.0), SeedConfig(0), 100) == 0.0


def test_sum_equals_sum_of_exponents():
    m = LorenzModel(5)
    est = estimate_spectrum(m, EXP, SeedConfig(1), 2000, k=4, burn_in=0, batches=10)
    lam = estimate_sum(m, EXP, SeedConfig(1), 2000)
    assert est.lambda_sum == pytest.approx(lam, abs=1e-13)
    assert np.all(np.diff(est.exponents) <= 0)
    assert np.all(est.stderr >= 0)
    np.testing.assert_allclose(est.per_time, est.exponents / (1.0 * 5))


@settings(max_examples=10)
@given(st.integers(4, 8), st.floats(0.1, 2.0))
def test_lorenz_full_frame_volume(n, h):
    m = 300
    s = estimate_sum(LorenzModel(n), TimeDistribution("exp", h), SeedConfig(2), m, detail=True)
    assert abs(s.tangent_total) <= 1e-6 * m
    assert abs(s.ambient_total) <= 1e-6 * m


def test_euler_volume_ambient_and_tangent():
    model = EulerModel(3)
    m = 60
    s = estimate_sum(model, EXP, SeedConfig(0), m, detail=True)
    # the ambient log-determinant is volume preserving; the tangent frame sum
    # differs from it by a bounded boundary term from the conserved gradients
    assert abs(s.ambient_total) <= 1e-6 * m
    rec = run_trajectory(model, EXP, SeedConfig(0), m, k=model.tangent_dimension)
    boundary = normal_log_factor(model, rec.x_initial, rec.x_final)
    assert s.tangent_total == pytest.approx(-boundary, abs=1e-6 * m)


def test_trace_endpoint_equals_estimate():
    m = LorenzModel(4)
    tr = convergence_trace(m, EXP, SeedConfig(3), 20_000, 1000, k=2)
    np.testing.assert_allclose(tr.estimates[-1], tr.final.exponents, rtol=1e-12)
    assert tr.steps[-1] == 20_000 and np.all(tr.steps > tr.burn_in)
    direct = estimate_spectrum(m, EXP, SeedConfig(3), 20_000, k=2)
    np.testing.assert_array_equal(direct.exponents, tr.final.exponents)


def test_rejections():
    m = LorenzModel(4)
    with pytest.raises(ValueError):
        estimate_spectrum(m, EXP, SeedConfig(0), 1000, k=4)
    with pytest.raises(ValueError):
        estimate_spectrum(m, EXP, SeedConfig(0), 60, burn_in=20, batches=50)
    with pytest.raises(ValueError):
        convergence_trace(m, EXP, SeedConfig(0), 1000, 0)


def test_pure_shear_exponent_vanishes():
    """The shear cocycle grows linearly, so the estimate is log(m / b) / (m - b)
    after burn-in ``b`` and tends to zero."""
    prev = np.inf
    for m in (10_000, 100_000, 1_000_000):
        est = estimate_spectrum(SingleShear(4), EXP, SeedConfig(0), m)
        b = est.burn_in
        assert est.top == pytest.approx(np.log(m / b) / (m - b), rel=0.05)
        assert 0 < est.top < prev
        prev = est.top
    assert prev < 5e-6


def test_frame_initialization_invariance():
    m = LorenzModel(4)
    x0 = m.random_point(SeedConfig(9).generator("init"))
    rng = np.random.default_rng(0)
    ests = [
        estimate_spectrum(m, EXP, SeedConfig(9), 200_000, x0=x0,
                          frame0=initial_frame(m, x0, 1, rng))
        for _ in range(2)
    ]
    diff = abs(ests[0].top - ests[1].top)
    assert diff <= 3 * np.hypot(ests[0].stderr[0], ests[1].stderr[0])


def test_seed_stability_and_clt_scaling():
    m = LorenzModel(4)
    a = estimate_spectrum(m, EXP, SeedConfig(0, 0), 1_000_000)
    b = estimate_spectrum(m, EXP, SeedConfig(0, 1), 1_000_000)
    assert abs(a.top - b.top) <= 3 * np.hypot(a.stderr[0], b.stderr[0])
    short = estimate_spectrum(m, EXP, SeedConfig(0, 0), 100_000)
    ratio = short.stderr[0] / a.stderr[0]
    assert 2.0 <= ratio <= 5.0  # sqrt(10) ~ 3.16


def test_subadditivity_sanity():
    m = LorenzModel(4)
    est = estimate_spectrum(m, EXP, SeedConfig(4), 200_000)
    growth = est.record.total_acc[0] / est.m  # log|M q0| / m <= log|M| / m
    assert growth >= est.top - 3 * est.stderr[0]


def test_positive_exponent_over_h_grid():
    m = LorenzModel(4)
    tops = [estimate_spectrum(m, TimeDistribution("exp", h), SeedConfig(0), 100_000).top
            for h in (0.25, 0.5, 1.0, 2.0)]
    assert all(t > 0 for t in tops)
