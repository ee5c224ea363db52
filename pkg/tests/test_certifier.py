from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randsplit.certifier import (
    J2,
    DetCheck,
    build_euler_bracket_matrix,
    build_lorenz_bracket_matrix,
    certify_euler,
    certify_lorenz,
    equilibrate,
    euler_test_point,
    euler_z_plus,
    lorenz_test_point,
    numeric_rank,
)
from randsplit.models import half_lattice


@pytest.fixture(scope="module")
def euler_cert():
    return certify_euler(3)


def test_lorenz_point_n4():
    pt = lorenz_test_point(4, 1.0)
    assert pt.a == pytest.approx(-1 / math.sqrt(10), rel=1e-15)
    assert pt.b == pytest.approx(math.sqrt(2 / 5), rel=1e-15)
    assert 2 * pt.a**2 + 2 * pt.b**2 == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("n", range(4, 13))
def test_lorenz_point_relations(n):
    pt = lorenz_test_point(n, 1.7)
    rel = pt.relations()
    assert abs(rel["sphere"]) <= 1e-12 * 1.7**2
    assert abs(rel["quadratic"]) <= 1e-12 * 1.7**2
    assert rel["tangency"] == 0.0
    assert abs(rel["A3_factor"]) > 0 and abs(rel["pivot_factor"]) > 0


def test_lorenz_point_rejections():
    with pytest.raises(ValueError):
        lorenz_test_point(3)
    with pytest.raises(ValueError):
        lorenz_test_point(5, 0.0)


def test_numeric_rank_identity():
    # threshold is tol * sigma_max * max(shape), so any tol < 1/6 keeps all six
    for tol in (1e-10, 0.1, 0.16):
        rep = numeric_rank(np.eye(6), tol, 6)
        assert rep.rank == 6 and rep.passed
    rep = numeric_rank(np.diag([1.0, 1.0, 1e-14]), 1e-10, 3)
    assert rep.rank == 2 and not rep.passed


def test_equilibration_is_exact_power_of_two():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 5)) * np.logspace(-6, 6, 6)[:, None]
    S, r, c = equilibrate(A)
    assert np.all(np.log2(r) == np.round(np.log2(r)))
    assert np.all(np.log2(c) == np.round(np.log2(c)))
    np.testing.assert_array_equal(S * r[:, None] * c[None, :], A)


def test_lorenz_matrix_blocks():
    pt = lorenz_test_point(7)
    bm = build_lorenz_bracket_matrix(7, pt)
    a, b = pt.a, pt.b
    assert bm.matrix.shape == (14, 12)
    np.testing.assert_allclose(bm.blocks["A2"], [[0, -a * a], [4 * a * b, 0]], atol=1e-15)
    for i in (5, 6):
        blk = bm.blocks[f"A{i}"]
        np.testing.assert_allclose(blk[0], [0, -b * b], atol=1e-15)
        assert blk[1, 0] == pytest.approx(4 * b * b, rel=1e-14) or blk[1, 0] == pytest.approx(-4 * b * b, rel=1e-14)
    for i in range(2, 7):
        assert np.all(bm.matrix[2 * i + 2:, 2 * i - 3:2 * i - 1] == 0.0)
    assert bm.cross_check() <= 1e-10


@pytest.mark.parametrize("n", [4, 5, 8, 11])
def test_certify_lorenz(n):
    c = certify_lorenz(n)
    assert c.passed
    assert c.rank.rank == 2 * n - 2
    assert c.rank.margin >= 1e3
    assert len(c.dets) == n - 2
    assert c.extra["top_block_rank"] == 4


def test_detcheck_compares_absolute_values():
    assert DetCheck("x", -2.0, 2.0, "2").passed
    assert not DetCheck("x", 2.0, 2.1, "2.1").passed


def _alpha_oracle(N, enstrophy, energy, beta):
    """Both conserved sums assembled mode by mode, solved for (alpha1^2, alpha2^2)."""
    mp.mp.dps = 40
    beta = mp.mpf(beta)
    ens, en = [mp.mpf(0)] * 3, [mp.mpf(0)] * 3
    for k in half_lattice(N):
        w = mp.mpf(1) / (k[0] ** 2 + k[1] ** 2)
        f = 5 if k in J2 else 2
        slot = 0 if k in ((0, 1), (1, 0)) else 1 if k == (N, N) else 2
        c = f if slot < 2 else f * beta**2
        ens[slot] += c
        en[slot] += c * w
    M = mp.matrix([[ens[0], ens[1]], [en[0], en[1]]])
    sol = mp.lu_solve(M, mp.matrix([mp.mpf(enstrophy) - ens[2], mp.mpf(energy) - en[2]]))
    return sol[0], sol[1]


@pytest.mark.parametrize("frac", [0.01, 0.5, 0.9])
def test_euler_point_matches_oracle(frac):
    zp = euler_z_plus(3, 1.0, 0.5)
    pt = euler_test_point(3, 1.0, 0.5, frac * zp)
    A1, A2 = _alpha_oracle(3, 1, mp.mpf("0.5"), frac * zp)
    assert pt.alpha1 == pytest.approx(float(mp.sqrt(A1)), rel=1e-12)
    assert pt.alpha2 == pytest.approx(float(mp.sqrt(A2)), rel=1e-12)
    for k, v in pt.residuals().items():
        assert abs(v) <= 1e-12, k


def test_euler_point_frozen_values():
    zp = euler_z_plus(3, 1.0, 0.5)
    assert zp == pytest.approx(0.11369648740565445, rel=1e-12)
    pt = euler_test_point(3, 1.0, 0.5, 0.01 * zp)
    assert pt.alpha1 == pytest.approx(0.21692835854092383, rel=1e-12)
    assert pt.alpha2 == pytest.approx(0.51447002999660328, rel=1e-12)


def test_z_plus_is_where_an_amplitude_vanishes():
    zp = euler_z_plus(3, 1.0, 0.5)
    A1, A2 = _alpha_oracle(3, 1, mp.mpf("0.5"), zp)
    assert min(abs(A1), abs(A2)) <= 1e-12
    A1, A2 = _alpha_oracle(3, 1, mp.mpf("0.5"), 0.999 * zp)
    assert A1 > 0 and A2 > 0


def test_euler_point_rejections():
    with pytest.raises(ValueError, match=r"E/\(2N\^2\) < calE < E"):
        euler_test_point(3, 1.0, 1.0)
    zp = euler_z_plus(3, 1.0, 0.5)
    with pytest.raises(ValueError):
        euler_test_point(3, 1.0, 0.5, zp * 1.01)
    with pytest.raises(ValueError):
        euler_test_point(3, 1.0, 0.5, 0.0)


def test_euler_matrix_shape_and_structure(euler_cert):
    bm = build_euler_bracket_matrix(3, euler_test_point(3))
    assert bm.matrix.shape == (96, 92)
    assert euler_cert.structure_ok
    assert euler_cert.cross_check <= 1e-10


def test_certify_euler(euler_cert):
    c = euler_cert
    assert c.rank.rank == 92 and c.rank.passed
    assert c.rank.margin >= 1e3
    assert len(c.dets) >= 22
    assert all(d.passed for d in c.dets)
    assert c.dets[0].block == "M0'"
    assert sum("39/2" in d.formula for d in c.dets) == 1
    assert c.passed


@pytest.mark.parametrize("pair", [(1.0, 0.3), (2.0, 0.5), (1.0, 0.8)])
def test_certify_euler_other_conserved_targets(pair):
    c = certify_euler(3, *pair)
    assert c.passed and c.rank.rank == 92


@settings(max_examples=10)
@given(st.floats(0.3, 0.95))
def test_euler_rank_stable_under_beta(frac):
    zp = euler_z_plus(3, 1.0, 0.5)
    c = certify_euler(3, 1.0, 0.5, frac * zp)
    assert c.rank.rank == 92
    assert all(d.passed for d in c.dets)
