import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmcweld import gmc
from gmcweld.homeo import CircleMap, identity, invert, rotation, sine_perturbation, sup_distance
from gmcweld.spectra import (FourierField, GridFunction, default_cap, evaluate, lgf_coefficients,
                             sample_lgf, synthesize, truncated_variance)

TWO_PI = 2 * np.pi


def zero(g):
    return GridFunction(np.zeros(g), 0.5)


def random_measure(seed, order=32, size=512, gamma=1.0):
    f = sample_lgf(order, np.random.default_rng(seed))
    return gmc.gmc_measure(evaluate(f, size, 0.5), truncated_variance(order, size, 0.5), gamma)


def test_uniform_measure():
    mu = gmc.gmc_measure(zero(64), zero(64), 1.0)
    assert mu.total == pytest.approx(TWO_PI)
    assert np.allclose(mu.masses, TWO_PI / 64)


def test_gamma_domain():
    for g in (0.0, 2.0, -1.0, 2.5):
        with pytest.raises(ValueError):
            gmc.gmc_measure(zero(8), zero(8), g)


def test_constant_shift_scales_total():
    mu = random_measure(0)
    f = sample_lgf(32, np.random.default_rng(0))
    shifted = FourierField(32, f.coeffs, 0.8)
    mu2 = gmc.gmc_measure(evaluate(shifted, 512, 0.5), truncated_variance(32, 512, 0.5), 1.0)
    assert mu2.total == pytest.approx(mu.total * np.exp(0.5 * 0.8))


def test_expected_total_monte_carlo():
    order, g, n = 256, 1024, 10 ** 4
    rng = np.random.default_rng(10)
    var = truncated_variance(order, 1).values[0]
    totals = np.concatenate([gmc.cell_masses(synthesize(lgf_coefficients(order, rng, 1000), g, 0.0, 0.5),
                                             var, 1.0).sum(axis=1) for _ in range(n // 1000)])
    assert abs(totals.mean() - TWO_PI) < 3 * totals.std() / np.sqrt(n)


def test_martingale_check_rows():
    rows = gmc.martingale_check(1.0, 64, 2000, seed=3, arcs=8)
    assert len(rows) == 8
    assert sum(r["length"] for r in rows) == pytest.approx(TWO_PI)
    assert all(r["pass"] for r in rows)


def test_insertion_alpha_zero_is_plain_measure():
    f = evaluate(sample_lgf(16, np.random.default_rng(1)), 256, 0.5)
    v = truncated_variance(16, 256, 0.5)
    a = gmc.gmc_measure(f, v, 1.0)
    b = gmc.gmc_with_insertion(f, v, 1.0, 0.0, 5.0)
    assert np.array_equal(a.cmf, b.cmf)


def test_insertion_cells_match_analytic_integrals():
    g = 2 ** 12
    mu = gmc.gmc_with_insertion(zero(g), zero(g), 1.0, 1.0, 50.0)
    h = TWO_PI / g
    mpmath.mp.dps = 20

    def cell(j):
        return float(mpmath.quad(lambda t: abs(2 * mpmath.sin(t / 2)) ** -0.5, [j * h, (j + 1) * h]))

    for j in (0, 1, 2, 17, g // 2, g - 1):
        assert mu.masses[j] == pytest.approx(cell(j), rel=1e-2)
    # total: int_0^{2pi} |2 sin(t/2)|^{-1/2} dt
    total = float(mpmath.quad(lambda t: abs(2 * mpmath.sin(t / 2)) ** -0.5, [0, mpmath.pi, 2 * mpmath.pi]))
    assert mu.total == pytest.approx(total, rel=1e-6)


def test_insertion_finite_at_large_gamma():
    gamma, order, g = 1.6, 128, 2048
    rng = np.random.default_rng(4)
    v = truncated_variance(order, g, 0.5)
    for _ in range(50):
        f = evaluate(sample_lgf(order, rng), g, 0.5)
        mu = gmc.gmc_with_insertion(f, v, gamma, gamma, default_cap(gamma, order))
        assert np.isfinite(mu.total) and mu.total > 0


def test_normalize():
    mu = gmc.normalize(gmc.gmc_measure(zero(32), zero(32), 1.0))
    assert mu.total == pytest.approx(1.0)
    assert np.allclose(mu.masses, 1 / 32)
    again = gmc.normalize(mu)
    assert np.allclose(again.cmf, mu.cmf, rtol=0, atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_normalize_idempotent(seed):
    mu = gmc.normalize(random_measure(seed, 16, 128))
    assert np.allclose(gmc.normalize(mu).cmf, mu.cmf, rtol=0, atol=1e-15)


def test_welding_homeo_uniform_is_identity():
    phi = gmc.welding_homeo(gmc.normalize(gmc.gmc_measure(zero(64), zero(64), 1.0)))
    assert sup_distance(phi, identity(), 256) < 1e-14


def test_welding_homeo_closed_form_cmf():
    # density (1 + 0.5 cos) integrated exactly per cell gives F = theta + 0.5 sin(theta)
    g = 512
    edges = TWO_PI * np.arange(g + 1) / g
    cmf = edges + 0.5 * np.sin(edges)
    phi = gmc.welding_homeo(gmc.normalize(gmc.BoundaryMeasure(1.0, cmf)))
    th = np.linspace(0, TWO_PI, 33)
    assert np.allclose(phi(th), th + 0.5 * np.sin(th), atol=1e-14)
    assert phi(0.0) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_own_welding_pushes_to_uniform(seed):
    mu = gmc.normalize(random_measure(seed, 32, 256))
    phi = gmc.welding_homeo(mu)
    uniform = gmc.normalize(gmc.gmc_measure(zero(256), zero(256), 1.0))
    assert gmc.sup_cmf_distance(gmc.pushforward(phi, mu), uniform) <= 1 / 256


def test_pushforward_examples():
    mu = random_measure(5, 16, 256)
    same = gmc.pushforward(identity(256), mu)
    assert np.allclose(same.cmf, mu.cmf, atol=1e-12)
    uni = gmc.gmc_measure(zero(256), zero(256), 1.0)
    rot = gmc.pushforward(rotation(0.77, 256), uni)
    assert gmc.sup_cmf_distance(rot, uni) < 1e-12


def test_pushforward_round_trip():
    mu = random_measure(6, 32, 1024)
    phi = sine_perturbation(0.3, size=1024)
    back = gmc.pushforward(invert(phi), gmc.pushforward(phi, mu))
    assert gmc.sup_cmf_distance(back, mu) < 2 / 1024


def test_pullback_inverts_pushforward():
    mu = random_measure(7, 32, 1024)
    phi = sine_perturbation(0.25, size=1024)
    back = gmc.pullback_measure(phi, gmc.pushforward(phi, mu))
    assert gmc.sup_cmf_distance(back, mu) < 2 / 1024


def test_cumulative_periodic():
    mu = random_measure(8, 8, 64)
    assert mu.cumulative(TWO_PI + 0.3) == pytest.approx(mu.total + mu.cumulative(0.3))


def test_cascade_consistency():
    # E[M_N | first N/2 modes] = M_{N/2}
    order, g, n = 64, 1024, 4000
    rng = np.random.default_rng(9)
    low = lgf_coefficients(order // 2, rng)
    v_low = truncated_variance(order // 2, 1).values[0]
    v = truncated_variance(order, 1).values[0]
    m_low = gmc.cell_masses(synthesize(low, g, 0.0, 0.5), v_low, 1.0).sum()
    high = lgf_coefficients(order, rng, n)
    high[:, : order // 2] = low
    totals = gmc.cell_masses(synthesize(high, g, 0.0, 0.5), v, 1.0).sum(axis=1)
    assert abs(totals.mean() - m_low) < 3 * totals.std() / np.sqrt(n)


def test_coordinate_change_identity_and_rotation():
    f = sample_lgf(32, np.random.default_rng(0))
    for phi in (identity(2 ** 12), rotation(0.6, 2 ** 12)):
        rep = gmc.coordinate_change_check(f, phi, 1.0, eps=(0.2, 0.1))
        assert rep.max_substitution_error < 1e-12
        assert max(rep.variance_sup_errors) < 1e-12


def test_coordinate_change_sine():
    f = sample_lgf(256, np.random.default_rng(1))
    rep = gmc.coordinate_change_check(f, sine_perturbation(0.3), 1.0)
    assert rep.max_substitution_error < 1e-6
    assert rep.variance_monotone
    e = rep.variance_sup_errors
    # second-order convergence of the double average
    assert e[-2] / e[-1] == pytest.approx(4.0, rel=0.15)


def test_variance_correction_closed_form_for_moebius_free_case():
    # for a rotation the log chord ratio vanishes identically
    v = gmc.variance_correction(rotation(1.0, 1024), 0.1, np.array([0.0, 1.0]))
    assert np.allclose(v, 0, atol=1e-13)


def test_apery_value_and_constant():
    exact = float(7 * mpmath.zeta(3) / mpmath.pi ** 2)
    assert gmc.APERY_TARGET == pytest.approx(-exact, rel=1e-15)
    assert exact == pytest.approx(0.85256, abs=5e-6)
    # arbitrary-precision value of the integral as written
    mpmath.mp.dps = 20
    inner = mpmath.quad(lambda u: (mpmath.pi - abs(u - mpmath.pi)) * mpmath.log(abs(2 * mpmath.sin(u / 2))),
                        [0, mpmath.pi, 2 * mpmath.pi])
    integral = float(2 / mpmath.pi ** 2 * inner)
    assert integral == pytest.approx(exact, rel=1e-12)
    assert gmc.apery_check(1024) == pytest.approx(integral, abs=1e-5)


def test_apery_refinement():
    exact = -gmc.APERY_TARGET
    errs = [abs(gmc.apery_check(g) - exact) for g in (256, 512, 1024, 2048)]
    assert all(b <= a / 2 for a, b in zip(errs, errs[1:]))


def test_apery_small_grid_rejected():
    with pytest.raises(ValueError):
        gmc.apery_check(128)


def test_measure_validation_and_serialization():
    with pytest.raises(ValueError):
        gmc.BoundaryMeasure(1.0, [0.0, 1.0, 0.5])
    with pytest.raises(ValueError):
        gmc.BoundaryMeasure(1.0, [0.0, 0.0])
    mu = random_measure(2, 8, 32)
    back = gmc.BoundaryMeasure.from_dict(mu.to_dict())
    assert np.array_equal(back.cmf, mu.cmf)
    assert mu.to_csv().splitlines()[0] == "theta,cmf"


def test_welding_homeo_is_monotone_circle_map():
    phi = gmc.welding_homeo(gmc.normalize(random_measure(3, 64, 1024)))
    assert isinstance(phi, CircleMap) and phi(0.0) == 0.0
