import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from essnorm.geometry import circle_scheme, sample_sphere, sphere_scheme
from essnorm.hardy import (
    HardyError,
    HardyExpansion,
    TestKernel,
    expand_boundary_function,
    growth_bound_check,
    h2_norm,
    hp_norm,
    monomial_h2_norm_sq,
    radial_convergence_check,
    sup_norm,
    test_kernel_norm_check,
    unit_corpus,
)
from essnorm.symbols import PolynomialSymbol, random_polynomial
from conftest import poly


def test_monomial_norms_closed_form():
    assert monomial_h2_norm_sq((5,)) == pytest.approx(1.0)
    assert monomial_h2_norm_sq((1, 1)) == pytest.approx(1 / 6)
    assert monomial_h2_norm_sq((2, 0)) == pytest.approx(1 / 3)
    assert monomial_h2_norm_sq((1, 1, 1)) == pytest.approx(2 / 120)
    # large degrees stay finite through log-Gamma
    assert 0 < monomial_h2_norm_sq((200, 300)) < 1


def test_monomial_norm_against_monte_carlo():
    nodes = sample_sphere(2, sphere_scheme(400_000, seed=2))
    est = np.mean(np.abs(nodes[:, 0] ** 2 * nodes[:, 1]) ** 2)
    assert est == pytest.approx(monomial_h2_norm_sq((2, 1)), rel=1e-2)


def test_parseval_disk_exact(rng):
    for _ in range(5):
        p = random_polynomial(1, 7, rng)
        assert hp_norm(p, 2, 1, circle_scheme(512)).value == pytest.approx(h2_norm(p), rel=1e-12)


def test_hp_norm_constant_and_monomial():
    assert hp_norm(PolynomialSymbol.constant(3.0), 3, 1).value == pytest.approx(3.0)
    assert hp_norm(poly(0, 0, 2), 1.5, 1).value == pytest.approx(2.0)


def test_hp_norm_rejects_decreasing_slices():
    # not holomorphic: |conj(z)|^2 - 1 vanishes at r = 1 but not inside
    f = lambda z: 1.0 - np.abs(z[:, 0]) ** 2
    with pytest.raises(HardyError):
        hp_norm(f, 2, 1, circle_scheme(64), radii=(0.5, 1.0))


def test_hp_norm_rejects_bad_p():
    with pytest.raises(HardyError):
        hp_norm(PolynomialSymbol.constant(1.0), math.inf, 1)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0, 4.0])
@pytest.mark.parametrize("rho", [0.0, 0.5, 0.9])
def test_kernel_unit_norm_disk(p, rho):
    est = test_kernel_norm_check(TestKernel([rho * np.exp(0.3j)], p), circle_scheme(4096), radii=(1.0,))
    assert est.value == pytest.approx(1.0, abs=1e-10)


def test_kernel_unit_norm_ball():
    k = TestKernel([0.4, 0.3j], 2.0)
    est = test_kernel_norm_check(k, sphere_scheme(200_000, seed=4), radii=(1.0,))
    assert abs(est.value - 1.0) <= 4 * est.stderr


def test_kernel_sup_norm_and_validation():
    assert test_kernel_norm_check(TestKernel([0.5], math.inf)).value == pytest.approx(1.0)
    with pytest.raises(HardyError):
        TestKernel([1.0], 2.0)


def test_kernel_abs_power_matches_complex_power():
    k = TestKernel([0.6 - 0.2j], 1.5)
    w = 0.9 * np.exp(1j * np.linspace(0, 6, 40))
    assert np.allclose(k.abs_power(w, 3.0), np.abs(k(w)) ** 3.0, rtol=1e-12)


def test_expansion_recovers_coefficients(rng):
    p = random_polynomial(1, 6, rng)
    exp = expand_boundary_function(p, 1, 10, circle_scheme(256))
    for (k,), c in p.terms.items():
        assert exp.coeffs[(k,)] == pytest.approx(c, abs=1e-12)
    assert exp.layer_mass(9) == pytest.approx(0.0, abs=1e-20)


def test_expansion_ball_monte_carlo():
    p = PolynomialSymbol(2, {(1, 0): 1.0, (1, 1): 2.0})
    exp = expand_boundary_function(p, 2, 3, sphere_scheme(200_000, seed=7))
    for alpha, c in p.terms.items():
        assert abs(exp.coeffs[alpha] - c) < 5 * exp.stderr[alpha] + 1e-9
    assert abs(exp.coeffs[(0, 0)]) < 5 * exp.stderr[(0, 0)]


def test_expansion_degree_budget():
    with pytest.raises(HardyError):
        expand_boundary_function(lambda z: z[:, 0], 1, 16, circle_scheme(16))


def test_truncation_split():
    e = HardyExpansion(1, 5, {(k,): 1.0 for k in range(6)})
    head, tail = e.truncate_head(2), e.truncate_tail(2)
    assert head.norm_sq() + tail.norm_sq() == pytest.approx(e.norm_sq())
    assert set(head.coeffs) == {(0,), (1,), (2,)}
    assert (head + tail).coeffs == e.coeffs
    assert e.truncation_error() == pytest.approx(1.0)
    assert HardyExpansion.from_dict(e.to_dict()) == e


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 3), st.integers(0, 4))
def test_tail_norm_monotone_in_k(seed, n, k):
    p = random_polynomial(n, 4, np.random.default_rng(seed))
    e = HardyExpansion.from_polynomial(p, 4)
    assert e.truncate_tail(k + 1).norm_sq() <= e.truncate_tail(k).norm_sq() + 1e-12
    assert e.truncate_head(k).norm_sq() + e.truncate_tail(k).norm_sq() == pytest.approx(e.norm_sq())


@pytest.mark.parametrize("p", [1.0, 2.0, 4.0])
def test_growth_bound(p, rng):
    pts = np.concatenate([[0], 0.9 * np.exp(1j * np.linspace(0, 6, 50)), [0.999]])
    for _ in range(3):
        f = random_polynomial(1, 5, rng)
        assert growth_bound_check(f, p, 1, pts, circle_scheme(4096), radii=(1.0,)).ok(1e-9)
    # kernels saturate the bound at their own center
    k = TestKernel([0.8], p)
    gc = growth_bound_check(k, p, 1, [0.8], circle_scheme(4096), radii=(1.0,))
    assert gc.worst_ratio == pytest.approx(1.0, abs=1e-9)


def test_growth_bound_ball(rng):
    f = random_polynomial(2, 3, rng)
    pts = 0.95 * sample_sphere(2, sphere_scheme(200, seed=1))
    assert growth_bound_check(f, 2.0, 2, pts, sphere_scheme(100_000, seed=3), radii=(1.0,)).ok()


def test_radial_convergence(rng):
    f = random_polynomial(1, 6, rng)
    tr = radial_convergence_check(f, 1, 0.2, (0.5, 0.9, 0.99, 0.999))
    assert tr.nonincreasing()
    assert tr.sups[-1] < 0.01 * tr.sups[0]


def test_sup_norm():
    assert sup_norm(poly(1, 1), 1) == pytest.approx(2.0)


def test_unit_corpus_norms():
    corpus = unit_corpus(1, 3.0, directions=4, polynomials=3, scheme=circle_scheme(2048))
    for item in corpus:
        val = hp_norm(item.f, 3.0, 1, circle_scheme(2048), radii=(1.0,)).value / item.norm
        assert val == pytest.approx(1.0, abs=1e-8)
