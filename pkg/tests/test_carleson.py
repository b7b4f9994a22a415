import math

import numpy as np
import pytest

from essnorm.carleson import (
    CarlesonError,
    berezin_boundary_trace,
    berezin_sup,
    berezin_values,
    boundary_mass_check,
    box_constant,
    default_h_grid,
    equivalence_report,
    vanishing_profile,
    window_masses,
)
from essnorm.estimators import PreconditionError
from essnorm.geometry import circle_scheme, sphere_scheme
from essnorm.pullback import ConsistencyError, build_pullback
from essnorm.symbols import BallSelfMap, PolynomialSymbol, self_map
from conftest import poly

ONE = PolynomialSymbol.constant(1.0)
SCHEME = circle_scheme(1 << 14)


def test_default_grid():
    assert default_h_grid(1)[0] == 2.0 and len(default_h_grid(1)) == 7
    assert len(default_h_grid(2)) == 5


def test_interior_point_mass():
    # phi = 0: all mass at the origin, which lies in S_h(xi) only for h > 1
    mu = build_pullback(ONE, self_map(poly(0.0)), 2.0, SCHEME)
    box = box_constant(mu, 1.0, h_grid=(1.01, 0.5, 0.1))
    assert box.value == pytest.approx(1 / 1.01)
    assert box.profile[1:] == (0.0, 0.0)
    assert not box.diverges
    assert vanishing_profile(mu, 1.0, box=box).vanishing


def test_boundary_point_mass_diverges():
    mu = build_pullback(ONE, self_map(poly(1.0)), 2.0, SCHEME)
    box = box_constant(mu, 1.0)
    assert box.diverges
    assert box.argmax_center[0] == pytest.approx(1.0)
    assert box.profile[-1] == pytest.approx(1 / default_h_grid(1)[-1])


def test_sigma_box_constant(identity):
    # sigma(S_h(1)) = 2 asin(h/2) / pi, and asin(x)/x increases, so the sup sits at h = 2
    mu = build_pullback(ONE, identity, 2.0, SCHEME)
    box = box_constant(mu, 1.0)
    assert box.value == pytest.approx(0.5, rel=1e-3)
    for h, v in zip(box.h_grid, box.profile):
        assert v == pytest.approx(2 * math.asin(h / 2) / (math.pi * h), abs=2 / (h * SCHEME.samples))


def test_window_masses_shape(identity):
    mu = build_pullback(ONE, identity, 2.0, SCHEME)
    m = window_masses(mu, np.array([[1.0 + 0j], [-1.0 + 0j]]), (2.0, 1.0))
    assert m.shape == (2, 2)
    # rows are apertures, columns are centers; the arc for h = 1 is a third of the circle
    assert m[:, 0] == pytest.approx(m[:, 1], abs=1e-3)
    assert m[1] == pytest.approx(1 / 3, abs=1e-3)


def test_box_errors(identity):
    mu = build_pullback(ONE, identity, 2.0, SCHEME)
    with pytest.raises(CarlesonError):
        box_constant(mu, 0.5)
    with pytest.raises(CarlesonError):
        box_constant(mu, 1.0, h_grid=(3.0,))


def test_berezin_identity_is_one(identity):
    mu = build_pullback(ONE, identity, 2.0, SCHEME)
    z = np.array([[0.0], [0.5], [0.9j], [-0.99]], dtype=complex)
    assert berezin_values(mu, 2.0, z) == pytest.approx(1.0, abs=1e-9)


def test_berezin_origin_is_total_mass(lens):
    mu = build_pullback(poly(1, 2, -1j), lens, 3.0, SCHEME)
    assert berezin_values(mu, 2.0, np.zeros((1, 1)))[0] == mu.total_mass
    assert berezin_sup(mu, 2.0).at_origin == mu.total_mass


def test_berezin_point_mass():
    mu = build_pullback(ONE, self_map(poly(0.0)), 2.0, SCHEME)
    z = np.array([[0.3], [0.8j]])
    assert berezin_values(mu, 4.0, z) == pytest.approx((1 - np.abs(z[:, 0]) ** 2) ** 0.5)


def test_berezin_ball_identity():
    phi = BallSelfMap.identity(2)
    mu = build_pullback(PolynomialSymbol.constant(1.0, 2), phi, 2.0, sphere_scheme(20_000, seed=4))
    v = berezin_values(mu, 2.0, np.array([[0.0, 0.0], [0.3, 0.4j]]))
    assert v[0] == pytest.approx(1.0)
    assert v[1] == pytest.approx(1.0, abs=0.05)


def test_berezin_rejects_outside(identity):
    mu = build_pullback(ONE, identity, 2.0, SCHEME)
    with pytest.raises(CarlesonError):
        berezin_values(mu, 2.0, np.array([[1.0]]))


def test_berezin_detects_stale_atoms(identity):
    mu = build_pullback(ONE, identity, 2.0, SCHEME)
    mu.weights[0] *= 2  # corrupt one atom
    with pytest.raises(ConsistencyError):
        berezin_values(mu, 2.0, np.array([[0.5]]))


def test_berezin_trace_squaring(squaring):
    # B -> ||psi||_2^2 = 1/2 for an inner self-map with p = q = 2
    mu = build_pullback(poly(0.5, 0.5), squaring, 2.0, circle_scheme(1 << 17))
    tr = berezin_boundary_trace(mu, 2.0)
    assert tr.limit.value == pytest.approx(0.5, abs=1e-3)
    assert tr.root_limit == pytest.approx(0.70711, abs=1e-3)


def test_berezin_trace_interior(half):
    mu = build_pullback(ONE, half, 2.0, SCHEME)
    tr = berezin_boundary_trace(mu, 2.0)
    assert tr.limit.is_zero(atol=1e-6)
    with pytest.raises(CarlesonError):
        berezin_boundary_trace(mu, 2.0, radii=(0.9, 0.5))


def test_boundary_mass(identity, lens):
    full = boundary_mass_check(build_pullback(ONE, identity, 4.0, SCHEME))
    assert full.limit.value == pytest.approx(1.0)
    assert not full.vanishes()
    thin = boundary_mass_check(build_pullback(poly(1, -1), lens, 4.0, SCHEME))
    assert thin.vanishes()
    with pytest.raises(CarlesonError):
        boundary_mass_check(build_pullback(ONE, identity, 4.0, SCHEME), eps=(0.01, 0.1))


def test_report_bounded(lens):
    rep = equivalence_report(poly(1, -1), lens, 2.0, 4.0)
    assert rep.consistent and rep.bounded
    assert rep.compact
    csvs = rep.csv_traces()
    assert csvs["box_profile.csv"].splitlines()[0] == "h,sup_ratio"
    assert len(csvs["berezin_trace.csv"].splitlines()) == 1 + len(rep.berezin.shells) + len(rep.trace.radii)
    d = rep.to_dict()
    assert d["indicators"] == {"box_constant": True, "berezin_sup": True, "corpus_norm": True}


def test_report_unbounded(identity):
    rep = equivalence_report(ONE, identity, 2.0, 4.0)
    assert rep.consistent and rep.bounded is False and rep.compact is False


def test_report_precondition(identity):
    with pytest.raises(PreconditionError):
        equivalence_report(ONE, identity, 4.0, 2.0)
