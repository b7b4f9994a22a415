import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from essnorm.geometry import (
    CarlesonWindow,
    GeometryError,
    InvalidSchemeError,
    QuadratureDomainError,
    QuadratureScheme,
    as_points,
    ball_point,
    circle_scheme,
    integrate_boundary,
    random_unitary,
    sample_sphere,
    sigma_window_mass,
    sphere_scheme,
)


def lens_area(R):
    """Area of {|w| < 1} intersected with {|1 - w| < R} (two circles at distance 1)."""
    return (math.acos(1 - R * R / 2) + R * R * math.acos(R / 2)
            - 0.5 * math.sqrt(R * (2 - R) * R * (2 + R)))


def test_circle_nodes_are_roots_of_unity():
    nodes = sample_sphere(1, circle_scheme(8))
    assert nodes.shape == (8, 1)
    assert np.allclose(nodes[:, 0] ** 8, 1.0)


def test_circle_scheme_rejected_off_the_disk():
    with pytest.raises(InvalidSchemeError):
        sample_sphere(2, circle_scheme(16))


def test_unknown_scheme_kind():
    with pytest.raises(InvalidSchemeError):
        QuadratureScheme("trapezoid", 10)


def test_sphere_nodes_are_unit_and_seeded():
    a = sample_sphere(3, sphere_scheme(1000, seed=5))
    b = sample_sphere(3, sphere_scheme(1000, seed=5))
    assert np.array_equal(a, b)
    assert np.allclose(np.linalg.norm(a, axis=1), 1.0)


def test_sphere_second_moments():
    # E|z_j|^2 = 1/n, E z_j conj(z_k) = 0 for the normalized measure
    nodes = sample_sphere(3, sphere_scheme(200_000, seed=1))
    cov = nodes.T @ nodes.conj() / nodes.shape[0]
    assert np.allclose(cov, np.eye(3) / 3, atol=5e-3)


def test_integrate_boundary_circle_is_exact_for_trig_polynomials():
    val = integrate_boundary(1, lambda w: np.abs(1 + 2 * w[:, 0]) ** 2, circle_scheme(64))
    assert abs(val.value - 5.0) < 1e-13
    assert val.stderr == 0.0


def test_integrate_boundary_reports_bad_node():
    with pytest.raises(QuadratureDomainError) as err, np.errstate(divide="ignore", invalid="ignore"):
        integrate_boundary(1, lambda w: 1.0 / (1.0 - w[:, 0]), circle_scheme(16))
    assert err.value.index == 0


def test_ball_point_validation():
    assert ball_point([0.6, 0.8j]).shape == (2,)
    with pytest.raises(GeometryError):
        ball_point([0.8, 0.8])


def test_as_points_shapes():
    assert as_points(0.5, 1).shape == (1, 1)
    assert as_points([0.1, 0.2, 0.3], 1).shape == (3, 1)
    assert as_points([0.1, 0.2], 2).shape == (1, 2)
    with pytest.raises(GeometryError):
        as_points(np.zeros((4, 3)), 2)


def test_window_membership():
    w = CarlesonWindow((1.0,), 0.5)
    assert w.contains(0.9)
    assert not w.contains(-0.9)
    assert list(w.contains(np.array([0.9, 0.0]))) == [True, False]
    assert CarlesonWindow.from_dict(w.to_dict()) == w


def test_window_validation():
    with pytest.raises(GeometryError):
        CarlesonWindow((0.5,), 0.5)
    with pytest.raises(GeometryError):
        CarlesonWindow((1.0,), 2.5)


def test_window_mass_disk_closed_form():
    # |1 - e^{it}| < h  iff  |t| < 2 asin(h/2)
    got = sigma_window_mass([1.0], 0.5, circle_scheme(1 << 16))
    assert abs(got - 2 * math.asin(0.25) / math.pi) < 1e-4
    assert abs(got - 0.16086) < 1e-4


@pytest.mark.parametrize("h", [0.3, 0.8, 1.5])
def test_window_mass_ball_n2(h):
    # for n = 2, <zeta, xi> is uniform on the disk, so sigma(S_h) is a lens area over pi
    xi = np.array([1.0, 0.0])
    got = sigma_window_mass(xi, h, sphere_scheme(200_000, seed=3))
    expected = lens_area(h) / math.pi
    assert abs(got - expected) < 4 * math.sqrt(expected * (1 - expected) / 200_000) + 1e-4


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_window_mass_is_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    u = random_unitary(2, rng)
    nodes = sample_sphere(2, sphere_scheme(5000, seed=0))
    xi = np.array([1.0, 0.0])
    a = sigma_window_mass(xi, 0.7, None, nodes)
    b = sigma_window_mass(u @ xi, 0.7, None, nodes @ u.T)
    assert a == b


def test_random_unitary_is_unitary(rng):
    u = random_unitary(4, rng)
    assert np.allclose(u.conj().T @ u, np.eye(4))
