"""Points of the closed unit ball in C^n, the normalized boundary measure,
and nonisotropic windows S_h(xi) = {z : |1 - <z, xi>| < h}.

Points are plain complex numpy arrays; a batch of points has shape (N, n).
Inner products follow the convention <z, w> = sum_j z_j * conj(w_j).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

TOL_BOUNDARY = 1e-12

CIRCLE = "deterministic-circle"
SPHERE_MC = "monte-carlo-sphere"


class GeometryError(ValueError):
    pass


class InvalidSchemeError(GeometryError):
    pass


class QuadratureDomainError(GeometryError):
    """The integrand produced a non-finite value at some node."""

    def __init__(self, index: int, node: np.ndarray, value):
        self.index = index
        self.node = node
        self.value = value
        super().__init__(f"non-finite integrand value {value!r} at node #{index} = {node!r}")


@dataclass(frozen=True)
class QuadratureScheme:
    kind: str = SPHERE_MC
    samples: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (CIRCLE, SPHERE_MC):
            raise InvalidSchemeError(f"unknown quadrature kind {self.kind!r}")
        if int(self.samples) < 1:
            raise InvalidSchemeError("sample count must be positive")

    @property
    def deterministic(self) -> bool:
        return self.kind == CIRCLE

    def to_config(self) -> dict:
        return {"kind": self.kind, "samples": int(self.samples), "seed": int(self.seed)}

    @classmethod
    def from_config(cls, block: dict) -> "QuadratureScheme":
        return cls(kind=block["kind"], samples=int(block["samples"]), seed=int(block.get("seed", 0)))


def circle_scheme(samples: int = 4096) -> QuadratureScheme:
    return QuadratureScheme(CIRCLE, samples, 0)


def sphere_scheme(samples: int = 200_000, seed: int = 0) -> QuadratureScheme:
    return QuadratureScheme(SPHERE_MC, samples, seed)


def default_scheme(n: int, samples: int | None = None, seed: int = 0) -> QuadratureScheme:
    """Uniform angles on the circle for n = 1, seeded Monte Carlo otherwise."""
    if n == 1:
        return circle_scheme(samples or 4096)
    return sphere_scheme(samples or 200_000, seed)


def ball_point(coords, tol: float = TOL_BOUNDARY) -> np.ndarray:
    """Validate and return a point of the closed ball as a complex vector."""
    z = np.atleast_1d(np.asarray(coords, dtype=complex))
    if z.ndim != 1 or z.size < 1:
        raise GeometryError(f"a ball point needs shape (n,), got {z.shape}")
    if np.linalg.norm(z) > 1.0 + tol:
        raise GeometryError(f"|z| = {np.linalg.norm(z):.17g} exceeds 1")
    return z


def as_points(z, n: int | None = None) -> np.ndarray:
    """Coerce input to a (N, n) complex array.

    A 1-d array is read as a single point unless ``n == 1``, in which case
    it is read as N points of the disk.
    """
    z = np.asarray(z, dtype=complex)
    if z.ndim == 0:
        z = z.reshape(1, 1)
    elif z.ndim == 1:
        z = z.reshape(-1, 1) if n == 1 else z.reshape(1, -1)
    if n is not None and z.shape[-1] != n:
        raise GeometryError(f"dimension mismatch: expected n={n}, got points of dimension {z.shape[-1]}")
    return z


def inner(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """<z, w> along the last axis, broadcasting."""
    return np.sum(z * np.conj(w), axis=-1)


def sample_sphere(n: int, scheme: QuadratureScheme) -> np.ndarray:
    """Nodes on the unit sphere of C^n, shape (N, n).

    Monte Carlo nodes are normalized standard complex Gaussians, which are
    sigma-uniform for every n.
    """
    if n < 1:
        raise GeometryError("dimension must be >= 1")
    N = int(scheme.samples)
    if scheme.kind == CIRCLE:
        if n != 1:
            raise InvalidSchemeError("deterministic-circle quadrature is only valid for n = 1")
        return np.exp(2j * np.pi * np.arange(N) / N).reshape(N, 1)
    rng = np.random.default_rng(scheme.seed)
    g = rng.standard_normal((N, 2 * n))
    z = g[:, :n] + 1j * g[:, n:]
    return z / np.linalg.norm(z, axis=1, keepdims=True)


class Integral(NamedTuple):
    value: complex
    stderr: float


def node_mean(values: np.ndarray, scheme: QuadratureScheme, nodes: np.ndarray | None = None) -> Integral:
    """Mean of precomputed node values, with a standard error for Monte Carlo."""
    values = np.asarray(values)
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise QuadratureDomainError(i, None if nodes is None else nodes[i], values[i])
    mean = values.mean()
    if scheme.deterministic or values.size < 2:
        return Integral(mean, 0.0)
    return Integral(mean, float(np.std(values, ddof=1) / np.sqrt(values.size)))


def integrate_boundary(n: int, f: Callable[[np.ndarray], np.ndarray], scheme: QuadratureScheme,
                       nodes: np.ndarray | None = None) -> Integral:
    """Integral of f over the sphere against normalized sigma.

    ``f`` maps an (N, n) array of points to N values. Pass ``nodes`` to
    reuse an existing node set.
    """
    if nodes is None:
        nodes = sample_sphere(n, scheme)
    values = np.broadcast_to(np.asarray(f(nodes)), (nodes.shape[0],))
    return node_mean(values, scheme, nodes)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR with phase correction."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


@dataclass(frozen=True)
class CarlesonWindow:
    center: tuple
    h: float

    def __post_init__(self):
        xi = np.asarray(self.center, dtype=complex).ravel()
        if abs(np.linalg.norm(xi) - 1.0) > TOL_BOUNDARY:
            raise GeometryError(f"window center must be a unit vector, |xi| = {np.linalg.norm(xi)!r}")
        if not 0.0 < self.h <= 2.0:
            raise GeometryError(f"aperture h must lie in (0, 2], got {self.h}")
        object.__setattr__(self, "center", tuple(complex(c) for c in xi))

    @property
    def xi(self) -> np.ndarray:
        return np.asarray(self.center, dtype=complex)

    @property
    def n(self) -> int:
        return len(self.center)

    def contains(self, z) -> np.ndarray | bool:
        single = np.ndim(z) == 0 or (np.ndim(z) == 1 and self.n > 1)
        hit = window_distance(as_points(z, self.n), self.xi) < self.h
        return bool(hit[0]) if single else hit

    def to_dict(self) -> dict:
        return {"center": [[c.real, c.imag] for c in self.center], "h": self.h}

    @classmethod
    def from_dict(cls, d: dict) -> "CarlesonWindow":
        return cls(tuple(complex(re, im) for re, im in d["center"]), float(d["h"]))


def window_contains(w: CarlesonWindow, z) -> np.ndarray | bool:
    return w.contains(z)


def window_distance(points: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """|1 - <z, xi>| for every point; membership in S_h(xi) is distance < h."""
    return np.abs(1.0 - inner(points, xi))


def sigma_window_mass(xi, h: float, scheme: QuadratureScheme, nodes: np.ndarray | None = None) -> float:
    """sigma(S_h(xi) on the sphere) by node counting."""
    xi = np.asarray(xi, dtype=complex).ravel()
    if not 0.0 < h <= 2.0:
        raise GeometryError(f"aperture h must lie in (0, 2], got {h}")
    if nodes is None:
        nodes = sample_sphere(xi.size, scheme)
    return float(np.count_nonzero(window_distance(nodes, xi) < h)) / nodes.shape[0]
