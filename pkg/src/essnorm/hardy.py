"""Hardy-space norms on the ball, homogeneous expansions and the test kernels f_w.

Monomial norms in H^2(B_n) are

    ||z^alpha||_2^2 = (n-1)! alpha! / (n-1+|alpha|)!

and the monomials are orthogonal, so the H^2 norm of an expansion is a
weighted Parseval sum of its coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from .geometry import (
    QuadratureScheme,
    as_points,
    default_scheme,
    node_mean,
    sample_sphere,
    sphere_scheme,
)
from .symbols import PolynomialSymbol, multi_indices, random_polynomial

DEFAULT_RADII = (0.9, 0.99, 0.999, 1.0)
DEFAULT_DEGREE = {1: 12, 2: 8, 3: 5}


class HardyError(ValueError):
    pass


def monomial_h2_norm_sq(alpha: Sequence[int], n: int | None = None) -> float:
    """||z^alpha||_2^2, evaluated in log-Gamma form."""
    alpha = tuple(int(a) for a in alpha)
    if n is None:
        n = len(alpha)
    if len(alpha) != n:
        raise HardyError(f"multi-index {alpha} does not have length {n}")
    s = sum(alpha)
    log = math.lgamma(n) + sum(math.lgamma(a + 1) for a in alpha) - math.lgamma(n + s)
    return math.exp(log)


@dataclass(frozen=True)
class HardyExpansion:
    """Finite homogeneous expansion sum_{|alpha| <= d} c(alpha) z^alpha."""

    n: int
    d: int
    coeffs: Mapping = field(default_factory=dict)
    stderr: Mapping | None = field(default=None, compare=False)

    def __post_init__(self):
        clean = {}
        for a, c in dict(self.coeffs).items():
            a = tuple(int(x) for x in a)
            if len(a) != self.n:
                raise HardyError(f"multi-index {a} in an expansion on C^{self.n}")
            if sum(a) > self.d:
                raise HardyError(f"multi-index {a} exceeds the degree cutoff {self.d}")
            if c != 0:
                clean[a] = complex(c)
        object.__setattr__(self, "coeffs", clean)

    def norm_sq(self) -> float:
        return float(sum(abs(c) ** 2 * monomial_h2_norm_sq(a, self.n) for a, c in self.coeffs.items()))

    def h2_norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def layer_mass(self, s: int) -> float:
        """Squared H^2 norm of the degree-s homogeneous part F_s."""
        return float(sum(abs(c) ** 2 * monomial_h2_norm_sq(a, self.n)
                         for a, c in self.coeffs.items() if sum(a) == s))

    def truncation_error(self) -> float:
        return math.sqrt(self.layer_mass(self.d))

    def truncate_tail(self, m: int) -> "HardyExpansion":
        """R_m: keep the homogeneous parts of degree > m."""
        if m < 0:
            raise HardyError("truncation index must be >= 0")
        return HardyExpansion(self.n, self.d, {a: c for a, c in self.coeffs.items() if sum(a) > m})

    def truncate_head(self, m: int) -> "HardyExpansion":
        """Q_m = I - R_m: keep the homogeneous parts of degree <= m."""
        if m < 0:
            raise HardyError("truncation index must be >= 0")
        return HardyExpansion(self.n, self.d, {a: c for a, c in self.coeffs.items() if sum(a) <= m})

    def __add__(self, other: "HardyExpansion") -> "HardyExpansion":
        if other.n != self.n:
            raise HardyError("cannot add expansions on different dimensions")
        coeffs = dict(self.coeffs)
        for a, c in other.coeffs.items():
            coeffs[a] = coeffs.get(a, 0) + c
        return HardyExpansion(self.n, max(self.d, other.d), coeffs)

    def to_polynomial(self) -> PolynomialSymbol:
        return PolynomialSymbol(self.n, self.coeffs)

    def __call__(self, z) -> np.ndarray:
        return self.to_polynomial()(z)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "coeffs": [{"alpha": list(a), "re": c.real, "im": c.imag} for a, c in sorted(self.coeffs.items())],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "HardyExpansion":
        return cls(int(d["n"]), int(d["d"]),
                   {tuple(t["alpha"]): complex(t["re"], t["im"]) for t in d["coeffs"]})

    @classmethod
    def from_polynomial(cls, poly: PolynomialSymbol, d: int | None = None) -> "HardyExpansion":
        d = poly.degree if d is None else d
        return cls(poly.n, d, {a: c for a, c in poly.terms.items() if sum(a) <= d})


def h2_norm(f) -> float:
    """H^2 norm from coefficients (expansion or polynomial)."""
    if isinstance(f, PolynomialSymbol):
        f = HardyExpansion.from_polynomial(f)
    return f.h2_norm()


class NormEstimate(NamedTuple):
    value: float
    stderr: float
    slices: tuple = ()

    def to_dict(self) -> dict:
        return {"value": self.value, "error": self.stderr,
                "slices": [{"r": r, "integral": v, "error": e} for r, v, e in self.slices]}


def _slice_nodes(n: int, scheme: QuadratureScheme | None, nodes: np.ndarray | None):
    if scheme is None:
        scheme = default_scheme(n)
    if nodes is None:
        nodes = sample_sphere(n, scheme)
    return scheme, nodes


def hp_norm(f: Callable, p: float, n: int, scheme: QuadratureScheme | None = None,
            radii: Sequence[float] = DEFAULT_RADII, nodes: np.ndarray | None = None) -> NormEstimate:
    """sup over the radius schedule of (integral of |f(r xi)|^p dsigma)^(1/p).

    r = 1 is allowed because every symbol here is continuous on the closed
    ball. The slice integrals must be nondecreasing in r up to quadrature
    error, otherwise a HardyError is raised.
    """
    if not 0 < p < math.inf:
        raise HardyError(f"hp_norm needs 0 < p < inf, got {p}")
    scheme, nodes = _slice_nodes(n, scheme, nodes)
    slices = []
    for r in sorted(radii):
        vals = np.abs(np.asarray(f(r * nodes))) ** p
        est = node_mean(vals, scheme, nodes)
        slices.append((float(r), float(est.value.real), est.stderr))
    for (r0, v0, e0), (r1, v1, e1) in zip(slices, slices[1:]):
        if v1 < v0 - 5 * max(e0, e1) - 1e-12 * max(abs(v0), 1.0):
            raise HardyError(f"slice integrals decrease from r={r0} ({v0}) to r={r1} ({v1})")
    k = int(np.argmax([s[1] for s in slices]))
    integral, err = slices[k][1], slices[k][2]
    value = integral ** (1.0 / p)
    stderr = value / (p * integral) * err if integral > 0 else err ** (1.0 / p)
    return NormEstimate(value, float(stderr), tuple(slices))


def sup_norm(f: Callable, n: int, scheme: QuadratureScheme | None = None,
             nodes: np.ndarray | None = None) -> float:
    """Boundary maximum of |f| (maximum principle)."""
    scheme, nodes = _slice_nodes(n, scheme, nodes)
    return float(np.max(np.abs(f(nodes))))


def expand_boundary_function(f: Callable, n: int, d: int | None = None,
                             scheme: QuadratureScheme | None = None,
                             nodes: np.ndarray | None = None) -> HardyExpansion:
    """Coefficients c(alpha) = <f, z^alpha> / ||z^alpha||^2 for |alpha| <= d.

    This is the degree-d part of the orthogonal projection of L^2 onto H^2.
    On the circle the inner products come from an FFT, which is exact for
    polynomials of degree below the node count.
    """
    if d is None:
        d = DEFAULT_DEGREE.get(n, 4)
    scheme, nodes = _slice_nodes(n, scheme, nodes)
    values = np.asarray(f(nodes), dtype=complex)
    node_mean(values, scheme, nodes)  # raises on non-finite values
    N = nodes.shape[0]
    if scheme.deterministic:
        if d >= N:
            raise HardyError(f"degree cutoff {d} needs more than {N} circle nodes")
        c = np.fft.fft(values) / N
        return HardyExpansion(1, d, {(k,): c[k] for k in range(d + 1)}, {(k,): 0.0 for k in range(d + 1)})
    coeffs, errs = {}, {}
    for alpha in multi_indices(n, d):
        mono = np.prod(nodes ** np.asarray(alpha), axis=1)
        norm_sq = monomial_h2_norm_sq(alpha, n)
        est = node_mean(values * np.conj(mono), scheme)
        coeffs[alpha] = est.value / norm_sq
        errs[alpha] = est.stderr / norm_sq
    return HardyExpansion(n, d, coeffs, errs)


class TestKernel:
    """f_w(z) = (1 - |w|^2)^(n/p) / (1 - <z, w>)^(2n/p), a unit vector of H^p."""

    __test__ = False

    def __init__(self, w, p: float):
        self.w = np.atleast_1d(np.asarray(w, dtype=complex))
        self.n = self.w.size
        self.p = float(p)
        if np.linalg.norm(self.w) >= 1.0:
            raise HardyError(f"kernel center must satisfy |w| < 1, got {np.linalg.norm(self.w)}")
        if not self.p > 0:
            raise HardyError("kernel exponent p must be positive")

    @property
    def exponent(self) -> float:
        return 0.0 if math.isinf(self.p) else self.n / self.p

    def __call__(self, z) -> np.ndarray:
        z = as_points(z, self.n)
        e = self.exponent
        scale = (1.0 - np.vdot(self.w, self.w).real) ** e
        # Re(1 - <z, w>) > 0 on the closed ball, so the principal branch is continuous there.
        return scale / (1.0 - z @ np.conj(self.w)) ** (2 * e)

    def abs_power(self, z, q: float) -> np.ndarray:
        """|f_w(z)|^q without the complex power."""
        z = as_points(z, self.n)
        e = self.exponent * q
        t = 1.0 - z @ np.conj(self.w)
        return (1.0 - np.vdot(self.w, self.w).real) ** e * (t.real ** 2 + t.imag ** 2) ** -e


def test_kernel_eval(k: TestKernel, z):
    vals = k(z)
    return complex(vals[0]) if np.ndim(z) == 0 or (np.ndim(z) == 1 and k.n > 1) else vals


def test_kernel_norm_check(k: TestKernel, scheme: QuadratureScheme | None = None, **kw) -> NormEstimate:
    """hp_norm of f_w; should be 1."""
    if math.isinf(k.p):
        return NormEstimate(sup_norm(k, k.n, scheme), 0.0)
    return hp_norm(k, k.p, k.n, scheme, **kw)


test_kernel_eval.__test__ = False
test_kernel_norm_check.__test__ = False


@dataclass(frozen=True)
class GrowthCheck:
    worst_ratio: float
    argmax: tuple
    norm: float
    norm_stderr: float

    @property
    def allowance(self) -> float:
        """Relative quadrature error of the norm, at three standard errors."""
        return 3 * self.norm_stderr / self.norm if self.norm > 0 else 0.0

    def ok(self, tol: float = 1e-6) -> bool:
        return self.worst_ratio <= 1.0 + tol + self.allowance


def growth_bound_check(f: Callable, p: float, n: int, points, scheme: QuadratureScheme | None = None,
                       radii: Sequence[float] = DEFAULT_RADII) -> GrowthCheck:
    """max over points of |f(z)| (1 - |z|^2)^(n/p) / ||f||_p, bounded by 1 for f in H^p."""
    pts = as_points(points, n)
    norm = hp_norm(f, p, n, scheme, radii)
    weight = (1.0 - np.sum(np.abs(pts) ** 2, axis=1)) ** (n / p)
    ratios = np.abs(f(pts)) * weight / norm.value
    i = int(np.argmax(ratios))
    return GrowthCheck(float(ratios[i]), tuple(complex(c) for c in pts[i]), norm.value, norm.stderr)


class RadialTrace(NamedTuple):
    radii: tuple
    sups: tuple

    def nonincreasing(self, tol: float = 1e-12) -> bool:
        return all(b <= a + tol for a, b in zip(self.sups, self.sups[1:]))


def radial_convergence_check(f: Callable, n: int, delta: float, radii: Sequence[float],
                             scheme: QuadratureScheme | None = None) -> RadialTrace:
    """sup over |z| <= 1 - delta of |f(z) - f(r z)| for each r.

    z -> f(z) - f(rz) is holomorphic, so the sup sits on the sphere |z| = 1 - delta.
    """
    if not 0.0 < delta < 1.0:
        raise HardyError("delta must lie in (0, 1)")
    if scheme is None:
        scheme = default_scheme(n, 2048 if n == 1 else 20_000)
    pts = (1.0 - delta) * sample_sphere(n, scheme)
    base = f(pts)
    radii = tuple(sorted(float(r) for r in radii))
    sups = tuple(float(np.max(np.abs(base - f(r * pts)))) for r in radii)
    return RadialTrace(radii, sups)


class CorpusFunction(NamedTuple):
    label: str
    f: Callable
    norm: float
    center_radius: float | None


def direction_sample(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Unit directions: uniform angles on the circle, seeded sphere samples otherwise."""
    if n == 1:
        return np.exp(2j * np.pi * np.arange(count) / count).reshape(count, 1)
    return sample_sphere(n, sphere_scheme(count, seed))


def unit_corpus(n: int, p: float, shells: Sequence[float] = (0.0, 0.5, 0.9, 0.99),
                directions: int = 16, polynomials: int = 8, degree: int = 4, seed: int = 0,
                scheme: QuadratureScheme | None = None, extra_directions: np.ndarray | None = None):
    """Test functions of unit H^p norm: kernels f_w on radial shells and
    random polynomials normalized by their quadrature H^p norm."""
    dirs = direction_sample(n, directions, seed)
    if extra_directions is not None and len(extra_directions):
        dirs = np.vstack([dirs, extra_directions])
    out = []
    for rho in shells:
        for j, u in enumerate(dirs if rho > 0 else dirs[:1]):
            out.append(CorpusFunction(f"kernel[r={rho},dir={j}]", TestKernel(rho * u, p), 1.0, float(rho)))
    rng = np.random.default_rng(seed)
    for i in range(polynomials):
        poly = random_polynomial(n, degree, rng, density=0.6)
        norm = hp_norm(poly, p, n, scheme, radii=(1.0,)).value
        out.append(CorpusFunction(f"poly[{i}]", poly, norm, None))
    return out
