"""Holomorphic symbols on the closed ball: polynomials in z_1..z_n and, on the
disk, finite Blaschke products. Every symbol extends continuously to the
closed ball, so boundary values are plain evaluations.

A symbol is a callable taking an (N, n) complex array and returning N values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .geometry import (
    TOL_BOUNDARY,
    QuadratureScheme,
    as_points,
    circle_scheme,
    sample_sphere,
    sphere_scheme,
)

SELF_MAP_TOL = 1e-9


class SymbolError(ValueError):
    pass


class DimensionError(SymbolError):
    pass


class SelfMapError(SymbolError):
    def __init__(self, message, check=None):
        super().__init__(message)
        self.check = check


class GatedFeatureError(SymbolError):
    """Raised by inner-function-based features outside the disk."""


class Symbol:
    n: int

    def __call__(self, z) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @property
    def is_inner(self) -> bool:
        return False


def _normalize_alpha(alpha, n: int) -> tuple:
    a = tuple(int(x) for x in np.atleast_1d(alpha))
    if len(a) != n:
        raise DimensionError(f"multi-index {a} has length {len(a)}, expected {n}")
    if any(x < 0 for x in a):
        raise SymbolError(f"multi-index {a} has a negative entry")
    return a


def multi_indices(n: int, max_degree: int, min_degree: int = 0) -> list[tuple]:
    """All multi-indices alpha of length n with min_degree <= |alpha| <= max_degree,
    ordered by total degree, then lexicographically descending."""
    out = []
    for s in range(min_degree, max_degree + 1):
        out.extend(_compositions(s, n))
    return out


def _compositions(s: int, n: int) -> list[tuple]:
    if n == 1:
        return [(s,)]
    return [(a,) + rest for a in range(s, -1, -1) for rest in _compositions(s - a, n - 1)]


class PolynomialSymbol(Symbol):
    """sum_alpha c(alpha) z^alpha with exact zero coefficients dropped."""

    def __init__(self, n: int, terms: Mapping = ()):
        if n < 1:
            raise SymbolError("dimension must be >= 1")
        self.n = int(n)
        clean = {}
        for alpha, c in dict(terms).items():
            a = _normalize_alpha(alpha, self.n)
            c = complex(c)
            if c != 0:
                clean[a] = clean.get(a, 0) + c
        self.terms = {a: c for a, c in clean.items() if c != 0}

    @classmethod
    def constant(cls, c, n: int = 1) -> "PolynomialSymbol":
        return cls(n, {(0,) * n: c})

    @classmethod
    def coordinate(cls, j: int, n: int) -> "PolynomialSymbol":
        alpha = [0] * n
        alpha[j] = 1
        return cls(n, {tuple(alpha): 1.0})

    @classmethod
    def from_coeffs(cls, coeffs: Sequence) -> "PolynomialSymbol":
        """Disk polynomial sum_k coeffs[k] z^k."""
        return cls(1, {(k,): c for k, c in enumerate(coeffs)})

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    @property
    def is_inner(self) -> bool:
        """Unimodular monomials c z^k (k >= 1) on the disk."""
        if self.n != 1 or len(self.terms) != 1:
            return False
        (alpha, c), = self.terms.items()
        return alpha[0] > 0 and abs(abs(c) - 1.0) < 1e-14

    def __call__(self, z) -> np.ndarray:
        z = as_points(z, self.n)
        out = np.zeros(z.shape[0], dtype=complex)
        if not self.terms:
            return out
        top = np.max(np.array(list(self.terms)), axis=0)
        pw = [z[:, j, None] ** np.arange(top[j] + 1) for j in range(self.n)]
        for alpha, c in self.terms.items():
            t = np.full(z.shape[0], c, dtype=complex)
            for j, a in enumerate(alpha):
                if a:
                    t *= pw[j][:, a]
            out += t
        return out

    def __add__(self, other):
        if not isinstance(other, PolynomialSymbol):
            other = PolynomialSymbol.constant(other, self.n)
        if other.n != self.n:
            raise DimensionError("cannot add polynomials of different dimension")
        terms = dict(self.terms)
        for a, c in other.terms.items():
            terms[a] = terms.get(a, 0) + c
        return PolynomialSymbol(self.n, terms)

    __radd__ = __add__

    def __neg__(self):
        return PolynomialSymbol(self.n, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, PolynomialSymbol):
            if other.n != self.n:
                raise DimensionError("cannot multiply polynomials of different dimension")
            terms: dict = {}
            for (a, c), (b, d) in product(self.terms.items(), other.terms.items()):
                k = tuple(x + y for x, y in zip(a, b))
                terms[k] = terms.get(k, 0) + c * d
            return PolynomialSymbol(self.n, terms)
        return PolynomialSymbol(self.n, {a: c * other for a, c in self.terms.items()})

    __rmul__ = __mul__

    def dilate(self, r: float) -> "PolynomialSymbol":
        """The polynomial z -> p(r z)."""
        return PolynomialSymbol(self.n, {a: c * r ** sum(a) for a, c in self.terms.items()})

    def __eq__(self, other):
        return isinstance(other, PolynomialSymbol) and other.n == self.n and other.terms == self.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __repr__(self):
        return f"PolynomialSymbol(n={self.n}, terms={self.terms})"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "kind": "poly",
            "terms": [{"alpha": list(a), "re": c.real, "im": c.imag} for a, c in sorted(self.terms.items())],
        }


class BlaschkeSymbol(Symbol):
    """e^{i theta} prod_j (z - a_j) / (1 - conj(a_j) z) on the disk."""

    n = 1

    def __init__(self, zeros: Sequence = (), theta: float = 0.0):
        self.zeros = tuple(complex(a) for a in zeros)
        self.theta = float(theta)
        for a in self.zeros:
            if abs(a) >= 1.0:
                raise SymbolError(f"Blaschke zero {a} is not inside the disk")

    @property
    def is_inner(self) -> bool:
        return True

    def __call__(self, z) -> np.ndarray:
        z = as_points(z, 1)[:, 0]
        out = np.full(z.shape, np.exp(1j * self.theta), dtype=complex)
        for a in self.zeros:
            out *= (z - a) / (1.0 - np.conj(a) * z)
        return out

    def __repr__(self):
        return f"BlaschkeSymbol(zeros={list(self.zeros)}, theta={self.theta})"

    def __eq__(self, other):
        return isinstance(other, BlaschkeSymbol) and other.zeros == self.zeros and other.theta == self.theta

    def __hash__(self):
        return hash((self.zeros, self.theta))

    def to_dict(self) -> dict:
        return {"n": 1, "kind": "blaschke", "zeros": [[a.real, a.imag] for a in self.zeros], "theta": self.theta}


class DilatedSymbol(Symbol):
    """z -> base(r z)."""

    def __init__(self, base: Symbol, r: float):
        self.base = base
        self.r = float(r)
        self.n = base.n

    def __call__(self, z) -> np.ndarray:
        return self.base(self.r * as_points(z, self.n))

    def __repr__(self):
        return f"DilatedSymbol({self.base!r}, r={self.r})"

    def to_dict(self) -> dict:
        return {"n": self.n, "kind": "dilated", "r": self.r, "base": self.base.to_dict()}


class PowerSymbol(Symbol):
    def __init__(self, base: Symbol, m: int):
        self.base = base
        self.m = int(m)
        self.n = base.n

    @property
    def is_inner(self) -> bool:
        return self.base.is_inner

    def __call__(self, z) -> np.ndarray:
        return self.base(z) ** self.m

    def to_dict(self) -> dict:
        return {"n": self.n, "kind": "power", "m": self.m, "base": self.base.to_dict()}


class WeightedComposition(Symbol):
    """z -> psi(z) * f(phi(z)), the image of f under the weighted composition operator."""

    def __init__(self, psi: Symbol, phi: "BallSelfMap", f):
        if psi.n != phi.n:
            raise DimensionError("weight and self-map live in different dimensions")
        self.psi = psi
        self.phi = phi
        self.f = f
        self.n = psi.n

    def __call__(self, z) -> np.ndarray:
        z = as_points(z, self.n)
        return self.psi(z) * self.f(self.phi(z))


def evaluate(sym: Symbol, z):
    """Evaluate a symbol at one point (returns a complex) or a batch (returns an array)."""
    single = np.ndim(z) == 0 or (np.ndim(z) == 1 and sym.n > 1)
    if np.ndim(z) == 1 and sym.n > 1 and np.shape(z)[0] != sym.n:
        raise DimensionError(f"point of dimension {np.shape(z)[0]} for a symbol on C^{sym.n}")
    try:
        vals = sym(as_points(z, sym.n))
    except ValueError as exc:
        if "dimension" in str(exc):
            raise DimensionError(str(exc)) from exc
        raise
    return complex(vals[0]) if single else vals


def power(sym: Symbol, m: int) -> Symbol:
    """A symbol evaluating to sym(z)**m."""
    if m < 0:
        raise SymbolError("power must be nonnegative")
    if m == 0:
        return PolynomialSymbol.constant(1.0, sym.n)
    if m == 1:
        return sym
    if isinstance(sym, BlaschkeSymbol):
        return BlaschkeSymbol(sym.zeros * m, m * sym.theta)
    if isinstance(sym, PolynomialSymbol):
        result, base, k = PolynomialSymbol.constant(1.0, sym.n), sym, m
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result
    return PowerSymbol(sym, m)


# --- self-maps ---------------------------------------------------------------


@dataclass(frozen=True)
class SelfMapCheck:
    ok: bool
    max_modulus: float
    worst_node: tuple
    tol: float

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "max_modulus": self.max_modulus,
            "worst_node": [[c.real, c.imag] for c in self.worst_node],
            "tol": self.tol,
        }


@dataclass(frozen=True)
class BallSelfMap:
    components: tuple
    check: SelfMapCheck | None = field(default=None, compare=False)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise SymbolError("a self-map needs at least one component")
        n = len(comps)
        for c in comps:
            if c.n != n:
                raise DimensionError(f"component on C^{c.n} in a self-map of B_{n}")
        object.__setattr__(self, "components", comps)

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def validated(self) -> bool:
        return self.check is not None and self.check.ok

    def __call__(self, z) -> np.ndarray:
        z = as_points(z, self.n)
        return np.stack([c(z) for c in self.components], axis=1)

    def validate(self, scheme: QuadratureScheme | None = None, tol: float = SELF_MAP_TOL) -> "BallSelfMap":
        check = validate_self_map(self, scheme, tol)
        if not check.ok:
            raise SelfMapError(f"not a self-map of the ball: max |phi| = {check.max_modulus:.12g}", check)
        return BallSelfMap(self.components, check)

    @classmethod
    def identity(cls, n: int = 1) -> "BallSelfMap":
        return cls(tuple(PolynomialSymbol.coordinate(j, n) for j in range(n))).validate()

    def to_list(self) -> list:
        return [c.to_dict() for c in self.components]


def validation_nodes(n: int, scheme: QuadratureScheme | None = None) -> np.ndarray:
    """Boundary nodes for sup checks. Monte Carlo node sets are augmented with
    rotated coordinate points e^{it} e_j, where polynomial maps often peak."""
    if scheme is None:
        scheme = circle_scheme(8192) if n == 1 else sphere_scheme(50_000, seed=20_241)
    nodes = sample_sphere(n, scheme)
    if n > 1:
        phases = np.exp(2j * np.pi * np.arange(64) / 64)
        extra = np.zeros((n * phases.size, n), dtype=complex)
        for j in range(n):
            extra[j * phases.size:(j + 1) * phases.size, j] = phases
        nodes = np.vstack([nodes, extra])
    return nodes


def validate_self_map(phi: BallSelfMap, scheme: QuadratureScheme | None = None,
                      tol: float = SELF_MAP_TOL) -> SelfMapCheck:
    """Maximum principle: |phi| <= 1 on the ball iff it holds on the sphere."""
    nodes = validation_nodes(phi.n, scheme)
    mod = np.linalg.norm(phi(nodes), axis=1)
    i = int(np.argmax(mod))
    return SelfMapCheck(bool(mod[i] <= 1.0 + tol), float(mod[i]), tuple(complex(c) for c in nodes[i]), tol)


def self_map(*components: Symbol, scheme: QuadratureScheme | None = None, tol: float = SELF_MAP_TOL) -> BallSelfMap:
    """Build and validate a self-map from its coordinate symbols."""
    return BallSelfMap(tuple(components)).validate(scheme, tol)


def radial_scale(phi: BallSelfMap, r: float, scheme: QuadratureScheme | None = None) -> BallSelfMap:
    """The map z -> phi(r z). The attached check records the measured boundary sup."""
    if not 0.0 < r < 1.0:
        raise SymbolError(f"radial scale r must lie in (0, 1), got {r}")
    if not phi.validated:
        raise SelfMapError("radial_scale needs a validated self-map")
    comps = tuple(c.dilate(r) if isinstance(c, PolynomialSymbol) else DilatedSymbol(c, r) for c in phi.components)
    return BallSelfMap(comps).validate(scheme, tol=TOL_BOUNDARY)


# --- serialization -----------------------------------------------------------


def _complex_from(x) -> complex:
    if isinstance(x, Mapping):
        return complex(x.get("re", 0.0), x.get("im", 0.0))
    if isinstance(x, (list, tuple)):
        return complex(x[0], x[1])
    return complex(x)


def symbol_from_dict(d: Mapping) -> Symbol:
    try:
        kind = d["kind"]
        n = int(d.get("n", 1))
        if kind == "poly":
            return PolynomialSymbol(n, {tuple(t["alpha"]): complex(t.get("re", 0.0), t.get("im", 0.0))
                                        for t in d["terms"]})
        if kind == "blaschke":
            if n != 1:
                raise GatedFeatureError("Blaschke symbols exist only on the disk (n = 1)")
            return BlaschkeSymbol([_complex_from(a) for a in d.get("zeros", [])], float(d.get("theta", 0.0)))
        if kind == "dilated":
            return DilatedSymbol(symbol_from_dict(d["base"]), float(d["r"]))
        if kind == "power":
            return power(symbol_from_dict(d["base"]), int(d["m"]))
    except (KeyError, TypeError) as exc:
        raise SymbolError(f"malformed symbol entry: {exc!r}") from exc
    raise SymbolError(f"unknown symbol kind {kind!r}")


def pair_from_dict(d: Mapping) -> tuple[Symbol, BallSelfMap]:
    """{"psi": symbol, "phi": [symbol, ...]} -> (psi, validated phi)."""
    try:
        psi = symbol_from_dict(d["psi"])
        phi_entries = d["phi"]
    except KeyError as exc:
        raise SymbolError(f"pair is missing {exc}") from exc
    if isinstance(phi_entries, Mapping):
        phi_entries = [phi_entries]
    phi = BallSelfMap(tuple(symbol_from_dict(e) for e in phi_entries))
    if phi.n != psi.n:
        raise DimensionError(f"psi lives on C^{psi.n} but phi on C^{phi.n}")
    return psi, phi.validate()


def pair_to_dict(psi: Symbol, phi: BallSelfMap) -> dict:
    return {"psi": psi.to_dict(), "phi": phi.to_list()}


def load_pair(path) -> tuple[Symbol, BallSelfMap]:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SymbolError(f"{path}: not valid JSON ({exc})") from exc
    return pair_from_dict(data)


def random_polynomial(n: int, degree: int, rng: np.random.Generator, density: float = 1.0) -> PolynomialSymbol:
    """Complex Gaussian coefficients on a random subset of monomials of degree <= ``degree``."""
    terms = {}
    for alpha in multi_indices(n, degree):
        if density >= 1.0 or rng.random() < density:
            terms[alpha] = complex(rng.standard_normal(), rng.standard_normal())
    if not terms:
        terms[(0,) * n] = 1.0
    return PolynomialSymbol(n, terms)
