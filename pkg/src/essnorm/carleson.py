"""Carleson-window tests for the pullback measure and the Berezin-type transform

    B(z) = integral of (1 - |z|^2)^(nq/p) / |1 - <w, z>|^(2nq/p) dmu_{psi,phi,q}(w).

B(z) equals ||W f_z||_q^q for the unit test kernel f_z, so the transform is
evaluated both as an atom sum over mu and as a boundary integral of
|psi|^q |f_z o phi|^q, and the two must agree.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .estimators import CRITERIA, EstimatorError, PreconditionError
from .geometry import QuadratureScheme, default_scheme, window_distance
from .hardy import TestKernel, direction_sample, unit_corpus
from .pullback import (
    DEFAULT_EPS,
    ConsistencyError,
    EmpiricalPullbackMeasure,
    Limit,
    build_pullback,
    extrapolate_limit,
    threshold_profile,
)
from .symbols import BallSelfMap, Symbol

BEREZIN_RTOL = 1e-10
DEFAULT_SHELLS = (0.0, 0.5, 0.9, 0.99, 0.999)
DEFAULT_TRACE_RADII = (0.9, 0.99, 0.999, 0.9999)
GROWTH_LIMIT = 2.0


class CarlesonError(ValueError):
    pass


def default_h_grid(n: int) -> tuple:
    """Apertures 2 * 3^-k: k = 0..6 on the disk, k = 0..4 on the ball."""
    return tuple(2.0 * 3.0 ** -k for k in range(7 if n == 1 else 5))


def carleson_scheme(n: int) -> QuadratureScheme:
    return default_scheme(n, 131_072 if n == 1 else 200_000)


def _check_grid(h_grid: Sequence[float]) -> np.ndarray:
    h = np.asarray(sorted(set(float(x) for x in h_grid), reverse=True))
    if h.size == 0 or np.any(h <= 0) or np.any(h > 2):
        raise CarlesonError(f"aperture grid must lie in (0, 2]: {tuple(h_grid)}")
    return h


def _diverges(values: Sequence[float], limit: float = GROWTH_LIMIT) -> bool:
    """Growth factor above ``limit`` across each step of the three finest entries."""
    v = list(values)
    if any(not math.isfinite(x) for x in v):
        return True
    if len(v) < 3:
        return False
    a, b, c = v[-3:]
    return a > 0 and b > limit * a and c > limit * b


def window_centers(mu: EmpiricalPullbackMeasure, count: int, seed: int = 0, top: int = 32) -> np.ndarray:
    """Sampled window centers plus the radial projections of the heaviest atoms."""
    dirs = direction_sample(mu.n, count, seed)
    if mu.weights.size == 0:
        return dirs
    idx = np.argsort(mu.weights * mu.radii ** 8)[-top:]
    loc = mu.locations[idx]
    r = np.linalg.norm(loc, axis=1)
    loc = loc[r > 0] / r[r > 0, None]
    return np.vstack([dirs, loc]) if loc.size else dirs


def window_masses(mu: EmpiricalPullbackMeasure, centers: np.ndarray, h_grid: Sequence[float]) -> np.ndarray:
    """mu(S_h(xi)) for every (h, center), shape (len(h), len(centers))."""
    h = np.asarray(h_grid, dtype=float)
    order = np.argsort(h)
    h_asc = h[order]
    out = np.zeros((h.size, centers.shape[0]))
    for j, xi in enumerate(centers):
        # bin k holds atoms inside exactly the windows with h_asc[i] > dist, i >= k
        k = np.searchsorted(h_asc, window_distance(mu.locations, xi), side="right")
        mass = np.cumsum(np.bincount(k, weights=mu.weights, minlength=h.size + 1)[:h.size])
        out[order, j] = mass
    return out


@dataclass(frozen=True)
class BoxConstant:
    value: float
    argmax_center: tuple
    argmax_h: float
    profile: tuple
    h_grid: tuple
    diverges: bool

    def to_dict(self) -> dict:
        return {"M": self.value, "argmax": {"center": [[c.real, c.imag] for c in self.argmax_center],
                                            "h": self.argmax_h},
                "profile": [{"h": h, "sup": v} for h, v in zip(self.h_grid, self.profile)],
                "diverges": self.diverges}


def box_constant(mu: EmpiricalPullbackMeasure, beta: float, h_grid: Sequence[float] | None = None,
                 centers: int = 256, seed: int = 0) -> BoxConstant:
    """M = max over sampled centers and grid apertures of mu(S_h(xi)) / h^(n beta)."""
    if beta < 1:
        raise CarlesonError(f"beta must be >= 1, got {beta}")
    if mu.weights.size == 0 or mu.total_mass <= 0:
        raise CarlesonError("empty measure")
    h = _check_grid(h_grid if h_grid is not None else default_h_grid(mu.n))
    xis = window_centers(mu, centers, seed)
    ratios = window_masses(mu, xis, h) / h[:, None] ** (mu.n * beta)
    profile = ratios.max(axis=1)
    i, j = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    return BoxConstant(float(ratios[i, j]), tuple(complex(c) for c in xis[j]), float(h[i]),
                       tuple(float(v) for v in profile), tuple(float(x) for x in h), _diverges(profile))


@dataclass(frozen=True)
class VanishingProfile:
    h_grid: tuple
    values: tuple
    M: float
    vanishing: bool

    def to_dict(self) -> dict:
        return {"profile": [{"h": h, "sup": v} for h, v in zip(self.h_grid, self.values)],
                "M": self.M, "vanishing": self.vanishing}


def vanishing_profile(mu: EmpiricalPullbackMeasure, beta: float, h_grid: Sequence[float] | None = None,
                      centers: int = 256, seed: int = 0, box: BoxConstant | None = None) -> VanishingProfile:
    """h -> sup_xi mu(S_h(xi)) / h^(n beta); vanishing when the last three
    entries decrease and the last is below 10% of M."""
    box = box or box_constant(mu, beta, h_grid, centers, seed)
    v = box.profile
    decreasing = len(v) >= 3 and v[-3] >= v[-2] >= v[-1]
    vanishing = bool(decreasing and v[-1] < 0.1 * box.value) or box.value == 0.0
    return VanishingProfile(box.h_grid, v, box.value, vanishing)


# --- Berezin-type transform ---------------------------------------------------------


def _kernel(w: np.ndarray, z: np.ndarray, n: int, p: float, q: float) -> np.ndarray:
    """(1 - |z|^2)^(nq/p) / |1 - <w, z>|^(2nq/p) for atoms w (N, n) and points z (M, n); shape (M, N)."""
    e = n * q / p
    zz = 1.0 - np.sum(np.abs(z) ** 2, axis=1)
    t = 1.0 - np.conj(z) @ w.T
    return zz[:, None] ** e * (t.real ** 2 + t.imag ** 2) ** -e


def berezin_values(mu: EmpiricalPullbackMeasure, p: float, z: np.ndarray, rtol: float = BEREZIN_RTOL,
                   chunk: int = 16) -> np.ndarray:
    """B(z) at each point, computed as an atom sum and as the boundary integral
    of |psi|^q |f_z o phi|^q with psi, phi re-evaluated at the nodes; raises on disagreement."""
    if not p > 0:
        raise CarlesonError("p must be positive")
    z = np.asarray(z, dtype=complex).reshape(-1, mu.n)
    if np.any(np.linalg.norm(z, axis=1) >= 1.0):
        raise CarlesonError("Berezin points must lie in the open ball")
    n, q = mu.n, mu.q
    wq = np.abs(mu.psi(mu.nodes)) ** q
    images = mu.phi(mu.nodes)
    out = np.empty(z.shape[0])
    for s in range(0, z.shape[0], chunk):
        zc = z[s:s + chunk]
        # row sums (not a matmul) so that B(0) reproduces total_mass bit for bit
        atom = np.sum(_kernel(mu.locations, zc, n, p, q) * mu.weights, axis=1)
        e = n * q / p
        t = 1.0 - images @ np.conj(zc).T
        boundary = (1.0 - np.sum(np.abs(zc) ** 2, axis=1)) ** e * np.mean(wq[:, None] * np.abs(t) ** (-2 * e), axis=0)
        scale = np.maximum(np.abs(atom), np.abs(boundary))
        rel = np.where(scale > 0, np.abs(atom - boundary) / np.where(scale > 0, scale, 1.0), 0.0)
        if np.any(rel > rtol):
            i = int(np.argmax(rel))
            raise ConsistencyError(f"Berezin atom sum and boundary integral differ by {rel[i]:.3g} "
                                   f"(relative) at z = {zc[i]}")
        out[s:s + chunk] = atom
    return out


def berezin_grid(n: int, shells: Sequence[float] = DEFAULT_SHELLS, directions: int = 24, seed: int = 0,
                 extra_directions: np.ndarray | None = None) -> np.ndarray:
    dirs = direction_sample(n, directions, seed)
    if extra_directions is not None and len(extra_directions):
        dirs = np.vstack([dirs, extra_directions])
    pts = [np.zeros((1, n), dtype=complex)] if 0.0 in shells else []
    pts += [r * dirs for r in shells if r > 0]
    return np.vstack(pts)


@dataclass(frozen=True)
class BerezinSup:
    value: float
    argmax: tuple
    shells: tuple
    shell_sups: tuple
    at_origin: float
    diverges: bool

    def to_dict(self) -> dict:
        return {"sup": self.value, "argmax": [[c.real, c.imag] for c in self.argmax],
                "shells": [{"r": r, "sup": v} for r, v in zip(self.shells, self.shell_sups)],
                "at_origin": self.at_origin, "diverges": self.diverges}


def _data_directions(mu: EmpiricalPullbackMeasure, top: int = 8) -> np.ndarray:
    return window_centers(mu, 0, 0, top)[-top:] if mu.weights.size else np.empty((0, mu.n))


def berezin_sup(mu: EmpiricalPullbackMeasure, p: float, shells: Sequence[float] = DEFAULT_SHELLS,
                directions: int = 24, seed: int = 0) -> BerezinSup:
    """sup of B over radial shells x directions; the origin entry equals the total mass."""
    shells = tuple(sorted(set(float(r) for r in shells) | {0.0}))
    dirs = direction_sample(mu.n, directions, seed)
    extra = _data_directions(mu)
    if extra.size:
        dirs = np.vstack([dirs, extra])
    sups, best, best_z, origin = [], -math.inf, None, None
    for r in shells:
        pts = np.zeros((1, mu.n), dtype=complex) if r == 0 else r * dirs
        vals = berezin_values(mu, p, pts)
        i = int(np.argmax(vals))
        if r == 0:
            origin = float(vals[0])
        sups.append(float(vals[i]))
        if vals[i] > best:
            best, best_z = float(vals[i]), pts[i]
    return BerezinSup(best, tuple(complex(c) for c in best_z), shells, tuple(sups), origin,
                      _diverges(sups[-3:]))


@dataclass(frozen=True)
class BerezinTrace:
    radii: tuple
    sups: tuple
    limit: Limit
    root_limit: float
    q: float

    def to_dict(self) -> dict:
        return {"trace": [{"r": r, "sup": v} for r, v in zip(self.radii, self.sups)],
                "limit": self.limit.to_dict(), "limit_root_q": self.root_limit}


def berezin_boundary_trace(mu: EmpiricalPullbackMeasure, p: float, radii: Sequence[float] = DEFAULT_TRACE_RADII,
                           directions: int = 24, seed: int = 0) -> BerezinTrace:
    """sup over directions of B(r u) for r -> 1, extrapolated in 1 - r."""
    radii = tuple(float(r) for r in radii)
    if any(b <= a for a, b in zip(radii, radii[1:])) or any(not 0 < r < 1 for r in radii):
        raise CarlesonError(f"radii must increase strictly inside (0, 1): {radii}")
    dirs = direction_sample(mu.n, directions, seed)
    extra = _data_directions(mu)
    if extra.size:
        dirs = np.vstack([dirs, extra])
    sups = tuple(float(np.max(berezin_values(mu, p, r * dirs))) for r in radii)
    x = [1.0 - r for r in radii]
    lim = extrapolate_limit(x, sups)
    lim = Limit(lim.value, max(lim.uncertainty, 1e-12 * max(sups)), lim.exponent)
    return BerezinTrace(radii, sups, lim, max(lim.value, 0.0) ** (1.0 / mu.q), mu.q)


# --- boundedness indicators and the full report ---------------------------------------


def corpus_embedding(psi: Symbol, phi: BallSelfMap, mu: EmpiricalPullbackMeasure, p: float,
                     seed: int = 0, shells: Sequence[float] = (0.0, 0.5, 0.9, 0.99, 0.999),
                     directions: int = 16, polynomials: int = 6, scheme: QuadratureScheme | None = None):
    """Per-shell max of integral |f|^q dmu / ||f||_p^q over unit test functions.

    Returns (overall max, shell sups, per-function rows). The kernels on each
    shell are unit vectors of H^p, so the shell sups grow without bound when
    W is unbounded H^p -> H^q.
    """
    corpus = unit_corpus(mu.n, p, shells=shells, directions=directions, polynomials=polynomials,
                         seed=seed, scheme=scheme, extra_directions=_data_directions(mu))
    q = mu.q
    rows, shell_best = [], {r: 0.0 for r in shells}
    for item in corpus:
        f = item.f
        g = (lambda w, f=f: f.abs_power(w, q)) if isinstance(f, TestKernel) else (lambda w, f=f: np.abs(f(w)) ** q)
        val = mu.integrate(g) / item.norm ** q
        rows.append({"label": item.label, "value": val})
        key = item.center_radius
        if key is not None:
            shell_best[key] = max(shell_best[key], val)
    best = max(r["value"] for r in rows)
    return best, tuple(shell_best[r] for r in shells), rows


@dataclass
class CarlesonReport:
    p: float
    q: float
    n: int
    box: BoxConstant
    vanishing: VanishingProfile
    berezin: BerezinSup
    trace: BerezinTrace
    corpus_max: float
    corpus_shells: tuple
    shells: tuple
    total_mass: float
    seeds: dict
    corpus_rows: list = field(default_factory=list, repr=False)

    criterion = "carleson-equivalence"

    @property
    def beta(self) -> float:
        return self.q / self.p

    @property
    def indicators(self) -> dict:
        """Finiteness of each indicator: True = finite (bounded)."""
        return {"box_constant": not self.box.diverges,
                "berezin_sup": not self.berezin.diverges,
                "corpus_norm": not _diverges(self.corpus_shells[-3:])}

    @property
    def consistent(self) -> bool:
        return len(set(self.indicators.values())) == 1

    @property
    def bounded(self) -> bool | None:
        ind = set(self.indicators.values())
        return ind.pop() if len(ind) == 1 else None

    @property
    def berezin_limit(self) -> Limit:
        return self.trace.limit

    @property
    def compact(self) -> bool | None:
        if not self.bounded:
            return False if self.bounded is False else None
        return self.trace.limit.is_zero()

    def to_dict(self) -> dict:
        return {
            "setting": {"p": self.p, "q": self.q, "n": self.n, "beta": self.beta},
            "total_mass": self.total_mass,
            "box_constant": self.box.to_dict(),
            "vanishing": self.vanishing.to_dict(),
            "berezin": self.berezin.to_dict(),
            "berezin_boundary": self.trace.to_dict(),
            "corpus": {"max": self.corpus_max,
                       "shells": [{"r": r, "sup": v} for r, v in zip(self.shells, self.corpus_shells)]},
            "indicators": self.indicators,
            "consistent": self.consistent,
            "bounded": self.bounded,
            "compact": self.compact,
            "seeds": self.seeds,
            "criterion_citations": {k: CRITERIA[k] for k in
                                    ("carleson-equivalence", "carleson-compact", "berezin-compact", "berezin-lower")},
        }

    def csv_traces(self) -> dict[str, str]:
        """Plot-ready CSV text for the (h, sup) and (r, berezin) traces."""
        out = {}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "sup_ratio"])
        for h, v in zip(self.box.h_grid, self.box.profile):
            w.writerow([repr(h), repr(v)])
        out["box_profile.csv"] = buf.getvalue()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "berezin_sup"])
        for r, v in zip(self.berezin.shells + self.trace.radii, self.berezin.shell_sups + self.trace.sups):
            w.writerow([repr(r), repr(v)])
        out["berezin_trace.csv"] = buf.getvalue()
        return out


def equivalence_report(psi: Symbol, phi: BallSelfMap, p: float, q: float, scheme: QuadratureScheme | None = None,
                       h_grid: Sequence[float] | None = None, centers: int = 256, seed: int = 0,
                       shells: Sequence[float] = DEFAULT_SHELLS, directions: int = 24,
                       trace_radii: Sequence[float] = DEFAULT_TRACE_RADII,
                       corpus_scheme: QuadratureScheme | None = None) -> CarlesonReport:
    """Box constant, vanishing profile, Berezin sup and boundary trace, and a
    direct corpus estimate of the embedding constant, for 0 < p <= q < inf."""
    if not 0 < p <= q < math.inf:
        raise PreconditionError(f"the Carleson tests need 0 < p <= q < inf, got p = {p}, q = {q}")
    if psi.n != phi.n:
        raise EstimatorError("weight and self-map live in different dimensions")
    scheme = scheme or carleson_scheme(phi.n)
    mu = build_pullback(psi, phi, q, scheme)
    beta = q / p
    box = box_constant(mu, beta, h_grid, centers, seed)
    vp = vanishing_profile(mu, beta, box=box)
    bz = berezin_sup(mu, p, shells, directions, seed)
    tr = berezin_boundary_trace(mu, p, trace_radii, directions, seed)
    c_shells = tuple(sorted(set(float(r) for r in shells)))
    cmax, csh, rows = corpus_embedding(psi, phi, mu, p, seed, shells=c_shells,
                                       scheme=corpus_scheme or default_scheme(phi.n, seed=seed))
    return CarlesonReport(float(p), float(q), phi.n, box, vp, bz, tr, cmax, csh, c_shells, mu.total_mass,
                          {"quadrature": scheme.to_config(), "centers": seed, "directions": seed, "corpus": seed},
                          rows)


@dataclass(frozen=True)
class BoundaryMass:
    eps: tuple
    masses: tuple
    limit: Limit

    def vanishes(self) -> bool:
        return self.limit.value <= 2 * self.limit.uncertainty + 1e-12

    def to_dict(self) -> dict:
        return {"rows": [{"eps": e, "mass": m} for e, m in zip(self.eps, self.masses)],
                "limit": self.limit.to_dict(),
                "criterion_citations": {"carleson-boundary-mass": CRITERIA["carleson-boundary-mass"]}}


def boundary_mass_check(mu: EmpiricalPullbackMeasure, eps: Sequence[float] = DEFAULT_EPS) -> BoundaryMass:
    """Mass of the atoms with |w| >= 1 - eps, extrapolated to eps -> 0."""
    eps = tuple(float(e) for e in eps)
    if any(b >= a for a, b in zip(eps, eps[1:])) or any(not 0 < e < 1 for e in eps):
        raise CarlesonError(f"epsilon schedule must be strictly decreasing in (0, 1): {eps}")
    wq = mu.weights * mu.weights.size
    means, errs, res = threshold_profile(mu.radii, wq, eps, mu.scheme)
    return BoundaryMass(eps, tuple(means), extrapolate_limit(eps, means, errs[-1], res * float(np.max(wq))))
