"""The pullback measure mu_{psi,phi,q} and the extreme set E = {|phi*| = 1}.

mu_{psi,phi,q}(A) is the sigma-integral of |psi|^q over the boundary points
that phi sends into A. On a node set xi_1..xi_N it is realized by atoms at
phi(xi_i) with weights |psi(xi_i)|^q / N, which makes

    integral of g dmu  ==  integral over the sphere of |psi|^q (g o phi) dsigma

hold as an identity between two sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .geometry import QuadratureScheme, default_scheme, node_mean, sample_sphere
from .symbols import SELF_MAP_TOL, BallSelfMap, SelfMapError, Symbol

DEFAULT_EPS = (0.1, 0.05, 0.02, 0.01, 0.005, 0.002)
PULLBACK_RTOL = 1e-10


class PullbackError(ValueError):
    pass


class ConsistencyError(RuntimeError):
    """Two algebraically identical evaluations disagreed."""


# --- limits of monotone schedules -------------------------------------------------


class Limit(NamedTuple):
    value: float
    uncertainty: float
    exponent: float | None = None

    def is_zero(self, atol: float = 1e-9) -> bool:
        """True when 0 lies within two uncertainties of the estimate."""
        return self.value <= 2 * self.uncertainty + atol

    def to_dict(self) -> dict:
        return {"value": self.value, "uncertainty": self.uncertainty, "fit_exponent": self.exponent}


_EXPONENTS = np.geomspace(0.1, 3.0, 120)


def _fit_at(x: np.ndarray, y: np.ndarray, a: float):
    A = np.column_stack([np.ones_like(x), x ** a])
    pinv = np.linalg.pinv(A)
    sol = pinv @ y
    res = y - A @ sol
    return float(res @ res), sol, res, pinv


def _power_fit(x: np.ndarray, y: np.ndarray):
    """Least-squares fit y ~ L + c x^a with c >= 0.

    The exponent is scanned on a log grid and then polished by golden-section
    search between the neighbours of the best grid point. Returns
    (L, worst residual, a, gain) or None, where gain is the l1 norm of the
    linear map y -> L, i.e. how much per-entry errors can move L.
    """
    scores = []
    for a in _EXPONENTS:
        sse, sol, _, _ = _fit_at(x, y, a)
        scores.append(sse if sol[1] >= 0 else np.inf)
    scores = np.asarray(scores)
    if not np.isfinite(scores).any():
        return None
    i = int(np.argmin(scores))
    lo, hi = _EXPONENTS[max(i - 1, 0)], _EXPONENTS[min(i + 1, len(_EXPONENTS) - 1)]
    g = (math.sqrt(5) - 1) / 2
    best_a, best_sse = float(_EXPONENTS[i]), float(scores[i])
    for _ in range(60):
        a1, a2 = hi - g * (hi - lo), lo + g * (hi - lo)
        s1, s2 = _fit_at(x, y, a1)[0], _fit_at(x, y, a2)[0]
        if s1 <= s2:
            hi = a2
        else:
            lo = a1
    a = 0.5 * (lo + hi)
    sse, sol, res, pinv = _fit_at(x, y, a)
    if sol[1] < 0 or sse > best_sse:
        sse, sol, res, pinv = _fit_at(x, y, best_a)
        a = best_a
    return float(sol[0]), float(np.max(np.abs(res))), float(a), float(np.sum(np.abs(pinv[0])))


def extrapolate_limit(x: Sequence[float], y: Sequence[float], stderr: float = 0.0,
                      resolution: float = 0.0, tail: int = 4, nonneg: bool = True) -> Limit:
    """Limit of y as x -> 0 for a sequence that decreases (weakly) as x decreases.

    Fits y = L + c x^a (c >= 0) to the ``tail`` smallest-x entries. The
    uncertainty adds the worst fit residual, the change in L when one more
    entry joins the fit, and the sampling error and node resolution of the
    entries propagated through the fit. Without a usable fit the last two
    entries are averaged.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(-x)
    x, y = x[order], y[order]
    if x.size == 0:
        raise PullbackError("cannot extrapolate an empty schedule")
    if x.size < 3 or np.ptp(y[-tail:]) <= 1e-14 * max(1.0, abs(y[-1])):
        last = y[-2:]
        return Limit(float(last.mean()), float(np.ptp(last) / 2 + stderr + resolution), None)
    fit = _power_fit(x[-tail:], y[-tail:])
    if fit is None:
        last = y[-2:]
        return Limit(float(last.mean()), float(np.ptp(last) / 2 + stderr + resolution), None)
    value, resid, a, gain = fit
    spread = 0.0
    if x.size > tail:
        wider = _power_fit(x[-tail - 1:], y[-tail - 1:])
        if wider is not None:
            spread = abs(wider[0] - value)
    value = min(value, float(y[-1]))
    if nonneg:
        value = max(value, 0.0)
    return Limit(value, resid + spread + gain * (stderr + resolution), a)


# --- the measure --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EmpiricalPullbackMeasure:
    q: float
    locations: np.ndarray
    weights: np.ndarray
    nodes: np.ndarray = field(repr=False)
    psi: Symbol = field(repr=False)
    phi: BallSelfMap = field(repr=False)
    scheme: QuadratureScheme = field(repr=False)

    @property
    def n(self) -> int:
        return self.locations.shape[1]

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.locations, axis=1)

    def integrate(self, g: Callable) -> float:
        vals = np.asarray(g(self.locations), dtype=float)
        if np.any(vals < 0):
            raise PullbackError("integrand must be nonnegative on the closed ball")
        return float(np.sum(self.weights * vals))

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "scheme": self.scheme.to_config(),
            "total_mass": self.total_mass,
            "atoms": [{"loc": [[c.real, c.imag] for c in loc], "w": float(w)}
                      for loc, w in zip(self.locations, self.weights)],
        }


def build_pullback(psi: Symbol, phi: BallSelfMap, q: float,
                   scheme: QuadratureScheme | None = None) -> EmpiricalPullbackMeasure:
    if not phi.validated:
        raise SelfMapError("build_pullback needs a validated self-map")
    if not q > 0:
        raise PullbackError(f"exponent q must be positive, got {q}")
    if psi.n != phi.n:
        raise PullbackError("weight and self-map live in different dimensions")
    scheme = scheme or default_scheme(phi.n)
    nodes = sample_sphere(phi.n, scheme)
    locations = phi(nodes)
    if np.max(np.linalg.norm(locations, axis=1)) > 1.0 + SELF_MAP_TOL:
        raise PullbackError("atom outside the closed ball; the self-map check is stale")
    weights = np.abs(psi(nodes)) ** q / nodes.shape[0]
    node_mean(weights, scheme, nodes)  # raises on non-finite weights
    return EmpiricalPullbackMeasure(float(q), locations, weights, nodes, psi, phi, scheme)


class PullbackIntegral(NamedTuple):
    value: float
    boundary_value: float
    rel_diff: float


def integrate_pullback(mu: EmpiricalPullbackMeasure, g: Callable, rtol: float = PULLBACK_RTOL) -> PullbackIntegral:
    """Atom sum of g against mu, cross-checked against the boundary integral
    of |psi|^q (g o phi) recomputed from the symbols."""
    value = mu.integrate(g)
    nodes = sample_sphere(mu.n, mu.scheme)
    boundary = node_mean(np.abs(mu.psi(nodes)) ** mu.q * np.asarray(g(mu.phi(nodes)), dtype=float), mu.scheme)
    bval = float(boundary.value.real)
    scale = max(abs(value), abs(bval))
    rel = abs(value - bval) / scale if scale > 0 else 0.0
    if rel > rtol:
        raise ConsistencyError(f"atom sum {value!r} and boundary integral {bval!r} differ by {rel:.3g} (relative)")
    return PullbackIntegral(value, bval, rel)


# --- the extreme set ---------------------------------------------------------------


@dataclass(frozen=True)
class ExtremeSetProfile:
    q: float
    eps: tuple
    sigma_masses: tuple
    mu_masses: tuple
    sigma_stderr: tuple
    mu_stderr: tuple
    sigma_limit: Limit
    mu_limit: Limit

    def rows(self) -> list[dict]:
        return [{"eps": e, "sigma": s, "sigma_err": se, "mu": m, "mu_err": me}
                for e, s, m, se, me in zip(self.eps, self.sigma_masses, self.mu_masses,
                                           self.sigma_stderr, self.mu_stderr)]

    def to_dict(self) -> dict:
        return {"q": self.q, "rows": self.rows(), "sigma_E": self.sigma_limit.to_dict(),
                "mu_phi_E": self.mu_limit.to_dict()}


def _check_schedule(eps: Sequence[float]) -> tuple:
    eps = tuple(float(e) for e in eps)
    if not eps:
        raise PullbackError("empty epsilon schedule")
    if any(not 0 < e < 1 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise PullbackError(f"epsilon schedule must be strictly decreasing in (0, 1): {eps}")
    return eps


def threshold_profile(radii: np.ndarray, weights: np.ndarray, eps: Sequence[float],
                      scheme: QuadratureScheme):
    """Per-eps node means of weights * [radius >= 1 - eps], with standard errors."""
    N = radii.size
    means, errs = [], []
    for e in eps:
        est = node_mean(weights * (radii >= 1.0 - e), scheme)
        means.append(float(est.value.real))
        errs.append(est.stderr)
    return means, errs, (1.0 / N if scheme.deterministic else 0.0)


def extreme_profile(psi: Symbol, phi: BallSelfMap, q: float, eps: Sequence[float] = DEFAULT_EPS,
                    scheme: QuadratureScheme | None = None) -> ExtremeSetProfile:
    """sigma(E_eps) and the integral of |psi|^q over E_eps, E_eps = {|phi(xi)| >= 1 - eps}.

    The limits as eps -> 0 estimate sigma(E) and mu_{psi,phi,q}(phi(E)); the
    extreme set itself is never tested by float equality |phi| == 1.
    """
    eps = _check_schedule(eps)
    scheme = scheme or default_scheme(phi.n)
    nodes = sample_sphere(phi.n, scheme)
    if nodes.shape[0] == 0:
        raise PullbackError("empty node set")
    mod = np.linalg.norm(phi(nodes), axis=1)
    wq = np.abs(psi(nodes)) ** q
    s_mass, s_err, res = threshold_profile(mod, np.ones_like(mod), eps, scheme)
    m_mass, m_err, _ = threshold_profile(mod, wq, eps, scheme)
    wmax = float(np.max(wq)) if wq.size else 0.0
    return ExtremeSetProfile(
        float(q), eps, tuple(s_mass), tuple(m_mass), tuple(s_err), tuple(m_err),
        extrapolate_limit(eps, s_mass, s_err[-1], res),
        extrapolate_limit(eps, m_mass, m_err[-1], res * wmax),
    )


def pullback_extreme_mass(profile: ExtremeSetProfile) -> Limit:
    """mu_{psi,phi,q}(phi(E)) as the eps -> 0 limit of the integral of |psi|^q over E_eps."""
    return profile.mu_limit
