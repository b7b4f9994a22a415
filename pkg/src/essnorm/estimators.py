"""Essential-norm values and bounds for W f = psi * (f o phi), and the
boundedness / compactness classifiers built on them.

Every estimator returns an EstimateReport that names the criterion it
applies (see CRITERIA), the quantity that decides compactness, and the
traces and seeds needed to reproduce it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .geometry import QuadratureScheme, as_points, circle_scheme, default_scheme, sample_sphere
from .hardy import (
    expand_boundary_function,
    hp_norm,
    direction_sample,
    unit_corpus,
)
from .pullback import (
    DEFAULT_EPS,
    ExtremeSetProfile,
    Limit,
    extrapolate_limit,
    extreme_profile,
)
from .symbols import (
    BallSelfMap,
    GatedFeatureError,
    PolynomialSymbol,
    SelfMapError,
    Symbol,
    power,
)

DEFAULT_DELTAS = (0.1, 0.05, 0.03, 0.01, 0.005, 0.003, 0.001)
RADIUS_CAP = 1.0 - 1e-6

CRITERIA = {
    "hinf-h2-exact": "H^inf -> H^2, psi in H^2: ||W||_e = mu_{psi,phi,2}(phi(E))^(1/2)",
    "hinf-h2-compact": "H^inf -> H^2: compact iff psi in H^2 and sigma(E) = 0",
    "hinf-hq-bracket": "H^inf -> H^q, q > 1: mu_q(phi(E))^(1/q) / 2 <= ||W||_e <= 2 mu_q(phi(E))^(1/q)",
    "hinf-hq-compact": "H^inf -> H^q: compact iff sigma(E) = 0",
    "hp-hq-lower": "H^p -> H^q, 1 < p < inf, W bounded: ||W||_e >= mu_q(phi(E))^(1/q)",
    "hp-hq-compact-necessary": "H^p -> H^q compact implies sigma(E) = 0",
    "hp-hq-interp-upper": ("1 < q < p < inf, r > q, W: H^p -> H^r bounded: "
                           "||W||_e <= ||P|| ||W||_{p,r} sigma(E)^((r-q)/(qr))"),
    "hp-hinf-bounded": "H^p -> H^inf: bounded iff sup_z |psi(z)| / (1 - |phi(z)|^2)^(n/p) < inf",
    "hp-hinf-bracket": ("H^p -> H^inf, p > 1: L <= ||W||_e <= 2 L, L = lim_{delta -> 0} "
                        "sup_{dist(phi(z), S) < delta} |psi(z)| / (1 - |phi(z)|^2)^(n/p)"),
    "hp-hinf-compact": "H^p -> H^inf bounded: compact iff L = 0",
    "empty-region": "||phi||_inf < 1: the near-boundary region is empty and L is set to 0",
    "truncation-decay": "||Q_k W(g^m)||_2 <= C s^m, s = max |g o phi| on the polydisc of radius 1/(2n)",
    "carleson-equivalence": ("0 < p <= q < inf: W bounded H^p -> H^q iff mu_{psi,phi,q} is (q/p)-Carleson "
                             "iff the Berezin-type transform of mu is bounded"),
    "carleson-compact": "0 < p <= q < inf: W compact iff mu_{psi,phi,q} is vanishing (q/p)-Carleson",
    "berezin-lower": "||W||_e >= limsup_{|w| -> 1} (Berezin-type transform of mu at w)^(1/q)",
    "berezin-compact": "0 < p <= q < inf: W compact iff the Berezin-type transform tends to 0 at the boundary",
    "carleson-boundary-mass": "W bounded H^p -> H^q with p < q implies mu_{psi,phi,q}(phi(E)) = 0",
    "pullback-identity": "integral of g dmu_{psi,phi,q} = integral of |psi|^q (g o phi) dsigma",
}


class EstimatorError(ValueError):
    pass


class PreconditionError(EstimatorError):
    pass


class DegreeBudgetError(EstimatorError):
    pass


def _setting(p, q, n) -> dict:
    return {"p": float(p), "q": float(q), "n": int(n)}


@dataclass
class EstimateReport:
    criterion: str
    setting: dict
    lower: float | None = None
    upper: float | None = None
    exact: float | None = None
    uncertainty: float = 0.0
    deciding: Limit | None = None
    deciding_name: str | None = None
    heuristic: bool = False
    witnesses: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    seeds: dict = field(default_factory=dict)
    related: list = field(default_factory=list)

    @property
    def citations(self) -> dict:
        keys = [self.criterion] + [k for k in self.related if k != self.criterion]
        return {k: CRITERIA[k] for k in keys}

    def ordered(self, slack: float = 0.0) -> bool:
        """lower <= exact <= upper (where present) within the combined uncertainty; all values >= 0."""
        tol = 2 * self.uncertainty + slack + 1e-12
        vals = [v for v in (self.lower, self.exact, self.upper) if v is not None]
        if any(v < 0 for v in vals):
            return False
        return all(a <= b + tol for a, b in zip(vals, vals[1:]))

    def to_dict(self) -> dict:
        return {
            "setting": self.setting,
            "lower": self.lower,
            "upper": self.upper,
            "exact": self.exact,
            "uncertainty": self.uncertainty,
            "heuristic": self.heuristic,
            "deciding": None if self.deciding is None else {"quantity": self.deciding_name,
                                                             **self.deciding.to_dict()},
            "witnesses": self.witnesses,
            "traces": self.traces,
            "notes": list(self.notes),
            "seeds": self.seeds,
            "criterion_citations": self.citations,
        }


def _root(lim: Limit, q: float) -> tuple[float, float]:
    """(value^(1/q), propagated uncertainty). Near zero the bound comes from value + uncertainty."""
    v = max(lim.value, 0.0)
    root = v ** (1.0 / q)
    hi = (v + lim.uncertainty) ** (1.0 / q)
    lo = max(v - lim.uncertainty, 0.0) ** (1.0 / q)
    return root, max(hi - root, root - lo)


def _profile(psi, phi, q, eps, scheme) -> ExtremeSetProfile:
    if not phi.validated:
        raise SelfMapError("estimators need a validated self-map")
    if psi.n != phi.n:
        raise EstimatorError("weight and self-map live in different dimensions")
    return extreme_profile(psi, phi, q, eps, scheme)


def _scheme_seeds(scheme: QuadratureScheme) -> dict:
    return {"quadrature": scheme.to_config()}


# --- H^inf -> H^q ----------------------------------------------------------------


def essnorm_exact_hinf_h2(psi: Symbol, phi: BallSelfMap, scheme: QuadratureScheme | None = None,
                          eps: Sequence[float] = DEFAULT_EPS) -> EstimateReport:
    """||W||_e on H^inf -> H^2 as the square root of mu_{psi,phi,2}(phi(E))."""
    scheme = scheme or default_scheme(phi.n)
    prof = _profile(psi, phi, 2.0, eps, scheme)
    value, unc = _root(prof.mu_limit, 2.0)
    return EstimateReport(
        "hinf-h2-exact", _setting(math.inf, 2, phi.n), exact=value, lower=value, upper=value,
        uncertainty=unc, deciding=prof.sigma_limit, deciding_name="sigma(E)",
        witnesses={"mu_phi_E": prof.mu_limit.to_dict(), "sigma_E": prof.sigma_limit.to_dict()},
        traces={"extreme_profile": prof.rows()}, seeds=_scheme_seeds(scheme),
        related=["hinf-h2-compact"],
    )


def essnorm_bounds_hinf_hq(psi: Symbol, phi: BallSelfMap, q: float, scheme: QuadratureScheme | None = None,
                           eps: Sequence[float] = DEFAULT_EPS) -> EstimateReport:
    """[mu^(1/q) / 2, 2 mu^(1/q)] with mu = mu_{psi,phi,q}(phi(E)); at q = 2 the exact value is attached."""
    if not q > 1:
        raise PreconditionError(f"the H^inf -> H^q bracket needs q > 1, got {q}")
    scheme = scheme or default_scheme(phi.n)
    prof = _profile(psi, phi, q, eps, scheme)
    root, unc = _root(prof.mu_limit, q)
    rep = EstimateReport(
        "hinf-hq-bracket", _setting(math.inf, q, phi.n), lower=0.5 * root, upper=2.0 * root,
        uncertainty=2.0 * unc, deciding=prof.sigma_limit, deciding_name="sigma(E)",
        witnesses={"mu_phi_E": prof.mu_limit.to_dict(), "sigma_E": prof.sigma_limit.to_dict(),
                   "mu_root": root},
        traces={"extreme_profile": prof.rows()}, seeds=_scheme_seeds(scheme),
        related=["hinf-hq-compact"],
    )
    if q == 2:
        rep.exact = root
        rep.related.append("hinf-h2-exact")
    return rep


# --- H^p -> H^q ------------------------------------------------------------------


def essnorm_lower_hp_hq(psi: Symbol, phi: BallSelfMap, p: float, q: float,
                        scheme: QuadratureScheme | None = None, eps: Sequence[float] = DEFAULT_EPS,
                        g: Symbol | None = None, ms: Sequence[int] = (1, 2, 4, 8, 16, 32, 64)) -> EstimateReport:
    """Lower bound mu_q(phi(E))^(1/q) on the disk, with the witness trace ||W(g^m)||_q.

    The witnesses g^m are unit vectors of every H^p that tend to 0 weakly, so
    the liminf of ||W(g^m)||_q bounds the essential norm from below.
    """
    if phi.n != 1:
        raise GatedFeatureError("the H^p -> H^q lower bound uses inner-function witnesses; only n = 1 is supported")
    if not 1 < p < math.inf:
        raise PreconditionError(f"need 1 < p < inf, got p = {p}")
    if not q > 0:
        raise PreconditionError(f"need q > 0, got q = {q}")
    g = g if g is not None else PolynomialSymbol.coordinate(0, 1)
    if not g.is_inner:
        raise PreconditionError("witness function must be inner")
    scheme = scheme or default_scheme(1)
    prof = _profile(psi, phi, q, eps, scheme)
    root, unc = _root(prof.mu_limit, q)
    trace = []
    for m in ms:
        gm = power(g, m)
        img = lambda z, gm=gm: psi(z) * gm(phi(z))
        trace.append({"m": int(m), "norm": hp_norm(img, q, 1, scheme, radii=(1.0,)).value})
    return EstimateReport(
        "hp-hq-lower", _setting(p, q, 1), lower=root, uncertainty=unc,
        deciding=prof.sigma_limit, deciding_name="sigma(E)",
        witnesses={"mu_phi_E": prof.mu_limit.to_dict(), "sigma_E": prof.sigma_limit.to_dict(),
                   "g": g.to_dict(), "witness_norms": trace},
        traces={"extreme_profile": prof.rows()}, seeds=_scheme_seeds(scheme),
        notes=["exponent q is used for the pullback measure throughout"],
        related=["hp-hq-compact-necessary"],
    )


def operator_norm_estimate(psi: Symbol, phi: BallSelfMap, p: float, r: float,
                           scheme: QuadratureScheme | None = None, seed: int = 0, **corpus_kw):
    """max of ||W f||_r over unit-H^p test functions; a lower estimate of ||W||_{p,r}."""
    scheme = scheme or default_scheme(phi.n)
    best, best_label, rows = 0.0, None, []
    for item in unit_corpus(phi.n, p, seed=seed, scheme=scheme, **corpus_kw):
        img = lambda z, f=item.f: psi(z) * f(phi(z))
        val = hp_norm(img, r, phi.n, scheme, radii=(1.0,)).value / item.norm
        rows.append({"label": item.label, "value": val})
        if val > best:
            best, best_label = val, item.label
    return best, best_label, rows


def essnorm_upper_interp(psi: Symbol, phi: BallSelfMap, p: float, q: float, r: float,
                         projection_norm: float | None = None, scheme: QuadratureScheme | None = None,
                         eps: Sequence[float] = DEFAULT_EPS, seed: int = 0, **corpus_kw) -> EstimateReport:
    """||P|| ||W||_{p,r} sigma(E)^((r-q)/(qr)) for 1 < q < p < inf, r > q.

    ||W||_{p,r} is replaced by a corpus maximum, which can only under-estimate
    it, so the result is labelled heuristic.
    """
    if not 1 < q < p < math.inf:
        raise PreconditionError(f"need 1 < q < p < inf, got p = {p}, q = {q}")
    if not r > q:
        raise PreconditionError(f"need r > q, got r = {r}, q = {q}")
    if projection_norm is None:
        if q != 2:
            raise PreconditionError("projection_norm has no default for q != 2")
        projection_norm = 1.0
    scheme = scheme or default_scheme(phi.n)
    prof = _profile(psi, phi, q, eps, scheme)
    sig = prof.sigma_limit
    expo = (r - q) / (q * r)
    notes = ["||W||_{p,r} is a corpus maximum (a lower estimate); the upper bound is heuristic"]
    if r > p:
        notes.append("r exceeds p; only r > q is required")
    if sig.is_zero():
        factor, f_unc = 0.0, 0.0
        wnorm, wlabel, rows = None, None, []
    else:
        factor, f_unc = sig.value ** expo, 0.0
        hi = (sig.value + sig.uncertainty) ** expo
        f_unc = hi - factor
        wnorm, wlabel, rows = operator_norm_estimate(psi, phi, p, r, scheme, seed=seed, **corpus_kw)
    upper = 0.0 if wnorm is None else projection_norm * wnorm * factor
    unc = 0.0 if wnorm is None else projection_norm * wnorm * f_unc
    return EstimateReport(
        "hp-hq-interp-upper", {**_setting(p, q, phi.n), "r": float(r)}, upper=upper, uncertainty=unc,
        deciding=sig, deciding_name="sigma(E)", heuristic=True,
        witnesses={"sigma_E": sig.to_dict(), "projection_norm": projection_norm,
                   "operator_norm_estimate": wnorm, "maximizer": wlabel},
        traces={"corpus": rows, "extreme_profile": prof.rows()},
        seeds={**_scheme_seeds(scheme), "corpus": seed}, notes=notes,
    )


# --- H^p -> H^inf ----------------------------------------------------------------


@dataclass(frozen=True)
class SearchBudget:
    """Staged search parameters.

    Stage k scans the sphere |z| = 1 - 10^-k (k = 1..depth) over
    ``directions`` starting directions plus the best directions of the
    previous stage, then zooms ``levels`` times around the ``top`` best.
    """

    directions: int | None = None
    depth: int = 6
    top: int = 6
    levels: int = 10
    points: int = 21
    seed: int = 0

    def start_directions(self, n: int) -> int:
        if self.directions is not None:
            return self.directions
        return 720 if n == 1 else 4000


def _ratio(psi: Symbol, phi: BallSelfMap, p: float, pts: np.ndarray):
    """|psi| / (1 - |phi|^2)^(n/p) and the distance 1 - |phi| at each point."""
    n = phi.n
    mod_sq = np.sum(np.abs(phi(pts)) ** 2, axis=1)
    gap = 1.0 - mod_sq
    num = np.abs(psi(pts))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / np.where(gap > 0, gap, 1.0) ** (n / p)
    r = np.where(gap > 0, r, np.where(num > 0, np.inf, 0.0))
    return r, 1.0 - np.sqrt(np.clip(mod_sq, 0.0, None))


def _perturb_directions(u: np.ndarray, scale: float, count: int, rng: np.random.Generator) -> np.ndarray:
    n = u.shape[1]
    if n == 1:
        t = np.linspace(-scale, scale, count)
        return (u[:, :1] * np.exp(1j * t)[None, :]).reshape(-1, 1)
    g = rng.standard_normal((u.shape[0], count, 2 * n))
    v = u[:, None, :] + scale * (g[..., :n] + 1j * g[..., n:]) / math.sqrt(2 * n)
    v = v.reshape(-1, n)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _sphere_search(objective, rho: float, dirs: np.ndarray, budget: SearchBudget, rng):
    """Maximize objective(rho * u) over unit directions u; returns (value, direction, top directions)."""
    n = dirs.shape[1]
    vals = objective(rho * dirs)
    scale = 2 * math.pi / max(len(dirs), 1) if n == 1 else 0.5
    cand = dirs
    for _ in range(budget.levels):
        idx = np.argsort(vals)[-budget.top:]
        cand = np.vstack([cand[idx], _perturb_directions(cand[idx], scale, budget.points, rng)])
        vals = objective(rho * cand)
        scale *= 0.3
    idx = np.argsort(vals)[-budget.top:]
    i = int(np.argmax(vals))
    return float(vals[i]), cand[i], cand[idx]


@dataclass
class BoundednessReport:
    p: float
    n: int
    sup: float
    maximizer: tuple
    bounded: bool
    stage_radii: tuple
    stage_values: tuple
    growth: tuple
    seed: int

    @property
    def criterion(self) -> str:
        return "hp-hinf-bounded"

    def to_dict(self) -> dict:
        return {
            "setting": _setting(self.p, math.inf, self.n),
            "sup": self.sup,
            "maximizer": list(self.maximizer),
            "bounded": self.bounded,
            "stages": [{"radius": r, "sup": v} for r, v in zip(self.stage_radii, self.stage_values)],
            "growth": list(self.growth),
            "seeds": {"search": self.seed},
            "criterion_citations": {self.criterion: CRITERIA[self.criterion]},
        }


def boundedness_hp_hinf(psi: Symbol, phi: BallSelfMap, p: float,
                        budget: SearchBudget | None = None) -> BoundednessReport:
    """Staged search for sup |psi| / (1 - |phi|^2)^(n/p).

    log of the ratio is plurisubharmonic where it is finite, so its maximum
    over |z| <= rho sits on |z| = rho and the stage values are
    nondecreasing. The verdict is "unbounded" when the last two stage-to-stage
    growth factors both exceed 2 (or the ratio is infinite somewhere).
    """
    if not 0 < p < math.inf:
        raise PreconditionError(f"need 0 < p < inf, got {p}")
    if psi.n != phi.n:
        raise EstimatorError("weight and self-map live in different dimensions")
    budget = budget or SearchBudget()
    n = phi.n
    rng = np.random.default_rng(budget.seed)
    objective = lambda pts: _ratio(psi, phi, p, pts)[0]
    dirs = direction_sample(n, budget.start_directions(n), budget.seed)

    radii = [0.0, 0.25, 0.5, 0.75] + [1.0 - 10.0 ** -k for k in range(1, budget.depth + 1)]
    carried = np.empty((0, n), dtype=complex)
    best, best_z = -math.inf, None
    stage_values, stage_radii = [], []
    coarse = 0.0
    for k, rho in enumerate(radii):
        val, u, top = _sphere_search(objective, rho, np.vstack([dirs, carried]), budget, rng)
        carried = top
        if val > best:
            best, best_z = val, rho * u
        if k < 4:
            coarse = best
            if k == 3:
                stage_radii.append(0.75)
                stage_values.append(coarse)
            continue
        stage_radii.append(rho)
        stage_values.append(best)
    growth = tuple(b / a if a > 0 else (math.inf if b > 0 else 1.0)
                   for a, b in zip(stage_values, stage_values[1:]))
    unbounded = not math.isfinite(best) or (len(growth) >= 2 and all(g > 2 for g in growth[-2:]))
    return BoundednessReport(float(p), n, float(best), tuple(complex(c) for c in best_z), not unbounded,
                             tuple(stage_radii), tuple(stage_values), growth, budget.seed)


def _clip_ball(z: np.ndarray, cap: float = RADIUS_CAP) -> np.ndarray:
    r = np.linalg.norm(z, axis=1, keepdims=True)
    return np.where(r > cap, z * (cap / np.where(r > 0, r, 1.0)), z)


def _local_search(objective, start: np.ndarray, budget: SearchBudget, rng, scale: float = 0.05):
    """Gaussian zoom in the ball (radius capped) around the best starting points."""
    n = start.shape[1]
    cand = start
    vals = objective(cand)
    for _ in range(budget.levels):
        idx = np.argsort(vals)[-budget.top:]
        base = cand[idx]
        g = rng.standard_normal((base.shape[0], 4 * budget.points, 2 * n))
        new = base[:, None, :] + scale * (g[..., :n] + 1j * g[..., n:]) / math.sqrt(2 * n)
        cand = np.vstack([base, _clip_ball(new.reshape(-1, n))])
        vals = objective(cand)
        scale *= 0.4
    i = int(np.argmax(vals))
    return float(vals[i]), cand[i]


def _region_candidates(n: int, budget: SearchBudget) -> np.ndarray:
    radii = np.concatenate([[0.0, 0.25, 0.5, 0.75], 1.0 - np.geomspace(0.2, 1e-6, 30)])
    count = 512 if n == 1 else 2000
    if budget.directions is not None:
        count = budget.directions
    dirs = direction_sample(n, count, budget.seed)
    return (radii[:, None, None] * dirs[None, :, :]).reshape(-1, n)


def essnorm_bounds_hp_hinf(psi: Symbol, phi: BallSelfMap, p: float,
                           deltas: Sequence[float] = DEFAULT_DELTAS, budget: SearchBudget | None = None,
                           bounded: BoundednessReport | None = None) -> EstimateReport:
    """L(delta) = sup of the ratio over {dist(phi(z), S) < delta}, extrapolated to delta -> 0.

    Reports [L, 2L]. When phi stays a distance >= delta from the sphere the
    region is empty and L(delta) = 0.
    """
    if not p > 1 or math.isinf(p):
        raise PreconditionError(f"the H^p -> H^inf bracket needs 1 < p < inf, got {p}")
    deltas = tuple(float(d) for d in deltas)
    if not deltas or any(b >= a for a, b in zip(deltas, deltas[1:])) or any(not 0 < d < 1 for d in deltas):
        raise PreconditionError(f"delta schedule must be strictly decreasing in (0, 1): {deltas}")
    budget = budget or SearchBudget()
    bounded = bounded or boundedness_hp_hinf(psi, phi, p, budget)
    if not bounded.bounded:
        raise PreconditionError("W is not bounded H^p -> H^inf; the bracket does not apply")
    n = phi.n
    rng = np.random.default_rng(budget.seed + 1)
    phi_sup = phi.check.max_modulus if phi.check is not None else 1.0

    pts = _region_candidates(n, budget)
    ratio, dist = _ratio(psi, phi, p, pts)
    values, argmax, empty = [], [], []
    for d in deltas:
        if 1.0 - phi_sup >= d:
            values.append(0.0)
            argmax.append(None)
            empty.append(True)
            continue

        def objective(z, d=d):
            r, dd = _ratio(psi, phi, p, z)
            return np.where(dd < d, r, -np.inf)

        mask = dist < d
        if not mask.any():
            # walk toward the boundary points where |phi| peaks
            _, z0 = _local_search(lambda z: -_ratio(psi, phi, p, z)[1], pts, budget, rng)
            start = z0[None, :]
        else:
            sub, sv = pts[mask], ratio[mask]
            start = sub[np.argsort(sv)[-budget.top:]]
        val, z = _local_search(objective, start, budget, rng)
        if not math.isfinite(val) or val < 0:
            values.append(0.0)
            argmax.append(None)
            empty.append(True)
            continue
        values.append(val)
        argmax.append(tuple(complex(c) for c in z))
        empty.append(False)

    if all(empty[-2:]):
        lim = Limit(0.0, 0.0, None)
    else:
        lim = extrapolate_limit(deltas, values)
    notes = []
    related = ["hp-hinf-compact", "hp-hinf-bounded"]
    if any(empty):
        related.append("empty-region")
        notes.append("empty near-boundary region for some delta; L(delta) = 0 there")
    return EstimateReport(
        "hp-hinf-bracket", _setting(p, math.inf, n), lower=lim.value, upper=2 * lim.value,
        uncertainty=2 * lim.uncertainty, deciding=lim, deciding_name="L",
        witnesses={"L": lim.to_dict(), "bounded_sup": bounded.sup, "phi_boundary_sup": phi_sup},
        traces={"L_delta": [{"delta": d, "L": v, "argmax": None if a is None else list(a), "empty": e}
                            for d, v, a, e in zip(deltas, values, argmax, empty)],
                "boundedness": bounded.to_dict()},
        seeds={"search": budget.seed}, notes=notes, related=related,
    )


# --- truncated images ------------------------------------------------------------


@dataclass
class TruncationTrace:
    k: int
    ms: tuple
    q_norms: tuple
    r_norms: tuple
    contraction: float
    bound_constant: float
    fitted_rate: float | None
    mu_root: float
    mu_root_uncertainty: float
    tail_fraction: float

    def bound_holds(self, rtol: float = 1e-9) -> bool:
        """||Q_k W(g^m)|| <= C s^m for every m."""
        return all(qv <= self.bound_constant * self.contraction ** m * (1 + rtol) + 1e-14
                   for m, qv in zip(self.ms, self.q_norms))

    def rate_within(self, rel: float = 0.2) -> bool:
        return self.fitted_rate is not None and abs(self.fitted_rate - self.contraction) <= rel * self.contraction

    def r_trace_ok(self, tol: float = 1e-2) -> bool:
        """||R_k W(g^m)|| >= mu^(1/2) - ||Q_k W(g^m)|| - tol."""
        floor = self.mu_root - self.mu_root_uncertainty - tol
        return all(rv >= floor - qv for rv, qv in zip(self.r_norms, self.q_norms))

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "rows": [{"m": m, "Q": qv, "R": rv} for m, qv, rv in zip(self.ms, self.q_norms, self.r_norms)],
            "contraction_s": self.contraction,
            "bound_constant": self.bound_constant,
            "fitted_rate": self.fitted_rate,
            "mu_root": self.mu_root,
            "tail_fraction": self.tail_fraction,
            "criterion_citations": {"truncation-decay": CRITERIA["truncation-decay"]},
        }


def _geometric_rate(ms, vals) -> float | None:
    ms = np.asarray(ms, dtype=float)
    vals = np.asarray(vals, dtype=float)
    keep = vals > 1e-13 * max(vals.max(initial=0.0), 1e-300)
    if keep.sum() < 3:
        return None
    slope = np.polyfit(ms[keep], np.log(vals[keep]), 1)[0]
    return float(math.exp(slope))


def truncated_image_trace(psi: Symbol, phi: BallSelfMap, k: int, g: Symbol | None = None,
                          ms: Sequence[int] = tuple(range(1, 11)), d: int = 64,
                          scheme: QuadratureScheme | None = None,
                          eps: Sequence[float] = DEFAULT_EPS) -> TruncationTrace:
    """H^2 norms of Q_k W(g^m) and R_k W(g^m) on the disk.

    s is the maximum of |g o phi| on the circle of radius 1/2 and
    C = max|psi| * sqrt(sum_{j<=k} 2^(2j)), which makes
    ||Q_k W(g^m)||_2 <= C s^m a Cauchy-estimate bound.
    """
    if phi.n != 1:
        raise GatedFeatureError("truncated_image_trace uses inner witnesses; only n = 1 is supported")
    if k < 0 or d <= k:
        raise DegreeBudgetError(f"need 0 <= k < d, got k = {k}, d = {d}")
    g = g if g is not None else PolynomialSymbol.coordinate(0, 1)
    if not g.is_inner:
        raise PreconditionError("witness function must be inner")
    scheme = scheme or circle_scheme(4096)
    nodes = sample_sphere(1, scheme)
    q_norms, r_norms, worst_tail = [], [], 0.0
    for m in ms:
        gm = power(g, m)
        img = lambda z, gm=gm: psi(z) * gm(phi(z))
        exp = expand_boundary_function(img, 1, d, scheme, nodes)
        total = float(np.mean(np.abs(img(nodes)) ** 2))
        tail = max(total - exp.norm_sq(), 0.0)
        frac = tail / total if total > 0 else 0.0
        worst_tail = max(worst_tail, frac)
        if frac > 0.01:
            raise DegreeBudgetError(f"degree {d} leaves {frac:.3%} of ||W(g^{m})||^2 outside the expansion")
        q_norms.append(exp.truncate_head(k).h2_norm())
        r_norms.append(math.sqrt(max(total - exp.truncate_head(k).norm_sq(), 0.0)))
    inner = 0.5 * nodes
    s = float(np.max(np.abs(g(phi(inner)))))
    c = float(np.max(np.abs(psi(inner))))
    const = c * math.sqrt(sum(4.0 ** j for j in range(k + 1)))
    prof = extreme_profile(psi, phi, 2.0, eps, scheme)
    mu_root, mu_unc = _root(prof.mu_limit, 2.0)
    return TruncationTrace(int(k), tuple(int(m) for m in ms), tuple(q_norms), tuple(r_norms), s, const,
                           _geometric_rate(ms, q_norms), mu_root, mu_unc, worst_tail)


# --- compactness -----------------------------------------------------------------


class Verdict(NamedTuple):
    verdict: str
    criterion: str
    quantity: str | None
    value: float | None
    uncertainty: float | None

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "criterion": self.criterion, "citation": CRITERIA[self.criterion],
                "quantity": self.quantity, "value": self.value, "uncertainty": self.uncertainty}


def _classify(lim: Limit, atol: float = 1e-9) -> str:
    if lim.value <= 2 * lim.uncertainty + atol:
        return "compact"
    if lim.value > 4 * lim.uncertainty + atol:
        return "non-compact"
    return "inconclusive"


def _find(reports, *criteria):
    for rep in reports:
        if getattr(rep, "criterion", None) in criteria:
            return rep
    return None


def compactness_verdict(setting: dict, reports: Sequence) -> Verdict:
    """Compact / non-compact / inconclusive from the deciding quantity of the matching regime.

    p = inf: sigma(E).  q = inf: L.  p <= q < inf: the boundary limit of the
    Berezin-type transform (a Carleson report).  q < p: sigma(E), where
    sigma(E) = 0 decides compactness only together with the interpolation bound.
    """
    p, q = float(setting["p"]), float(setting["q"])
    if math.isinf(p):
        rep = _find(reports, "hinf-h2-exact", "hinf-hq-bracket")
        if rep is None:
            raise PreconditionError("H^inf -> H^q verdict needs an H^inf -> H^q report")
        crit = "hinf-h2-compact" if q == 2 else "hinf-hq-compact"
        lim = rep.deciding
        return Verdict(_classify(lim), crit, rep.deciding_name, lim.value, lim.uncertainty)
    if math.isinf(q):
        rep = _find(reports, "hp-hinf-bracket")
        if rep is None:
            raise PreconditionError("H^p -> H^inf verdict needs an H^p -> H^inf bracket report")
        lim = rep.deciding
        return Verdict(_classify(lim), "hp-hinf-compact", "L", lim.value, lim.uncertainty)
    if p <= q:
        rep = _find(reports, "carleson-equivalence")
        if rep is not None:
            lim = rep.berezin_limit
            return Verdict(_classify(lim), "berezin-compact", "berezin boundary limit", lim.value, lim.uncertainty)
        rep = _find(reports, "hp-hq-lower")
        if rep is None:
            raise PreconditionError("H^p -> H^q verdict needs a Carleson report or an H^p -> H^q lower bound")
        lim = rep.deciding
        v = _classify(lim)
        return Verdict("non-compact" if v == "non-compact" else "inconclusive", "hp-hq-compact-necessary",
                       "sigma(E)", lim.value, lim.uncertainty)
    rep = _find(reports, "hp-hq-interp-upper", "hp-hq-lower")
    if rep is None:
        raise PreconditionError("H^p -> H^q (q < p) verdict needs an interpolation or lower-bound report")
    lim = rep.deciding
    v = _classify(lim)
    if v == "compact":
        if _find(reports, "hp-hq-interp-upper") is None:
            v = "inconclusive"
        crit = "hp-hq-interp-upper"
    else:
        crit = "hp-hq-compact-necessary"
    return Verdict(v, crit, "sigma(E)", lim.value, lim.uncertainty)
