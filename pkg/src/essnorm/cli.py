"""Command-line driver.

    essnorm verify   [--pair FILE] [--tol T]           property suites
    essnorm essnorm  --pair FILE --p X --q Y           essential-norm report
    essnorm carleson --pair FILE --p X --q Y           Carleson / Berezin report (+ CSV traces)
    essnorm bounded  --pair FILE --p X                 H^p -> H^inf boundedness search
    essnorm report   --pair FILE --p X --q Y           everything that applies

Exit codes: 0 success, 1 a check failed or indicators disagree, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import carleson as C
from . import estimators as E
from .geometry import QuadratureScheme, default_scheme, sample_sphere
from .hardy import (
    TestKernel,
    growth_bound_check,
    h2_norm,
    hp_norm,
    radial_convergence_check,
    test_kernel_norm_check,
)
from .pullback import DEFAULT_EPS, ConsistencyError, PullbackError, build_pullback, integrate_pullback
from .serialize import dumps, parse_exponent, write_atomic
from .symbols import (
    BallSelfMap,
    BlaschkeSymbol,
    PolynomialSymbol,
    SymbolError,
    load_pair,
    pair_to_dict,
    random_polynomial,
    self_map,
)

COMMANDS = ("verify", "essnorm", "carleson", "bounded", "report")


class UsageError(Exception):
    pass


class NotCoveredError(UsageError):
    """No estimator covers the requested (p, q) regime."""


@dataclass
class JobConfig:
    command: str
    pair: str | None = None
    p: float | None = None
    q: float | None = None
    r: float | None = None
    samples: int | None = None
    seed: int = 0
    out: str = "."
    eps: tuple = DEFAULT_EPS
    deltas: tuple = E.DEFAULT_DELTAS
    h_grid: tuple | None = None
    tol: float | None = None
    projection_norm: float | None = None
    csv: bool = True
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        for name in ("p", "q", "r"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise UsageError(f"--{name} must be positive, got {v}")
        for name, sched in (("eps", self.eps), ("delta", self.deltas)):
            if not sched or any(b >= a for a, b in zip(sched, sched[1:])) or any(not 0 < x < 1 for x in sched):
                raise UsageError(f"--schedule-{name} must be strictly decreasing in (0, 1): {sched}")
        if self.h_grid is not None:
            h = self.h_grid
            if not h or any(b >= a for a, b in zip(h, h[1:])) or any(not 0 < x <= 2 for x in h):
                raise UsageError(f"--schedule-h must be strictly decreasing in (0, 2]: {h}")
        if self.samples is not None and self.samples < 1:
            raise UsageError("--samples must be positive")
        if self.tol is not None and not self.tol > 0:
            raise UsageError("--tol must be positive")

    def scheme(self, n: int) -> QuadratureScheme:
        return default_scheme(n, self.samples, self.seed)

    def to_dict(self) -> dict:
        return {"command": self.command, "pair": self.pair, "p": self.p, "q": self.q, "r": self.r,
                "samples": self.samples, "seed": self.seed, "schedule_eps": list(self.eps),
                "schedule_delta": list(self.deltas),
                "schedule_h": None if self.h_grid is None else list(self.h_grid), "tol": self.tol}


# --- argument parsing ------------------------------------------------------------------


def _schedule(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad schedule {text!r}") from exc


def _exponent(text: str) -> float:
    try:
        return parse_exponent(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad exponent {text!r}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="essnorm", description="Essential norms of weighted composition operators on Hardy spaces.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--pair", help="JSON file with {'psi': symbol, 'phi': [symbols]}")
    parser.add_argument("--p", type=_exponent, help="domain exponent (number or 'inf')")
    parser.add_argument("--q", type=_exponent, help="target exponent (number or 'inf')")
    parser.add_argument("--r", type=_exponent, help="auxiliary exponent for the interpolation bound")
    parser.add_argument("--samples", type=int, help="quadrature node count")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--schedule-eps", type=_schedule, default=DEFAULT_EPS)
    parser.add_argument("--schedule-delta", type=_schedule, default=E.DEFAULT_DELTAS)
    parser.add_argument("--schedule-h", type=_schedule, default=None)
    parser.add_argument("--tol", type=float, default=None, help="override every check tolerance")
    parser.add_argument("--projection-norm", type=float, default=None)
    parser.add_argument("--no-csv", action="store_true")
    return parser


def parse_config(argv) -> JobConfig:
    a = build_parser().parse_args(argv)
    return JobConfig(a.command, a.pair, a.p, a.q, a.r, a.samples, a.seed, a.out, a.schedule_eps,
                     a.schedule_delta, a.schedule_h, a.tol, a.projection_norm, not a.no_csv)


# --- verify ------------------------------------------------------------------------------


def _check(suite: str, name: str, value: float, bound: float) -> dict:
    return {"suite": suite, "name": name, "value": float(value), "bound": float(bound),
            "margin": float(bound - value), "pass": bool(value <= bound)}


def default_pairs() -> list:
    z = PolynomialSymbol.coordinate(0, 1)
    one = PolynomialSymbol.constant(1.0)
    return [
        ("identity", one, BallSelfMap.identity(1)),
        ("half", one, self_map(0.5 * z)),
        ("lens", PolynomialSymbol.from_coeffs([1, -1]), self_map(PolynomialSymbol.from_coeffs([0.5, 0.5]))),
        ("z2", PolynomialSymbol.from_coeffs([0.5, 0.5]), self_map(z * z)),
        ("blaschke", one, self_map(BlaschkeSymbol([0.5]))),
    ]


def cmd_verify(cfg: JobConfig) -> tuple[int, dict]:
    pairs = default_pairs()
    if cfg.pair:
        psi, phi = load_pair(cfg.pair)
        pairs.append(("user", psi, phi))
    tol = cfg.tol
    checks = []
    rng = np.random.default_rng(cfg.seed)
    circle = default_scheme(1, cfg.samples or 4096)
    mc = default_scheme(2, cfg.samples or 20_000, cfg.seed)

    # Parseval: coefficient norm against the quadrature H^2 norm
    for n, scheme in ((1, circle), (2, mc)):
        for i in range(5):
            poly = random_polynomial(n, 5, rng)
            exact = h2_norm(poly)
            est = hp_norm(poly, 2, n, scheme, radii=(1.0,))
            bound = (1e-8 * exact if scheme.deterministic else 3 * est.stderr) if tol is None else tol * exact
            checks.append(_check("parseval", f"n={n}#{i}", abs(est.value - exact), bound))

    # unit norm of the test kernels
    for p in (1.0, 2.0, 4.0):
        for rho in (0.0, 0.5, 0.9):
            est = test_kernel_norm_check(TestKernel([rho], p), circle, radii=(1.0,))
            checks.append(_check("kernel-norm", f"p={p},|w|={rho}", abs(est.value - 1.0), tol or 1e-8))

    # pullback identity, atom sum against the boundary integral
    tests = {"one": lambda w: np.ones(w.shape[0]), "abs2": lambda w: np.sum(np.abs(w) ** 2, axis=1),
             "kernel": lambda w: TestKernel([0.7], 2.0).abs_power(w, 2.0)}
    for name, psi, phi in pairs:
        scheme = cfg.scheme(phi.n)
        for q in (1.0, 2.0, 3.0):
            mu = build_pullback(psi, phi, q, scheme)
            for gname, g in tests.items():
                if gname == "kernel" and phi.n != 1:
                    continue
                try:
                    res = integrate_pullback(mu, g, rtol=math.inf)
                    rel = res.rel_diff
                except PullbackError:
                    rel = math.inf
                checks.append(_check("pullback-identity", f"{name},q={q},g={gname}", rel, tol or 1e-10))

    # pointwise growth |f(z)| (1-|z|^2)^(n/p) <= ||f||_p
    pts = np.concatenate([[0.0], 0.9 * sample_sphere(1, default_scheme(1, 64))[:, 0],
                          0.99 * sample_sphere(1, default_scheme(1, 64))[:, 0]])
    for p in (1.0, 2.0, 3.0):
        for i in range(3):
            poly = random_polynomial(1, 4, rng)
            gc = growth_bound_check(poly, p, 1, pts, circle, radii=(1.0,))
            checks.append(_check("growth-bound", f"p={p}#{i}", gc.worst_ratio - 1.0, tol or 1e-9))

    # f(rz) -> f(z) uniformly on compact subsets, monotonically in r
    for i in range(3):
        poly = random_polynomial(1, 6, rng)
        trace = radial_convergence_check(poly, 1, 0.1, (0.9, 0.99, 0.999), circle)
        rise = max(b - a for a, b in zip(trace.sups, trace.sups[1:]))
        checks.append(_check("radial-convergence", f"#{i}", max(rise, trace.sups[-1] / trace.sups[0]), tol or 0.05))

    # ||Q_k W(g^m)|| <= C s^m
    for name, psi, phi in pairs:
        if phi.n != 1 or name == "user":
            continue
        tr = E.truncated_image_trace(psi, phi, 3, d=48, scheme=circle)
        worst = max(qv / (tr.bound_constant * tr.contraction ** m) if tr.contraction > 0 else (0.0 if qv == 0 else math.inf)
                    for m, qv in zip(tr.ms, tr.q_norms))
        checks.append(_check("truncation-decay", name, worst - 1.0, tol or 1e-9))

    failures = [c for c in checks if not c["pass"]]
    suites = sorted({c["suite"] for c in checks})
    summary = {s: all(c["pass"] for c in checks if c["suite"] == s) for s in suites}
    payload = {"config": cfg.to_dict(), "suites": summary, "checks": checks, "failures": failures,
               "seeds": {"corpus": cfg.seed, "monte_carlo": mc.to_config(), "circle": circle.to_config()},
               "criterion_citations": {"pullback-identity": E.CRITERIA["pullback-identity"]}}
    return (1 if failures else 0), payload


# --- reports ------------------------------------------------------------------------------


def _load(cfg: JobConfig):
    if not cfg.pair:
        raise UsageError(f"{cfg.command} needs --pair")
    return load_pair(cfg.pair)


def _need(cfg: JobConfig, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise UsageError(f"{cfg.command} needs --{name}")


def essnorm_reports(cfg: JobConfig, psi, phi) -> dict:
    p, q, n = cfg.p, cfg.q, phi.n
    setting = {"p": p, "q": q, "n": n}
    scheme = cfg.scheme(n)
    reports = []
    if math.isinf(p):
        if math.isinf(q):
            raise NotCoveredError("not implemented: no estimator covers H^inf -> H^inf (nearest: hinf-hq-bracket)")
        if q == 2:
            reports.append(E.essnorm_exact_hinf_h2(psi, phi, scheme, cfg.eps))
        if q > 1:
            reports.append(E.essnorm_bounds_hinf_hq(psi, phi, q, scheme, cfg.eps))
        else:
            raise NotCoveredError(f"not implemented: H^inf -> H^q needs q > 1 (nearest: hinf-hq-bracket), got q = {q}")
    elif math.isinf(q):
        budget = E.SearchBudget(seed=cfg.seed)
        b = E.boundedness_hp_hinf(psi, phi, p, budget)
        if not b.bounded:
            return {"setting": setting, "bounded": b, "verdict": None,
                    "notes": ["W is unbounded H^p -> H^inf; no essential norm"]}
        reports.append(E.essnorm_bounds_hp_hinf(psi, phi, p, cfg.deltas, budget, b))
    else:
        if n != 1:
            raise NotCoveredError("not implemented: finite (p, q) needs inner-function witnesses, available only for n = 1 "
                             "(nearest: hp-hq-lower)")
        if not p > 1:
            raise NotCoveredError(f"not implemented: finite (p, q) needs p > 1 (nearest: hp-hq-lower), got p = {p}")
        reports.append(E.essnorm_lower_hp_hq(psi, phi, p, q, scheme, cfg.eps))
        if 1 < q < p:
            r = cfg.r if cfg.r is not None else p
            reports.append(E.essnorm_upper_interp(psi, phi, p, q, r, cfg.projection_norm, scheme, cfg.eps,
                                                  seed=cfg.seed))
        elif p <= q:
            reports.append(C.equivalence_report(psi, phi, p, q, h_grid=cfg.h_grid, seed=cfg.seed))
    verdict = E.compactness_verdict(setting, reports)
    return {"setting": setting, "reports": reports, "verdict": verdict}


def cmd_essnorm(cfg: JobConfig) -> tuple[int, dict]:
    _need(cfg, "p", "q")
    psi, phi = _load(cfg)
    payload = {"config": cfg.to_dict(), "pair": pair_to_dict(psi, phi), **essnorm_reports(cfg, psi, phi)}
    return 0, payload


def cmd_carleson(cfg: JobConfig) -> tuple[int, dict]:
    _need(cfg, "p", "q")
    psi, phi = _load(cfg)
    if not 0 < cfg.p <= cfg.q < math.inf:
        raise UsageError(f"carleson needs 0 < p <= q < inf, got p = {cfg.p}, q = {cfg.q}")
    scheme = None if cfg.samples is None else cfg.scheme(phi.n)
    rep = C.equivalence_report(psi, phi, cfg.p, cfg.q, scheme, h_grid=cfg.h_grid, seed=cfg.seed)
    mu = build_pullback(psi, phi, cfg.q, scheme or C.carleson_scheme(phi.n))
    mass = C.boundary_mass_check(mu, cfg.eps)
    payload = {"config": cfg.to_dict(), "pair": pair_to_dict(psi, phi), "carleson": rep, "boundary_mass": mass}
    flagged = not rep.consistent
    if rep.bounded and cfg.p < cfg.q and not mass.vanishes():
        flagged = True
        payload["inconsistency"] = "bounded with p < q but the boundary mass does not vanish"
    if cfg.csv:
        payload["_csv"] = rep.csv_traces()
    return (1 if flagged else 0), payload


def cmd_bounded(cfg: JobConfig) -> tuple[int, dict]:
    _need(cfg, "p")
    psi, phi = _load(cfg)
    if math.isinf(cfg.p):
        raise UsageError("bounded needs a finite --p")
    rep = E.boundedness_hp_hinf(psi, phi, cfg.p, E.SearchBudget(seed=cfg.seed))
    return 0, {"config": cfg.to_dict(), "pair": pair_to_dict(psi, phi), "bounded": rep}


def cmd_report(cfg: JobConfig) -> tuple[int, dict]:
    _need(cfg, "p", "q")
    psi, phi = _load(cfg)
    payload = {"config": cfg.to_dict(), "pair": pair_to_dict(psi, phi), "essnorm": essnorm_reports(cfg, psi, phi)}
    code = 0
    if not math.isinf(cfg.p):
        payload["bounded_into_hinf"] = E.boundedness_hp_hinf(psi, phi, cfg.p, E.SearchBudget(seed=cfg.seed))
    if 0 < cfg.p <= cfg.q < math.inf:
        rep = C.equivalence_report(psi, phi, cfg.p, cfg.q, h_grid=cfg.h_grid, seed=cfg.seed)
        payload["carleson"] = rep
        code = 0 if rep.consistent else 1
    return code, payload


HANDLERS = {"verify": cmd_verify, "essnorm": cmd_essnorm, "carleson": cmd_carleson,
            "bounded": cmd_bounded, "report": cmd_report}


def run(cfg: JobConfig) -> int:
    code, payload = HANDLERS[cfg.command](cfg)
    csv_files = payload.pop("_csv", {})
    payload["exit_code"] = code
    write_atomic(os.path.join(cfg.out, f"{cfg.command}.json"), dumps(payload) + "\n")
    for name, text in csv_files.items():
        write_atomic(os.path.join(cfg.out, name), text)
    return code


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        code = run(cfg)
    except (UsageError, SymbolError, E.PreconditionError, C.CarlesonError, OSError) as exc:
        print(f"essnorm: error: {exc}", file=sys.stderr)
        return 2
    except ConsistencyError as exc:
        print(f"essnorm: inconsistency: {exc}", file=sys.stderr)
        return 1
    status = "ok" if code == 0 else "checks failed"
    print(f"essnorm {cfg.command}: {status} -> {os.path.join(cfg.out, cfg.command + '.json')}")
    return code


if __name__ == "__main__":
    sys.exit(main())
