"""One test per acceptance criterion. Each records a pass/fail line that the
terminal summary prints after the run."""

import contextlib
import math
import time

import numpy as np
import pytest

from essnorm import estimators as E
from essnorm.carleson import berezin_values, boundary_mass_check, carleson_scheme, equivalence_report
from essnorm.cli import JobConfig, cmd_verify
from essnorm.geometry import circle_scheme, sphere_scheme
from essnorm.hardy import TestKernel, h2_norm, hp_norm
from essnorm.pullback import build_pullback, integrate_pullback
from essnorm.serialize import dumps
from essnorm.symbols import BallSelfMap, BlaschkeSymbol, PolynomialSymbol, random_polynomial, self_map
from conftest import ACCEPTANCE_LINES, poly

ONE = PolynomialSymbol.constant(1.0)


@contextlib.contextmanager
def criterion(number, limit, summary):
    """Time the block, fail if it exceeds ``limit`` seconds, record the outcome.
    ``summary`` is a dict the block may fill with details for the report line."""
    t0 = time.perf_counter()
    status = "FAIL"
    try:
        yield summary
        elapsed = time.perf_counter() - t0
        assert limit is None or elapsed < limit, f"runtime {elapsed:.1f}s exceeds {limit}s"
        status = "PASS"
    finally:
        elapsed = time.perf_counter() - t0
        detail = ", ".join(f"{k}={v}" for k, v in summary.items())
        ACCEPTANCE_LINES.append(f"criterion {number}: {status}  {detail}  ({elapsed:.1f}s)")


def disk_pairs():
    return [
        ("identity", ONE, BallSelfMap.identity(1)),
        ("half", poly(1, 1), self_map(poly(0, 0.5))),
        ("lens", poly(1, -1), self_map(poly(0.5, 0.5))),
        ("z2", poly(0.5, 0.5), self_map(poly(0, 0, 1))),
        ("blaschke", ONE, self_map(BlaschkeSymbol([0.5]))),
        ("blaschke2", poly(0.2, 1j), self_map(BlaschkeSymbol([0.3, -0.6j], theta=0.4))),
    ]


def test_criterion_1_parseval():
    with criterion(1, 30, {}) as s:
        rng = np.random.default_rng(2024)
        worst = {}
        for n in (1, 2, 3):
            scheme = circle_scheme(4096) if n == 1 else sphere_scheme(200_000, seed=n)
            for _ in range(20):
                f = random_polynomial(n, int(rng.integers(1, 6)), rng)
                exact = h2_norm(f)
                est = hp_norm(f, 2, n, scheme, radii=(1.0,))
                err = abs(est.value - exact)
                bound = 1e-8 * exact if n == 1 else 3 * est.stderr
                worst[n] = max(worst.get(n, 0.0), err / bound)
                assert err <= bound, f"n={n}: |diff| {err:.3g} > {bound:.3g}"
        s["worst_err_over_bound"] = {k: f"{v:.2g}" for k, v in worst.items()}


def test_criterion_2_pullback_identity():
    with criterion(2, 10, {}) as s:
        g_abs = lambda w: np.sum(np.abs(w) ** 2, axis=1)
        g_one = lambda w: np.ones(w.shape[0])
        g_kernel = lambda w: TestKernel([0.6j], 2.0).abs_power(w, 3.0)
        g_ball = lambda w: np.abs(1 - 0.5 * w[:, 0] + 0.25j * w[:, 1]) ** 2
        z1, z2 = PolynomialSymbol.coordinate(0, 2), PolynomialSymbol.coordinate(1, 2)
        ball_phi = self_map(0.5 * z1 + 0.5 * z2 * z2, 0.5 * z1 * z2)
        ball_psi = 1 + 2 * z1 - 1j * z2
        cases = [(psi, phi, q, g) for _, psi, phi in disk_pairs() for q, g in ((2.0, g_abs), (3.0, g_kernel))]
        cases = cases[:8] + [
            (ONE, BallSelfMap.identity(1), 1.0, g_one),
            (poly(1, -2, 1), self_map(poly(0.5, 0.5)), 4.0, g_kernel),
            (ball_psi, ball_phi, 2.0, g_ball),
            (PolynomialSymbol.constant(1.0, 2), BallSelfMap.identity(2), 1.5, g_ball),
        ]
        assert len(cases) == 12
        worst = 0.0
        for psi, phi, q, g in cases:
            scheme = circle_scheme(4096) if phi.n == 1 else sphere_scheme(20_000, seed=5)
            res = integrate_pullback(build_pullback(psi, phi, q, scheme), g, rtol=math.inf)
            worst = max(worst, res.rel_diff)
        s["worst_rel_diff"] = f"{worst:.2e}"
        assert worst <= 1e-10


def test_criterion_3_exact_values():
    with criterion(3, 20, {}) as s:
        ident = E.essnorm_exact_hinf_h2(ONE, BallSelfMap.identity(1)).exact
        half = E.essnorm_exact_hinf_h2(ONE, self_map(poly(0, 0.5))).exact
        sq = E.essnorm_exact_hinf_h2(poly(0.5, 0.5), self_map(poly(0, 0, 1))).exact
        # |phi| = 1 on the whole circle, so the value is ||psi||_2 by direct quadrature
        xi = np.exp(2j * np.pi * np.arange(1 << 15) / (1 << 15))
        oracle = math.sqrt(np.mean(np.abs((1 + xi) / 2) ** 2))
        s.update(identity=round(ident, 6), half=half, z2=round(sq, 6), oracle=round(oracle, 6))
        assert abs(ident - 1.0) <= 0.02
        assert half <= 1e-6
        assert abs(sq - oracle) <= 1e-3


def test_criterion_4_sandwich():
    with criterion(4, 30, {}) as s:
        rows = []
        for name, psi, phi in disk_pairs():
            ex = E.essnorm_exact_hinf_h2(psi, phi)
            br = E.essnorm_bounds_hinf_hq(psi, phi, 2.0)
            rows.append((name, br.lower, ex.exact, br.upper))
            assert br.lower <= ex.exact <= br.upper
            assert br.upper == pytest.approx(4 * br.lower, rel=1e-12, abs=1e-300)
            assert br.lower == pytest.approx(ex.exact / 2, rel=1e-12, abs=1e-300)
            if ex.exact > 0:
                assert br.lower < ex.exact < br.upper
        assert any(isinstance(phi.components[0], BlaschkeSymbol) for _, _, phi in disk_pairs())
        s["pairs"] = len(rows)


def test_criterion_5_truncation_decay():
    with criterion(5, 60, {}) as s:
        rates = {}
        for zeros in ([0.5], [0.3], [0.5, -0.5]):
            tr = E.truncated_image_trace(ONE, self_map(BlaschkeSymbol(zeros)), 4, ms=tuple(range(1, 11)))
            rates[str(zeros)] = (round(tr.fitted_rate, 3), round(tr.contraction, 3))
            assert tr.bound_holds()
            assert tr.rate_within(0.2), f"zeros {zeros}: rate {tr.fitted_rate} vs s {tr.contraction}"
        s["rate_vs_s"] = rates


# analytic verdicts for W: H^2 -> H^inf, psi (1 - |phi|^2)^(-1/p) on the circle
HINF_FAMILY = [
    ("z/2", ONE, poly(0, 0.5), 2.0, True, True),
    ("identity", ONE, poly(0, 1), 2.0, False, None),
    ("z*z^2", poly(0, 1), poly(0, 0, 1), 2.0, False, None),
    ("lens", ONE, poly(0.5, 0.5), 2.0, False, None),
    ("blaschke", ONE, BlaschkeSymbol([0.5]), 2.0, False, None),
    ("(1-z) lens", poly(1, -1), poly(0.5, 0.5), 2.0, True, False),
    ("(1-z)^2 lens", poly(1, -2, 1), poly(0.5, 0.5), 2.0, True, True),
    ("(1-z) lens p=4", poly(1, -1), poly(0.5, 0.5), 4.0, True, True),
]


def test_criterion_6_hinf_classifier():
    with criterion(6, 60, {}) as s:
        matched = 0
        for name, psi, comp, p, bounded, compact in HINF_FAMILY:
            phi = self_map(comp)
            b = E.boundedness_hp_hinf(psi, phi, p)
            assert b.bounded == bounded, name
            if bounded:
                rep = E.essnorm_bounds_hp_hinf(psi, phi, p, bounded=b)
                assert rep.lower <= rep.upper
                v = E.compactness_verdict(rep.setting, [rep]).verdict
                assert v == ("compact" if compact else "non-compact"), f"{name}: {v}"
                if name == "z/2":
                    assert "empty-region" in rep.citations
            matched += 1
        s["matched"] = f"{matched}/{len(HINF_FAMILY)}"


CARLESON_CORPUS = [
    (ONE, poly(0, 0.5), 2.0, 4.0, True),
    (ONE, poly(0, 1), 2.0, 2.0, True),
    (ONE, poly(0, 1), 2.0, 4.0, False),
    (ONE, poly(0.5, 0.5), 2.0, 4.0, False),
    (poly(1, -1), poly(0.5, 0.5), 2.0, 4.0, True),
    (poly(1, -1), poly(0.5, 0.5), 1.5, 3.0, True),
    (poly(0.5, 0.5), poly(0, 0, 1), 2.0, 2.0, True),
    (ONE, BlaschkeSymbol([0.5]), 2.0, 2.0, True),
    (ONE, BlaschkeSymbol([0.5]), 1.5, 3.0, False),
    (poly(1, -2, 1), poly(0.5, 0.5), 2.0, 4.0, True),
]


_CARLESON_CACHE = []


def carleson_reports():
    if not _CARLESON_CACHE:
        _CARLESON_CACHE.extend((psi, self_map(comp), p, q, expected, equivalence_report(psi, self_map(comp), p, q))
                               for psi, comp, p, q, expected in CARLESON_CORPUS)
    return _CARLESON_CACHE


def test_criterion_7_carleson_coherence():
    with criterion(7, 60, {}) as s:
        reports = carleson_reports()
        assert len(reports) == 10
        assert {(p, q) for _, _, p, q, _, _ in reports} == {(2.0, 2.0), (2.0, 4.0), (1.5, 3.0)}
        for psi, phi, p, q, expected, rep in reports:
            assert rep.consistent, rep.indicators
            assert rep.bounded == expected
            assert rep.berezin.at_origin == rep.total_mass
        mu = build_pullback(ONE, BallSelfMap.identity(1), 2.0, carleson_scheme(1))
        ring = np.exp(2j * np.pi * np.arange(24) / 24)
        z = np.concatenate([[0.0]] + [r * ring for r in (0.5, 0.9, 0.99, 0.999)])
        dev = float(np.max(np.abs(berezin_values(mu, 2.0, z.reshape(-1, 1)) - 1.0)))
        s.update(pairs=len(reports), identity_berezin_dev=f"{dev:.1e}")
        assert dev <= 1e-6


def test_criterion_8_boundary_mass():
    reports = carleson_reports()
    with criterion(8, 20, {}) as s:
        checked = 0
        for psi, phi, p, q, _, rep in reports:
            if rep.bounded and p < q:
                bm = boundary_mass_check(build_pullback(psi, phi, q, carleson_scheme(1)))
                assert bm.limit.value <= 2 * bm.limit.uncertainty + 1e-12, bm.limit
                checked += 1
        s["checked"] = checked
        assert checked >= 3


def test_criterion_9_determinism(tmp_path):
    with criterion(9, None, {}) as s:
        cfg = JobConfig("verify", seed=11)
        code_a, a = cmd_verify(cfg)
        code_b, b = cmd_verify(JobConfig("verify", seed=11))
        text_a, text_b = dumps(a).encode(), dumps(b).encode()
        s.update(exit_codes=(code_a, code_b), bytes=len(text_a))
        assert code_a == code_b == 0
        assert text_a == text_b
