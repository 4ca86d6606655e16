"""Fast self-contained property suite behind the ``selfcheck`` subcommand.

Each check prints one pass/fail line; the suite returns the number of
failures.  These are smoke-level versions of the full pytest suite, chosen to
run in well under a minute.
"""

from __future__ import annotations

import math

import numpy as np

from . import boosting, datagen, fixedpoint, fkappa, margin, rng
from .spectra import LOGISTIC, PURE_NOISE, ModelConfig, standard_gaussian_measure


def _check(name: str, ok: bool, detail: str) -> bool:
    print(f"[{'pass' if ok else 'FAIL'}] {name}: {detail}")
    return ok


def run_selfcheck(seed: int = 20240601, mc_samples: int = 200_000) -> int:
    failures = 0

    # separability threshold anchors
    cloud = fkappa.make_cloud("glm", mc_samples, 1.0, LOGISTIC, seed=seed)
    thr = fkappa.separability_threshold(1.0, LOGISTIC, cloud)
    failures += not _check(
        "separability-threshold-logistic", abs(thr - 0.43) <= 0.03,
        f"min_c F0^2(c,1) = {thr:.4f}, reference band 0.43 +- 0.03",
    )
    cloud_n = fkappa.make_cloud("glm", mc_samples, 1.0, PURE_NOISE, seed=seed)
    thr_n = fkappa.separability_threshold(1.0, PURE_NOISE, cloud_n)
    failures += not _check(
        "separability-threshold-noise", abs(thr_n - 0.5) <= 0.01,
        f"pure-noise threshold = {thr_n:.4f}, expected 1/2",
    )

    # prox oracles
    g = rng.generator(seed, 1)
    worst = 0.0
    for _ in range(100):
        t = float(g.uniform(-3, 3))
        lam = float(g.uniform(0, 2))
        q = float(g.uniform(1.0, 2.0))
        s = fixedpoint.prox_lq(t, lam, q)
        foc = s + lam * q * np.sign(s) * abs(s) ** (q - 1.0) - t if s != 0 else 0.0
        worst = max(worst, abs(foc))
    failures += not _check("prox-first-order-condition", worst <= 1e-9,
                           f"max |FOC residual| = {worst:.2e}")

    # gradient vs central differences on the frozen cloud
    small = fkappa.make_cloud("glm", 5000, 1.0, LOGISTIC, seed=seed)
    errs = [fkappa.derivative_check(small, float(g.uniform(0.2, 2.0)),
                                    (float(g.uniform(-1, 1)), float(g.uniform(0.2, 3.0))))
            for _ in range(20)]
    failures += not _check("f-gradient-vs-differences", max(errs) <= 1e-3,
                           f"max relative error = {max(errs):.2e}")

    # closed form vs Monte Carlo for the mixture moment
    mc = fkappa.make_cloud("gmm", 200_000, 0.0, None, seed=seed, quadrature=False)
    a, c2 = 0.7, 1.3
    closed = fkappa.f_kappa_gmm_closed(1.0, 1.0 - a, c2).value
    samp = np.maximum(a - c2 * mc.z2, 0.0) ** 2
    est2 = float(np.mean(samp))
    se = float(np.std(samp)) / math.sqrt(mc.m)
    gap = abs(math.sqrt(est2) - closed)
    failures += not _check("gmm-closed-form-vs-mc", gap <= 3 * se / (2 * math.sqrt(est2)) + 1e-12,
                           f"|closed - mc| = {gap:.2e}, 3*SE = {3 * se / (2 * math.sqrt(est2)):.2e}")

    # LP duality and reciprocity
    worst_gap, worst_recip = 0.0, 0.0
    for rep in range(10):
        n = int(g.integers(8, 30))
        p = int(g.integers(n, 60))
        cfg = ModelConfig(psi=p / n, rho=1.0, n=n, link=LOGISTIC,
                          measure=standard_gaussian_measure(p, seed + rep), seed=seed + rep)
        ds = datagen.sample_diagonal(cfg)
        mr = margin.max_margin_l1(ds)
        if not mr.separable:
            continue
        worst_gap = max(worst_gap, abs(mr.kappa - margin.dual_margin(ds)))
        _, nrm = margin.min_norm_interpolant_l1(ds)
        worst_recip = max(worst_recip, abs(nrm * mr.kappa - 1.0))
    failures += not _check("lp-duality-gap", worst_gap <= 1e-8, f"max gap = {worst_gap:.2e}")
    failures += not _check("margin-norm-reciprocity", worst_recip <= 1e-8,
                           f"max |norm*kappa - 1| = {worst_recip:.2e}")

    # separability diagnostic dichotomy
    ok = True
    for rep in range(3):
        n, p = 20, 50
        cfg = ModelConfig(psi=p / n, rho=1.0, n=n, link=LOGISTIC,
                          measure=standard_gaussian_measure(p, seed + 50 + rep),
                          seed=seed + 50 + rep)
        ds = datagen.sample_diagonal(cfg)
        mr = margin.max_margin_l1(ds)
        if not mr.separable:
            continue
        level = math.sqrt(p) * mr.kappa
        ok &= margin.xi_value(ds, 0.9 * level) <= 1e-6
        ok &= margin.xi_value(ds, 1.1 * level, max_iter=2000) > 1e-4
    failures += not _check("hinge-residual-dichotomy", ok,
                           "zero below the margin threshold, positive above")

    # boosting potential inequality
    ok = True
    for rep in range(3):
        n, p = 25, 50
        cfg = ModelConfig(psi=p / n, rho=1.0, n=n, link=LOGISTIC,
                          measure=standard_gaussian_measure(p, seed + 80 + rep),
                          seed=seed + 80 + rep)
        ds = datagen.sample_diagonal(cfg)
        st = boosting.boost_run(ds, stepsize="adaptive", T=400)
        ok &= boosting.potential_decrease_ok(st, p)
    failures += not _check("mirror-descent-potential", ok, "per-step decrease bound holds")

    # sign-alignment constants against the Gaussian closed form
    meas = standard_gaussian_measure(100_000, seed=seed)
    zeta, omega = fixedpoint.zeta_omega(meas)
    ok = abs(zeta - math.sqrt(math.pi / 2)) <= 0.02 and abs(omega - math.sqrt(math.pi / 2 - 1)) <= 0.02
    failures += not _check("sign-alignment-constants", ok,
                           f"zeta = {zeta:.4f} (ref 1.2533), omega = {omega:.4f} (ref 0.7555)")

    print(f"selfcheck: {'all checks passed' if failures == 0 else f'{failures} check(s) FAILED'}")
    return failures
