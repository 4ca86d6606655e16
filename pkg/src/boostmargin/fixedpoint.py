"""Proximal operators, the nonlinear fixed-point systems, and the asymptotic
prediction pipeline (margin limit, generalization error, geometry).

For each model variant the limiting behavior of the scaled max-margin is
captured by a small system of equations in an alignment coefficient ``c1``, a
noise-energy coefficient ``c2`` (plus latent alignments for spiked models) and
a positive multiplier ``s``.  The expectation over the spectral atoms is an
exact finite sum, the Gaussian coordinate uses 64-node Gauss-Hermite
quadrature, and the F-function partials come from one frozen Monte-Carlo
cloud, so residuals are deterministic functions of the unknowns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq, minimize
from scipy.special import ndtr

from . import datagen, fkappa, rng
from .fkappa import FEval, MCCloud, NumericalError, gauss_hermite
from .spectra import GmmVariant, LinkFunction, ModelConfig, SpectralMeasure

DEFAULT_TOL_MC = 1e-4
DEFAULT_TOL_QUAD = 1e-6
KAPPA_BISECT_TOL = 1e-4


# ---------------------------------------------------------------------------
# proximal operators
# ---------------------------------------------------------------------------


def prox_l1(t, lam):
    """Soft threshold sign(t) * (|t| - lam)_+ (elementwise)."""
    t = np.asarray(t, dtype=float)
    return np.sign(t) * np.maximum(np.abs(t) - lam, 0.0)


def prox_lq(t, lam, q, tol: float = 1e-12, max_iter: int = 200):
    """Unique minimizer of lam*|s|^q + (s-t)^2/2 for q in [1, 2] (elementwise).

    q = 1 is the soft threshold and q = 2 has the closed form t/(1+2*lam);
    otherwise the first-order condition s + lam*q*s^(q-1) = |t| is solved on
    [0, |t|] by bisection-safeguarded Newton.
    """
    if not 1.0 <= q <= 2.0:
        raise ValueError("q must lie in [1, 2]")
    scalar = np.isscalar(t) and np.isscalar(lam)
    t = np.asarray(t, dtype=float)
    shape = t.shape
    tf = np.atleast_1d(t).ravel()
    lamf = np.broadcast_to(np.asarray(lam, dtype=float), t.shape if shape else (1,)).ravel()
    if np.any(lamf < 0):
        raise ValueError("lam must be nonnegative")
    if q == 1.0:
        out = prox_l1(tf, lamf)
    elif q == 2.0:
        out = tf / (1.0 + 2.0 * lamf)
    else:
        a = np.abs(tf)
        lo = np.zeros_like(a)
        hi = a.copy()
        s = 0.5 * a
        active = a > 0
        for _ in range(max_iter):
            if not np.any(active):
                break
            sa = s[active]
            g = sa + lamf[active] * q * sa ** (q - 1.0) - a[active]
            lo[active] = np.where(g < 0, sa, lo[active])
            hi[active] = np.where(g > 0, sa, hi[active])
            dg = 1.0 + lamf[active] * q * (q - 1.0) * np.maximum(sa, 1e-300) ** (q - 2.0)
            step = sa - g / dg
            bad = (step <= lo[active]) | (step >= hi[active]) | ~np.isfinite(step)
            step = np.where(bad, 0.5 * (lo[active] + hi[active]), step)
            s[active] = step
            idx = np.flatnonzero(active)
            active[idx[np.abs(g) <= tol * np.maximum(1.0, a[active])]] = False
        else:
            if np.any(active):
                raise NumericalError("prox_lq Newton failed to converge in 200 iterations")
        out = np.sign(tf) * s
    if scalar:
        return float(out[0])
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# system atoms (the exact integration rule over the spectral measure)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemAtoms:
    """Per-atom quantities entering a fixed-point system.

    ``signal`` multiplies the shift driven by the first F partial; for the
    diagonal model it is sqrt(lambda)*wbar, for mixture models the sqrt(p)-
    scaled mean coordinates.  ``latents`` holds one column per latent spike.
    ``signal_in_prox_sqrtlam`` records whether the signal column enters the
    prox argument multiplied by sqrt(lambda) (diagonal model) or bare
    (mixture models).
    """

    lam: np.ndarray
    mass: np.ndarray
    signal: np.ndarray
    latents: tuple[np.ndarray, ...] = ()
    diagonal_style: bool = True

    @property
    def n_latent(self) -> int:
        return len(self.latents)


def atoms_from_measure(measure: SpectralMeasure) -> SystemAtoms:
    return SystemAtoms(measure.lam, measure.mass, measure.wbar, (), True)


def atoms_for_gmm(config: ModelConfig) -> SystemAtoms:
    """Atom table for the mixture variant: (lambda, sqrt(p)*theta, sqrt(p)*tilde_c)."""
    theta, tildes = datagen.gmm_directions(config)
    measure = config.resolved_measure()
    sp = math.sqrt(config.p)
    return SystemAtoms(
        measure.lam,
        measure.mass,
        sp * theta,
        tuple(sp * t for t in tildes),
        False,
    )


# ---------------------------------------------------------------------------
# solutions and predictions
# ---------------------------------------------------------------------------


@dataclass
class SystemSolution:
    """Solved coefficients (c1, c2, latent alignments...), multiplier s,
    scaled residuals and solver diagnostics for one (psi, kappa) pair."""

    c: np.ndarray
    s: float
    residuals: np.ndarray
    kappa: float
    psi: float
    iterations: int
    converged: bool
    tol: float
    start_spread: float = float("nan")
    n_starts: int = 1

    @property
    def c1(self) -> float:
        return float(self.c[0])

    @property
    def c2(self) -> float:
        return float(self.c[1])

    def validate(self) -> None:
        if self.converged:
            if not (self.c2 > 0 and self.s > 0):
                raise NumericalError("converged solution must have c2 > 0 and s > 0")
            if np.max(np.abs(self.residuals)) > self.tol:
                raise NumericalError("converged solution exceeds its residual tolerance")


@dataclass
class AsymptoticPrediction:
    kappa_star: float
    err_star: float
    bayes_err: float
    angle: float
    classical_bound: float
    solution: SystemSolution | None


# ---------------------------------------------------------------------------
# residual machinery
# ---------------------------------------------------------------------------


class _System:
    """Residual evaluator for one variant at fixed (psi, kappa).

    variant_kind: "glm" (diagonal / misspecified, also the lq >= 1 family)
    or "gmm" (rank-one and higher spiked models).
    """

    def __init__(
        self,
        atoms: SystemAtoms,
        psi: float,
        kappa: float,
        evaluator: Callable[[float, np.ndarray], FEval],
        variant_kind: str,
        q: float = 1.0,
        force_general: bool = False,
    ):
        self.atoms = atoms
        self.psi = psi
        self.kappa = kappa
        self.evaluator = evaluator
        self.variant_kind = variant_kind
        self.q = float(q)
        self.force_general = force_general
        x, w = gauss_hermite()
        self.gh_x = x
        self.gh_w = w
        # per (atom, node) fixed pieces
        self.sqrt_lam = np.sqrt(atoms.lam)
        self.gauss_part = self.sqrt_lam[:, None] * x[None, :]
        self.weights = atoms.mass[:, None] * w[None, :]
        self.n_coeffs = 2 + atoms.n_latent

    def c_vector(self, c1, c2, lat=()) -> np.ndarray:
        return np.array([c1, c2, *lat], dtype=float)

    def _pieces(self, c: np.ndarray):
        """F partials, the prox slope D and the per-atom shift row."""
        ev = self.evaluator(self.kappa, c)
        d2 = ev.grad[1]
        if not np.isfinite(d2) or d2 <= 1e-14 or c[1] <= 0:
            return None
        D = d2 / (math.sqrt(self.psi) * c[1])
        if self.variant_kind == "glm":
            coef = (ev.grad[0] - c[0] * d2 / c[1]) / math.sqrt(self.psi)
            shift = coef * self.sqrt_lam * self.atoms.signal
        else:
            shift = (ev.grad[0] / math.sqrt(self.psi)) * self.atoms.signal
            for j, latcol in enumerate(self.atoms.latents):
                shift = shift + (ev.grad[2 + j] / math.sqrt(self.psi)) * latcol
        return ev, D, shift

    def _hsol(self, D: float, shift: np.ndarray, s: float) -> np.ndarray:
        """Pointwise solution h on the (atom, node) grid.

        The q = 1 fast path shrinks before rescaling; the general path applies
        the q-power prox to the rescaled argument with a per-atom multiplier.
        The two coincide exactly at q = 1 (the soft threshold commutes with
        positive scalings), which the consistency tests exercise via
        ``force_general``.
        """
        u = self.gauss_part + shift[:, None]
        if self.q == 1.0 and not self.force_general:
            return -prox_l1(u, s) / (self.atoms.lam[:, None] * D)
        scale = self.atoms.lam[:, None] * D
        lam_star = s / scale * np.ones_like(u)
        t_star = -u / scale
        return prox_lq(t_star, lam_star, self.q)

    def _expect(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))

    def _norm_eq(self, h: np.ndarray) -> float:
        if self.q == 1.0:
            return self._expect(np.abs(h))
        return self._expect(np.abs(h) ** self.q)

    def solve_s(self, D: float, shift: np.ndarray) -> float | None:
        """Root of the normalization equation in s at fixed coefficients.

        E|h|^q is strictly decreasing in s, so a sign change brackets the
        unique root; returns None when even s -> 0 cannot reach norm one
        (the collapse regime below the admissible dimension ratio).
        """
        def g(s):
            return self._norm_eq(self._hsol(D, shift, s)) - 1.0

        g0 = g(0.0)
        if g0 < 0.0:
            return None
        hi = 1.0
        for _ in range(80):
            if g(hi) < 0.0:
                break
            hi *= 2.0
        else:
            return None
        return float(brentq(g, 0.0, hi, xtol=1e-13, rtol=1e-13))

    def residuals(self, c: np.ndarray, s: float) -> np.ndarray | None:
        """Scaled residual vector [alignment, energy, normalization, latents...].

        First-order equations are scaled by (c2 v 1)^-1 and the energy
        equation by (c2 v 1)^-2 so tolerances stay meaningful at large c2.
        """
        pieces = self._pieces(c)
        if pieces is None:
            return None
        _, D, shift = pieces
        h = self._hsol(D, shift, s)
        scale1 = 1.0 / max(c[1], 1.0)
        res = [0.0, 0.0, (1.0 - self._norm_eq(h)) * scale1]
        energy = self._expect(self.atoms.lam[:, None] * h * h)
        if self.variant_kind == "glm":
            c1_rhs = self._expect((self.sqrt_lam * self.atoms.signal)[:, None] * h)
            res[0] = (c[0] - c1_rhs) * scale1
            res[1] = (c[0] ** 2 + c[1] ** 2 - energy) * scale1**2
        else:
            c1_rhs = self._expect(self.atoms.signal[:, None] * h)
            res[0] = (c[0] - c1_rhs) * scale1
            res[1] = (c[1] ** 2 - energy) * scale1**2
            for j, latcol in enumerate(self.atoms.latents):
                res.append((c[2 + j] - self._expect(latcol[:, None] * h)) * scale1)
        return np.asarray(res)

    def update_map(self, c: np.ndarray) -> tuple[np.ndarray, float] | None:
        """One pass of the natural fixed-point map: solve s, then refresh c."""
        pieces = self._pieces(c)
        if pieces is None:
            return None
        _, D, shift = pieces
        s = self.solve_s(D, shift)
        if s is None:
            return None
        h = self._hsol(D, shift, s)
        energy = self._expect(self.atoms.lam[:, None] * h * h)
        new = c.copy()
        if self.variant_kind == "glm":
            new[0] = self._expect((self.sqrt_lam * self.atoms.signal)[:, None] * h)
            rad = energy - new[0] ** 2
        else:
            new[0] = self._expect(self.atoms.signal[:, None] * h)
            for j, latcol in enumerate(self.atoms.latents):
                new[2 + j] = self._expect(latcol[:, None] * h)
            rad = energy
        if rad <= 0.0:
            return None
        new[1] = math.sqrt(rad)
        return new, s


def _make_evaluator(cloud: MCCloud | None, variant_kind: str):
    if cloud is not None:
        return lambda kappa, c: fkappa.f_kappa(cloud, kappa, c)
    if variant_kind != "gmm":
        raise ValueError("only the rank-one mixture system has a cloud-free closed form")
    return lambda kappa, c: fkappa.f_kappa_gmm_closed(kappa, float(c[0]), float(c[1]))


def solve_system(
    measure: SpectralMeasure | SystemAtoms,
    psi: float,
    kappa: float,
    cloud: MCCloud | None,
    variant: str = "glm",
    q: float = 1.0,
    tol: float | None = None,
    max_iter: int = 400,
    starts: int = 5,
    x0: np.ndarray | None = None,
    rho: float = 1.0,
    lq_general: bool = False,
) -> SystemSolution:
    """Solve the fixed-point system for one (psi, kappa) pair.

    Strategy: damped fixed-point iteration on the natural update map (with the
    normalization equation solved exactly for s inside each sweep), falling
    back to derivative-free Nelder-Mead on the scaled residual norm; repeated
    from ``starts`` perturbed initial points.  Raises on collapse of c2 or s
    (the pair (psi, kappa) then lies outside the admissible region) and on
    non-convergence of every start.  ``lq_general`` forces the q-power prox
    form even at q = 1 (consistency checks).
    """
    atoms = measure if isinstance(measure, SystemAtoms) else atoms_from_measure(measure)
    variant_kind = "gmm" if variant in ("gmm", "rank") else "glm"
    if tol is None:
        tol = DEFAULT_TOL_QUAD if cloud is None else DEFAULT_TOL_MC
    system = _System(atoms, psi, kappa, _make_evaluator(cloud, variant_kind), variant_kind, q,
                     force_general=lq_general)

    n_lat = atoms.n_latent
    base = np.array([rho / 2.0, math.sqrt(psi), *([0.1] * n_lat)]) if x0 is None else np.asarray(x0, float)
    g = rng.generator(12345, 0)
    solutions: list[tuple[np.ndarray, float, np.ndarray, int]] = []
    best_fail: tuple[float, np.ndarray | None] = (np.inf, None)
    collapse = 0

    for k in range(max(starts, 1)):
        c = base.copy()
        if k > 0:
            c = c * (1.0 + 0.4 * g.uniform(-1, 1, size=c.shape))
            c[1] = abs(c[1]) + 0.05
        c_cur, s_cur, res_cur, iters = _solve_one_start(system, c, tol, max_iter)
        if res_cur is None:
            collapse += 1
            continue
        rmax = float(np.max(np.abs(res_cur)))
        if rmax <= tol:
            solutions.append((c_cur, s_cur, res_cur, iters))
        elif rmax < best_fail[0]:
            best_fail = (rmax, res_cur)

    if not solutions:
        if collapse == max(starts, 1):
            raise NumericalError(
                f"system collapsed (c2 or s -> 0) at psi={psi:g}, kappa={kappa:g}; "
                "the pair likely lies below the admissible dimension ratio"
            )
        raise NumericalError(
            f"no start converged at psi={psi:g}, kappa={kappa:g}; "
            f"best scaled residual {best_fail[0]:.3g}"
        )

    spread = 0.0
    for i in range(len(solutions)):
        for j in range(i + 1, len(solutions)):
            xi = np.append(solutions[i][0], solutions[i][1])
            xj = np.append(solutions[j][0], solutions[j][1])
            spread = max(spread, float(np.max(np.abs(xi - xj))))
    c_best, s_best, res_best, iters = min(solutions, key=lambda t: float(np.max(np.abs(t[2]))))
    sol = SystemSolution(
        c=c_best,
        s=s_best,
        residuals=res_best,
        kappa=kappa,
        psi=psi,
        iterations=iters,
        converged=True,
        tol=tol,
        start_spread=spread,
        n_starts=len(solutions),
    )
    sol.validate()
    return sol


def _solve_one_start(system: _System, c0: np.ndarray, tol: float, max_iter: int):
    """Damped fixed-point sweep, then Nelder-Mead polish if needed."""
    c = c0.copy()
    c[1] = max(c[1], 1e-3)
    damp = 0.7
    s = None
    prev_norm = np.inf
    iters = 0
    for it in range(max_iter):
        iters = it + 1
        step = system.update_map(c)
        if step is None:
            return c, 0.0, None, iters
        c_new, s = step
        res = system.residuals(c, s)
        if res is None:
            return c, 0.0, None, iters
        rnorm = float(np.max(np.abs(res)))
        if rnorm <= tol:
            return c, s, res, iters
        if rnorm > prev_norm * 1.2:
            damp = max(damp * 0.6, 0.05)
        prev_norm = rnorm
        c = (1.0 - damp) * c + damp * c_new
        c[1] = max(c[1], 1e-10)

    # Nelder-Mead fallback on (c..., log s) with the scaled residual norm
    if s is None or s <= 0:
        s = 0.1

    def objective(x):
        cc = x[:-1].copy()
        cc[1] = abs(cc[1])
        res = system.residuals(cc, math.exp(x[-1]))
        if res is None:
            return 1e6
        return float(np.sum(res**2))

    x0 = np.append(c, math.log(s))
    opt = minimize(objective, x0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-24, "maxiter": 4000})
    cc = opt.x[:-1].copy()
    cc[1] = abs(cc[1])
    s = math.exp(opt.x[-1])
    res = system.residuals(cc, s)
    if res is None:
        return cc, 0.0, None, iters
    return cc, s, res, iters + int(opt.nit)


def system_residuals(
    measure: SpectralMeasure | SystemAtoms,
    psi: float,
    solution: SystemSolution,
    cloud: MCCloud | None,
    variant: str = "glm",
    q: float = 1.0,
) -> np.ndarray:
    """Re-evaluate a solution's scaled residuals, e.g. against a fresh cloud."""
    atoms = measure if isinstance(measure, SystemAtoms) else atoms_from_measure(measure)
    variant_kind = "gmm" if variant in ("gmm", "rank") else "glm"
    system = _System(atoms, psi, solution.kappa, _make_evaluator(cloud, variant_kind), variant_kind, q)
    res = system.residuals(solution.c, solution.s)
    if res is None:
        raise NumericalError("solution is outside the admissible region for this cloud")
    return res


# ---------------------------------------------------------------------------
# the margin functional and its root
# ---------------------------------------------------------------------------


def T_value(
    psi: float,
    kappa: float,
    solution: SystemSolution,
    cloud: MCCloud | None,
    variant: str = "glm",
) -> float:
    """psi^{-1/2} [F(c) - <c, grad F(c)>] - s at the solved coefficients.

    Strictly increasing in kappa at fixed psi; its smallest nonnegative root
    is the scaled margin limit.
    """
    variant_kind = "gmm" if variant in ("gmm", "rank") else "glm"
    ev = _make_evaluator(cloud, variant_kind)(kappa, solution.c)
    return float((ev.value - solution.c @ ev.grad) / math.sqrt(psi) - solution.s)


def _t_at(measure, psi, kappa, cloud, variant, q, starts, x0, rho):
    sol = solve_system(measure, psi, kappa, cloud, variant, q=q, starts=starts, x0=x0, rho=rho)
    return T_value(psi, kappa, sol, cloud, variant), sol


def kappa_star(
    measure: SpectralMeasure | SystemAtoms,
    psi: float,
    rho: float,
    cloud: MCCloud | None,
    variant: str = "glm",
    q: float = 1.0,
    link: LinkFunction | None = None,
    starts: int = 5,
    bisect_tol: float = KAPPA_BISECT_TOL,
    gamma: float = 0.0,
) -> AsymptoticPrediction:
    """Scaled margin limit by bisection on kappa, plus downstream predictions.

    Below the separability threshold (T >= 0 already at kappa = 0) the margin
    limit is zero and the error predictions are undefined (NaN).  Otherwise
    the root is bracketed by doubling and bisected to ``bisect_tol``; the
    returned solution is re-solved at the root with ``starts`` initial points.
    """
    if psi <= 0:
        raise ValueError("psi must be positive")
    if link is None and cloud is not None:
        link = cloud.link

    def solve_at(kappa, x0=None, n_starts=1):
        return _t_at(measure, psi, kappa, cloud, variant, q, n_starts, x0, rho)

    bayes = prediction_bayes_error(rho, link, variant, measure, gamma)
    try:
        t_lo, sol = solve_at(0.0, n_starts=2)
    except NumericalError:
        t_lo, sol = 1.0, None  # collapse at kappa=0: below the admissible region
    if t_lo >= 0.0 or sol is None:
        return AsymptoticPrediction(0.0, float("nan"), bayes, float("nan"), float("inf"), None)

    lo, hi = 0.0, max(0.5, 2.0 * bisect_tol)
    x0 = sol.c
    for _ in range(40):
        t_hi, sol_hi = solve_at(hi, x0=x0)
        x0 = sol_hi.c
        if t_hi > 0.0:
            break
        lo, t_lo = hi, t_hi
        hi *= 2.0
    else:
        raise NumericalError(f"failed to bracket the margin root at psi={psi:g}")
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        t_mid, sol_mid = solve_at(mid, x0=x0)
        x0 = sol_mid.c
        if t_mid >= 0.0:
            hi = mid
        else:
            lo = mid
    root = 0.5 * (lo + hi)
    sol = solve_system(measure, psi, root, cloud, variant, q=q, starts=starts, x0=x0, rho=rho)
    err = prediction_err_star(sol, rho, link, variant, gamma)
    angle = sol.c1 / math.hypot(sol.c1, sol.c2)
    classical = math.sqrt(psi) / root if root > 0 else float("inf")
    return AsymptoticPrediction(root, err, bayes, angle, classical, sol)


# ---------------------------------------------------------------------------
# error formulas (1-D quadrature)
# ---------------------------------------------------------------------------


def _effective_link(link: LinkFunction, gamma: float):
    """P(Y=+1 | Z1=z) when labels depend on an extra hidden Gaussian of
    strength gamma: the link smoothed by a centred Gaussian of width gamma."""
    if gamma == 0.0:
        return lambda z, rho: link(rho * np.asarray(z, dtype=float))
    x, w = gauss_hermite(96)

    def f_eff(z, rho):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return link(rho * z[:, None] + gamma * x[None, :]) @ w

    return f_eff


def err_star(solution: SystemSolution, rho: float, link: LinkFunction, gamma: float = 0.0) -> float:
    """P(c1 Y Z1 + c2 Z2 < 0) by quadrature over Z1 for the glm-type models."""
    if solution.c2 <= 0:
        raise NumericalError("degenerate solution: c2 must be positive")
    f_eff = _effective_link(link, gamma)
    ratio = solution.c1 / solution.c2

    def integrand(z):
        fz = f_eff(np.array([z]), rho)[0]
        return math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) * (
            fz * ndtr(-ratio * z) + (1.0 - fz) * ndtr(ratio * z)
        )

    val, _ = quad(integrand, -12, 12, limit=200, epsabs=1e-11, epsrel=1e-11)
    return float(val)


def gmm_err_star(solution: SystemSolution, latent_law: str = "rademacher") -> float:
    """P(c1 + sum_c c_lat,c M_c + c2 Z < 0) for the mixture models."""
    if solution.c2 <= 0:
        raise NumericalError("degenerate solution: c2 must be positive")
    lat = solution.c[2:]
    if lat.size == 0:
        return float(ndtr(-solution.c1 / solution.c2))
    if latent_law == "rademacher":
        total = 0.0
        for bits in range(2 ** lat.size):
            signs = np.array([1.0 if bits & (1 << j) else -1.0 for j in range(lat.size)])
            total += ndtr(-(solution.c1 + signs @ lat) / solution.c2)
        return float(total / 2 ** lat.size)
    x, w = gauss_hermite(96)
    vals = ndtr(-(solution.c1 + np.add.reduce(np.meshgrid(*[x * l for l in lat], indexing="ij")))
                / solution.c2)
    for _ in range(lat.size):
        vals = vals @ w
    return float(vals)


def prediction_err_star(solution, rho, link, variant, gamma=0.0, latent_law="rademacher"):
    if variant in ("gmm", "rank"):
        return gmm_err_star(solution, latent_law)
    return err_star(solution, rho, link, gamma)


def bayes_error(rho: float, link: LinkFunction, gamma: float = 0.0) -> float:
    """P(Y Z < 0) for the label law P(Y=+1|Z) = link(snr * Z) with total
    signal strength snr = sqrt(rho^2 + gamma^2)."""
    snr = math.hypot(rho, gamma)

    def lower(z):
        return math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) * float(link(np.array([snr * z]))[0])

    def upper(z):
        return math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) * (1.0 - float(link(np.array([snr * z]))[0]))

    a, _ = quad(lower, -12, 0, limit=200, epsabs=1e-12)
    b, _ = quad(upper, 0, 12, limit=200, epsabs=1e-12)
    return float(a + b)


def gmm_bayes_error(atoms: SystemAtoms, upsilon: float = 0.5) -> float:
    """Optimal error for the balanced-mean mixture given the atom table.

    The log-likelihood-ratio statistic is Gaussian under each class with
    squared Mahalanobis separation v = E[signal^2/lambda]; latent spikes are
    label-independent and do not shift the optimum.
    """
    v = float(np.sum(atoms.mass * atoms.signal**2 / atoms.lam))
    if v <= 0:
        return 0.5
    b = math.log(upsilon / (1.0 - upsilon))
    sq = math.sqrt(v)
    return float(
        upsilon * ndtr(-(v + b / 2.0) / sq) + (1.0 - upsilon) * ndtr(-(v - b / 2.0) / sq)
    )


def prediction_bayes_error(rho, link, variant, measure, gamma=0.0, upsilon=0.5):
    if variant in ("gmm", "rank"):
        atoms = measure if isinstance(measure, SystemAtoms) else atoms_from_measure(measure)
        return gmm_bayes_error(atoms, upsilon)
    return bayes_error(rho, link, gamma)


# ---------------------------------------------------------------------------
# geometry constants and the admissible region
# ---------------------------------------------------------------------------


def zeta_omega(measure: SpectralMeasure) -> tuple[float, float]:
    """Exact atom sums for the sign-alignment constants.

    zeta = 1 / E|wbar/sqrt(lambda)| and omega is the L2 distance from wbar to
    its best zeta-scaled sign approximation.
    """
    lam, wb, mass = measure.lam, measure.wbar, measure.mass
    denom = float(np.sum(mass * np.abs(wb) / np.sqrt(lam)))
    if denom <= 0:
        raise NumericalError("E|wbar/sqrt(lambda)| vanishes; zeta undefined")
    zeta = 1.0 / denom
    resid = wb - zeta * np.sign(wb) / np.sqrt(lam)
    omega = math.sqrt(float(np.sum(mass * resid**2)))
    return zeta, omega


def psi_down(kappa: float, rho: float, measure: SpectralMeasure, cloud: MCCloud) -> float:
    """Lower edge of the admissible dimension ratio at this kappa.

    max of the separability threshold and the two sign-branch quantities
    (partial_2 F)^2 - omega^2 (partial_1 F)^2 evaluated at (+-zeta, 0); a
    branch is dropped (set to zero) when its first-partial sign condition
    already rules it out.
    """
    zeta, omega = zeta_omega(measure)
    psis = fkappa.separability_threshold(cloud.rho, cloud.link, cloud)

    def branch(c1_val, keep_if_negative):
        ev = fkappa.f_kappa(cloud, kappa, (c1_val, 0.0))
        d1 = ev.grad[0]
        active = d1 <= 0 if keep_if_negative else d1 >= 0
        if not active:
            return 0.0
        return ev.grad[1] ** 2 - omega**2 * d1**2

    psi_plus = branch(zeta, keep_if_negative=True)
    psi_minus = branch(-zeta, keep_if_negative=False)
    return float(max(psis, psi_plus, psi_minus))
