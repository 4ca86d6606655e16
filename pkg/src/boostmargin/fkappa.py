"""Monte-Carlo evaluation of the positive-part moment functions.

The central object is the family ``F_kappa(c) = sqrt(E[(kappa - <c, V>)_+^2])``
where V collects the model-dependent random variables.  Evaluations share one
frozen sample (common random numbers), so F is a smooth deterministic function
of (kappa, c) for a fixed cloud and root-finding on top of it is stable.  The
purely Gaussian coordinate is integrated by 64-node Gauss-Hermite quadrature
instead of sampling; the remaining coordinates are Monte-Carlo averaged.

Cloud kinds
-----------
``glm``      (Y, Z1) with P(Y=+1|Z1) = f(rho*Z1); c = (c1, c2)
``gmm``      constant mean shift plus one Gaussian; c = (c1, c2)
``rank``     constant shift, one Gaussian, ell latent variables;
             c = (c1, c2, c3..c_{ell+2}) with c2 on the Gaussian
``misspec``  like glm but labels also depend on a hidden Gaussian of
             strength gamma that is integrated out at sampling time
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import rng
from .spectra import LinkFunction

DEFAULT_MC_SAMPLES = 5000
GH_NODES = 64


class NumericalError(RuntimeError):
    """A numerical routine failed to meet its contract."""


@lru_cache(maxsize=8)
def gauss_hermite(n: int = GH_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E[g(Z)], Z ~ N(0,1)."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / w.sum()


@dataclass(frozen=True)
class FEval:
    """Value and partial derivatives of one F evaluation."""

    value: float
    grad: np.ndarray

    def __post_init__(self):
        if self.value == 0.0 and np.any(self.grad != 0.0):
            raise NumericalError("zero F value must have zero gradient")


@dataclass(frozen=True)
class MCCloud:
    """Frozen Monte-Carlo sample underlying every F evaluation."""

    kind: str
    m: int
    rho: float
    link: LinkFunction | None
    seed: int
    y: np.ndarray | None = None
    z1: np.ndarray | None = None
    z2: np.ndarray | None = None  # only in pure-MC mode
    latents: np.ndarray | None = None  # (m, ell) for rank kind
    quadrature: bool = True
    gamma: float = 0.0  # hidden-signal strength for misspec kind

    @property
    def n_coeffs(self) -> int:
        if self.kind == "rank":
            return 2 + self.latents.shape[1]
        return 2

    def refresh(self, seed: int) -> "MCCloud":
        """Independent cloud of identical shape (for overfitting guards)."""
        latent_law = None
        if self.kind == "rank":
            latent_law = "rademacher" if set(np.unique(self.latents)) <= {-1.0, 1.0} else "gaussian"
            return make_cloud(
                self.kind, self.m, self.rho, self.link, seed,
                quadrature=self.quadrature, ell=self.latents.shape[1], latent_law=latent_law,
            )
        return make_cloud(
            self.kind, self.m, self.rho, self.link, seed,
            quadrature=self.quadrature, gamma=self.gamma,
        )


def make_cloud(
    kind: str,
    m: int = DEFAULT_MC_SAMPLES,
    rho: float = 1.0,
    link: LinkFunction | None = None,
    seed: int = 0,
    *,
    quadrature: bool = True,
    gamma: float = 0.0,
    ell: int = 1,
    latent_law: str = "rademacher",
) -> MCCloud:
    """Draw and freeze the sample reused by all subsequent evaluations."""
    if m < 100:
        raise ValueError("cloud size m must be >= 100")
    g = rng.generator(seed, rng.STREAM_CLOUD)
    if kind in ("glm", "misspec"):
        if link is None:
            raise ValueError(f"{kind} cloud needs a link function")
        z1 = g.standard_normal(m)
        arg = rho * z1
        if kind == "misspec" and gamma != 0.0:
            arg = arg + gamma * g.standard_normal(m)
        y = np.where(g.random(m) < link(arg), 1.0, -1.0)
        z2 = None if quadrature else g.standard_normal(m)
        return MCCloud(kind, m, rho, link, seed, y=y, z1=z1, z2=z2,
                       quadrature=quadrature, gamma=gamma)
    if kind == "gmm":
        z2 = None if quadrature else g.standard_normal(m)
        return MCCloud(kind, m, rho, link, seed, z2=z2, quadrature=quadrature)
    if kind == "rank":
        if latent_law == "rademacher":
            lat = g.choice([-1.0, 1.0], size=(m, ell))
        elif latent_law == "gaussian":
            lat = g.standard_normal((m, ell))
        else:
            raise ValueError(f"unknown latent law {latent_law!r}")
        z2 = None if quadrature else g.standard_normal(m)
        return MCCloud(kind, m, rho, link, seed, latents=lat, z2=z2, quadrature=quadrature)
    raise ValueError(f"unknown cloud kind {kind!r}")


def _shift_term(cloud: MCCloud, kappa: float, c: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Per-sample shift kappa - (all non-Gauss-coefficient terms) and the
    factors multiplying each gradient component except the Gaussian one."""
    if cloud.kind in ("glm", "misspec"):
        yz1 = cloud.y * cloud.z1
        return kappa - c[0] * yz1, [yz1]
    if cloud.kind == "gmm":
        n = cloud.m if not cloud.quadrature else 1
        return np.full(n, kappa - c[0]), [np.ones(n)]
    # rank: c = (c1, c2, lat...)
    shift = kappa - c[0] - cloud.latents @ c[2:]
    return shift, [np.ones(cloud.m)] + [cloud.latents[:, j] for j in range(cloud.latents.shape[1])]


def f_kappa(cloud: MCCloud, kappa: float, c) -> FEval:
    """Positive-part L2 moment and its partials at coefficient vector c.

    The gradient uses the self-normalized ratio form
    ``dF/dc_j = -E[V_j * (kappa - <c,V>)_+] / F`` and is defined as zero when
    the value vanishes (F is identically zero on a neighborhood there).
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (cloud.n_coeffs,):
        raise ValueError(f"expected {cloud.n_coeffs} coefficients for kind {cloud.kind!r}")
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    shift, factors = _shift_term(cloud, kappa, c)
    c2 = c[1]
    if cloud.quadrature:
        x, w = gauss_hermite()
        r = shift[:, None] - c2 * x[None, :]
        pos = np.maximum(r, 0.0)
        val2 = float(np.mean(pos**2 @ w))
        if val2 <= 0.0:
            return FEval(0.0, np.zeros(cloud.n_coeffs))
        value = np.sqrt(val2)
        posw = pos @ w  # E over Z of the positive part, per sample
        grad = np.empty(cloud.n_coeffs)
        grad[0] = -float(np.mean(factors[0] * posw)) / value
        grad[1] = -float(np.mean(pos @ (w * x))) / value
        for j, f in enumerate(factors[1:]):
            grad[2 + j] = -float(np.mean(f * posw)) / value
    else:
        pos = np.maximum(shift - c2 * cloud.z2, 0.0)
        val2 = float(np.mean(pos**2))
        if val2 <= 0.0:
            return FEval(0.0, np.zeros(cloud.n_coeffs))
        value = np.sqrt(val2)
        grad = np.empty(cloud.n_coeffs)
        grad[0] = -float(np.mean(factors[0] * pos)) / value
        grad[1] = -float(np.mean(cloud.z2 * pos)) / value
        for j, f in enumerate(factors[1:]):
            grad[2 + j] = -float(np.mean(f * pos)) / value
    return FEval(float(value), grad)


# ---------------------------------------------------------------------------
# closed form for the mixture-model F
# ---------------------------------------------------------------------------


def _phi(x):
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def _Phi(x):
    from scipy.special import ndtr

    return ndtr(x)


def pospart_sq_moment(a, c):
    """E[(a - c*Z)_+^2] for Z ~ N(0,1), c > 0, elementwise."""
    u = a / c
    return (a * a + c * c) * _Phi(u) + a * c * _phi(u)


def f_kappa_gmm_closed(kappa: float, c1: float, c2: float) -> FEval:
    """Exact value/partials of sqrt(E[(kappa - c1 - c2 Z)_+^2]), c2 > 0."""
    if c2 <= 0:
        raise ValueError("c2 must be positive for the closed form")
    a = kappa - c1
    val2 = pospart_sq_moment(a, c2)
    if val2 <= 0.0:
        return FEval(0.0, np.zeros(2))
    value = float(np.sqrt(val2))
    u = a / c2
    # E[(a - c2 Z)_+] and -E[Z (a - c2 Z)_+]
    mean_pos = a * _Phi(u) + c2 * _phi(u)
    mean_zpos = -c2 * _Phi(u)
    grad = np.array([-mean_pos / value, -mean_zpos / value])
    return FEval(value, grad)


# ---------------------------------------------------------------------------
# separability threshold
# ---------------------------------------------------------------------------


def separability_threshold(rho: float, link: LinkFunction, cloud: MCCloud) -> float:
    """min over c of F_0(c, 1)^2 via golden-section on an auto-expanded bracket.

    The objective is convex (F is an L2 norm of an affine map), so a bracket
    with an interior minimum guarantees the golden-section result is global.
    """
    from scipy.optimize import minimize_scalar

    if cloud.kind not in ("glm", "misspec"):
        raise ValueError("separability threshold needs a glm-type cloud")
    if abs(cloud.rho - rho) > 1e-12:
        raise ValueError("cloud rho does not match the requested rho")

    def obj(c):
        return f_kappa(cloud, 0.0, (c, 1.0)).value ** 2

    lo, hi = -2.0, 2.0
    flo, fmid, fhi = obj(lo), obj(0.5 * (lo + hi)), obj(hi)
    for _ in range(60):
        if fmid <= flo and fmid <= fhi:
            break
        if flo < fhi:
            lo, hi = lo - (hi - lo), hi
        else:
            lo, hi = lo, hi + (hi - lo)
        flo, fmid, fhi = obj(lo), obj(0.5 * (lo + hi)), obj(hi)
    else:
        raise NumericalError(
            f"bracket expansion failed: f({lo})={flo:.6g}, f({hi})={fhi:.6g}; "
            "objective does not look unimodal"
        )
    res = minimize_scalar(obj, bracket=(lo, 0.5 * (lo + hi), hi), method="golden",
                          options={"xtol": 1e-10})
    return float(res.fun)


def derivative_check(cloud: MCCloud, kappa: float, c, h: float = 1e-4) -> float:
    """Max relative error of the analytic gradient against central differences
    computed on the same cloud (common random numbers)."""
    c = np.asarray(c, dtype=float)
    ev = f_kappa(cloud, kappa, c)
    if ev.value <= 1e-8:
        raise ValueError("derivative check requires F > 1e-8")
    err = 0.0
    for j in range(c.size):
        cp, cm = c.copy(), c.copy()
        cp[j] += h
        cm[j] -= h
        fd = (f_kappa(cloud, kappa, cp).value - f_kappa(cloud, kappa, cm).value) / (2 * h)
        err = max(err, abs(ev.grad[j] - fd) / max(1.0, abs(fd)))
    return err
