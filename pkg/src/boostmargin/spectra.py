"""Problem configuration: covariance spectra, signal directions, link functions.

A problem instance is described by an overparametrization ratio ``psi = p/n``,
a signal strength ``rho``, a link function mapping the latent signal to the
probability of a positive label, and a finite atomic spectral measure pairing
covariance eigenvalues ``lambda_i`` with rescaled signal coordinates
``wbar_i``.  The measure doubles as the integration rule for every asymptotic
prediction, so all expectations over it are exact finite sums.
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import rng

SECOND_MOMENT_TOL = 1e-6


class ConfigError(ValueError):
    """A configuration violates its declared contract."""


class InvalidMeasureError(ConfigError):
    """The spectral measure is structurally unusable (e.g. no atoms)."""


# ---------------------------------------------------------------------------
# link functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinkFunction:
    """Nondecreasing map from latent signal to P(label = +1), valued in [0, 1].

    ``kind`` is one of ``logistic``, ``pure-noise`` (constant 1/2) or
    ``tabulated`` (monotone table with linear interpolation, constant
    extrapolation).
    """

    kind: str = "logistic"
    grid: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("logistic", "pure-noise", "tabulated"):
            raise ConfigError(f"unknown link kind {self.kind!r}")
        if self.kind == "tabulated":
            t = np.asarray(self.grid, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if t.size < 2 or t.size != v.size:
                raise ConfigError("tabulated link needs matching grid/values, >= 2 points")
            if np.any(np.diff(t) <= 0):
                raise ConfigError("tabulated link grid must be strictly increasing")
            if np.any(np.diff(v) < -1e-12):
                raise ConfigError("tabulated link values must be nondecreasing")
            if v.min() < -1e-12 or v.max() > 1 + 1e-12:
                raise ConfigError("tabulated link values must lie in [0, 1]")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "pure-noise":
            return np.full_like(t, 0.5)
        if self.kind == "logistic":
            out = np.empty_like(t)
            pos = t >= 0
            out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
            e = np.exp(t[~pos])
            out[~pos] = e / (1.0 + e)
            return out
        v = np.interp(t, self.grid, self.values)
        return np.clip(v, 0.0, 1.0)


LOGISTIC = LinkFunction("logistic")
PURE_NOISE = LinkFunction("pure-noise")


# ---------------------------------------------------------------------------
# spectral measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralMeasure:
    """Finite atomic measure on (lambda, wbar) pairs.

    ``lambdas`` are covariance eigenvalues, ``wbars`` the rescaled signal
    coordinates, ``masses`` nonnegative weights summing to one.  The declared
    constants bound the eigenvalue range (``c`` .. ``1/c``), the sup-norm of
    wbar (``c_prime``) and the mean absolute wbar from below (``c_dprime``).
    """

    lambdas: tuple[float, ...]
    wbars: tuple[float, ...]
    masses: tuple[float, ...]
    c: float = 0.5
    c_prime: float = float("inf")
    c_dprime: float = 0.0

    def __post_init__(self):
        if len(self.lambdas) == 0:
            raise InvalidMeasureError("spectral measure has no atoms")
        if not (len(self.lambdas) == len(self.wbars) == len(self.masses)):
            raise InvalidMeasureError("atom arrays must have equal length")
        if not 0.0 < self.c < 1.0:
            raise ConfigError("declared eigenvalue constant c must lie in (0, 1)")

    # arrays are rebuilt on demand so the dataclass stays hashable/immutable
    @property
    def lam(self) -> np.ndarray:
        return np.asarray(self.lambdas, dtype=float)

    @property
    def wbar(self) -> np.ndarray:
        return np.asarray(self.wbars, dtype=float)

    @property
    def mass(self) -> np.ndarray:
        return np.asarray(self.masses, dtype=float)

    @property
    def n_atoms(self) -> int:
        return len(self.lambdas)

    def expect(self, values: np.ndarray) -> float:
        """Exact expectation of per-atom values under the atom masses."""
        return float(np.dot(self.mass, values))

    def second_moment(self) -> float:
        return self.expect(self.wbar**2)

    def to_text(self) -> str:
        """Serialize to the plain-text atom format (see ``measure_from_text``)."""
        buf = io.StringIO()
        buf.write("# spectral measure: lambda wbar mass, one atom per line\n")
        buf.write(f"c {self.c!r}\n")
        buf.write(f"c_prime {self.c_prime!r}\n")
        buf.write(f"c_dprime {self.c_dprime!r}\n")
        for l, w, m in zip(self.lambdas, self.wbars, self.masses):
            buf.write("%.17g %.17g %.17g\n" % (l, w, m))
        return buf.getvalue()


def measure_from_text(text: str) -> SpectralMeasure:
    """Parse the plain-text measure format.

    Lines starting with ``#`` are comments.  ``key value`` lines declare the
    assumption constants; every other non-empty line is an atom
    ``lambda wbar mass``.  The ``%.17g`` writer makes round-trips bit-exact.
    """
    consts = {"c": 0.5, "c_prime": float("inf"), "c_dprime": 0.0}
    lam, wb, ms = [], [], []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] in consts and len(parts) == 2:
            consts[parts[0]] = float(parts[1])
            continue
        if len(parts) != 3:
            raise InvalidMeasureError(f"bad atom line: {raw!r}")
        lam.append(float(parts[0]))
        wb.append(float(parts[1]))
        ms.append(float(parts[2]))
    return SpectralMeasure(tuple(lam), tuple(wb), tuple(ms), **consts)


def standard_gaussian_measure(p: int, seed: int) -> SpectralMeasure:
    """Identity spectrum with p equal-mass atoms and Gaussian signal coordinates.

    wbar is drawn i.i.d. standard normal and rescaled so the second moment is
    exactly one, which pins the signal strength at finite p.
    """
    if p < 1:
        raise ConfigError("p must be >= 1")
    g = rng.generator(seed, rng.STREAM_MEASURE)
    w = g.standard_normal(p)
    norm = math.sqrt(float(np.mean(w**2)))
    if norm == 0.0:  # cannot happen for continuous draws; guards p=1 w=0 edge
        w = np.ones(p)
        norm = 1.0
    w = w / norm
    return SpectralMeasure(
        lambdas=(1.0,) * p,
        wbars=tuple(float(v) for v in w),
        masses=(1.0 / p,) * p,
        c=0.5,
        c_prime=float(np.max(np.abs(w))) + 1e-12,
        c_dprime=0.5 * float(np.mean(np.abs(w))),
    )


# ---------------------------------------------------------------------------
# model variants and configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiagonalVariant:
    name: str = "diagonal"


@dataclass(frozen=True)
class GmmVariant:
    """Label-balanced Gaussian mixture: x = y*theta_star + sum_c m_c*tilde_c + noise.

    ``upsilon`` is P(y = +1).  ``latent_strengths`` lists the Euclidean norms
    of the sqrt(p)-scaled latent spike directions (empty tuple = rank one);
    ``latent_law`` is ``rademacher`` or ``gaussian``.
    """

    upsilon: float = 0.5
    latent_strengths: tuple[float, ...] = ()
    latent_law: str = "rademacher"
    name: str = field(default="gmm", init=False)

    def __post_init__(self):
        if not 0.0 < self.upsilon < 1.0:
            raise ConfigError("upsilon must lie in (0, 1)")
        if self.latent_law not in ("rademacher", "gaussian"):
            raise ConfigError("latent_law must be rademacher or gaussian")

    @property
    def rank(self) -> int:
        return 1 + len(self.latent_strengths)


@dataclass(frozen=True)
class MisspecifiedVariant:
    """Labels depend on hidden features: q = round(phi*n) extra columns of
    strength ``gamma`` are used to generate y and then discarded."""

    gamma: float = 1.0
    phi: float = 1.0
    name: str = field(default="misspecified", init=False)

    def __post_init__(self):
        if self.gamma < 0 or self.phi < 0:
            raise ConfigError("gamma and phi must be nonnegative")


Variant = DiagonalVariant | GmmVariant | MisspecifiedVariant


@dataclass(frozen=True)
class ModelConfig:
    psi: float
    rho: float
    n: int
    link: LinkFunction = LOGISTIC
    measure: SpectralMeasure | None = None
    variant: Variant = DiagonalVariant()
    seed: int = 0

    def __post_init__(self):
        if self.psi <= 0:
            raise ConfigError("psi must be positive")
        if self.rho < 0:
            raise ConfigError("rho must be nonnegative")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.p < 1:
            raise ConfigError("round(psi*n) must be >= 1")

    @property
    def p(self) -> int:
        return int(round(self.psi * self.n))

    def resolved_measure(self) -> SpectralMeasure:
        """The configured measure, defaulting to a standard Gaussian one of size p."""
        if self.measure is not None:
            return self.measure
        return standard_gaussian_measure(self.p, self.seed)


# ---------------------------------------------------------------------------
# assumption validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    measured: float
    bound: str
    ok: bool


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[AssumptionCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def violated(self) -> list[str]:
        return [c.name for c in self.checks if not c.ok]

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            lines.append(
                f"[{'pass' if c.ok else 'FAIL'}] {c.name}: measured {c.measured:.6g}, requires {c.bound}"
            )
        return "\n".join(lines)


def validate(config: ModelConfig) -> ValidationReport:
    """Check the structural assumptions of the model on its spectral measure.

    Verifies the eigenvalue range, the unit second moment of the signal
    coordinates, the declared sup-norm and mean-absolute bounds, the mass
    normalization, and variant parameters.  Returns a per-assumption report.
    """
    m = config.resolved_measure()
    lam, wb, mass = m.lam, m.wbar, m.mass
    checks = []

    checks.append(
        AssumptionCheck(
            "eigenvalue-range",
            float(lam.min()),
            f"lambda in [{m.c:g}, {1.0 / m.c:g}]",
            bool(lam.min() >= m.c - 1e-12 and lam.max() <= 1.0 / m.c + 1e-12),
        )
    )
    checks.append(
        AssumptionCheck(
            "mass-normalization",
            float(mass.sum()),
            "masses >= 0, sum to 1",
            bool(mass.min() >= 0 and abs(mass.sum() - 1.0) <= 1e-9),
        )
    )
    m2 = m.second_moment()
    checks.append(
        AssumptionCheck(
            "signal-second-moment",
            m2,
            f"|E wbar^2 - 1| <= {SECOND_MOMENT_TOL:g}",
            bool(abs(m2 - 1.0) <= SECOND_MOMENT_TOL),
        )
    )
    sup = float(np.max(np.abs(wb)))
    checks.append(
        AssumptionCheck("signal-sup-norm", sup, f"max|wbar| <= {m.c_prime:g}", bool(sup <= m.c_prime))
    )
    mean_abs = m.expect(np.abs(wb))
    checks.append(
        AssumptionCheck(
            "signal-mean-abs",
            mean_abs,
            f"E|wbar| >= {m.c_dprime:g}",
            bool(mean_abs >= m.c_dprime),
        )
    )
    if isinstance(config.variant, DiagonalVariant) or isinstance(config.variant, MisspecifiedVariant):
        checks.append(
            AssumptionCheck(
                "atom-count",
                float(m.n_atoms),
                f"one atom per coordinate (p = {config.p})",
                m.n_atoms == config.p,
            )
        )
    return ValidationReport(tuple(checks))


def config_digest(pairs: Iterable[tuple[str, object]]) -> str:
    """Stable hash of key-value configuration pairs, for CSV headers."""
    h = hashlib.sha256()
    for k, v in sorted((str(k), repr(v)) for k, v in pairs):
        h.update(k.encode())
        h.update(b"=")
        h.update(v.encode())
        h.update(b"\n")
    return h.hexdigest()[:16]
