"""Samplers for every synthetic data-generating process, plus the
random-feature transformations used in the universality experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng
from .spectra import (
    ConfigError,
    DiagonalVariant,
    GmmVariant,
    MisspecifiedVariant,
    ModelConfig,
    SpectralMeasure,
)


@dataclass(frozen=True)
class Dataset:
    """Labelled design matrix; theta_star is the generating signal when known."""

    X: np.ndarray
    y: np.ndarray
    theta_star: np.ndarray | None = None

    def __post_init__(self):
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ConfigError("X must be n x p with y of length n")
        if not np.all(np.abs(self.y) == 1.0):
            raise ConfigError("labels must be +-1")
        self.X.setflags(write=False)
        self.y.setflags(write=False)
        if self.theta_star is not None:
            self.theta_star.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def signed(self) -> np.ndarray:
        """Rows multiplied by their labels (margins are rows of signed() @ theta)."""
        return self.y[:, None] * self.X


def theta_from_measure(measure: SpectralMeasure, rho: float) -> np.ndarray:
    """Signal vector with coordinates rho*wbar_i/(sqrt(p*lambda_i)), rescaled so
    the Lambda-weighted norm is exactly rho at finite p."""
    lam, wb = measure.lam, measure.wbar
    p = measure.n_atoms
    theta = rho * wb / (np.sqrt(p) * np.sqrt(lam))
    cur = float(theta @ (lam * theta))
    if cur > 0:
        theta = theta * (rho / math.sqrt(cur))
    return theta


def _draw_labels(g: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    return np.where(g.random(probs.shape[0]) < probs, 1.0, -1.0)


def sample_diagonal(config: ModelConfig, design: str = "gaussian", data_seed: int | None = None) -> Dataset:
    """Rows x_i ~ N(0, Lambda) (or matched-moment Rademacher entries when
    ``design="rademacher"``), labels +1 with probability link(<theta_star, x>).

    ``data_seed`` redraws noise and labels while keeping the model identity
    (measure, signal) fixed; it defaults to the config seed.
    """
    if not isinstance(config.variant, DiagonalVariant):
        raise ConfigError("sample_diagonal requires the diagonal variant")
    measure = config.resolved_measure()
    if measure.n_atoms != config.p:
        raise ConfigError(
            f"measure has {measure.n_atoms} atoms but p = {config.p}; one atom per coordinate required"
        )
    g = rng.generator(config.seed if data_seed is None else data_seed, rng.STREAM_DATA)
    if design == "gaussian":
        Z = g.standard_normal((config.n, config.p))
    elif design == "rademacher":
        Z = g.choice([-1.0, 1.0], size=(config.n, config.p))
    else:
        raise ConfigError(f"unknown design {design!r}")
    X = Z * np.sqrt(measure.lam)[None, :]
    theta = theta_from_measure(measure, config.rho)
    y = _draw_labels(g, config.link(X @ theta))
    return Dataset(X, y, theta)


def gmm_directions(config: ModelConfig) -> tuple[np.ndarray, list[np.ndarray]]:
    """Mean direction and latent spike directions for the mixture variant.

    The mean has squared norm rho^2 * mean(lambda) so the signal-to-noise
    ratio ||sqrt(p) theta_star||^2 / tr(Lambda) equals rho^2 exactly; latent
    spikes are unit Gaussian directions scaled the same way by their declared
    strengths.  Directions depend only on (measure, seed), so predictions can
    rebuild them.
    """
    variant = config.variant
    if not isinstance(variant, GmmVariant):
        raise ConfigError("gmm directions require a gmm variant")
    measure = config.resolved_measure()
    if measure.n_atoms != config.p:
        raise ConfigError("measure must have one atom per coordinate")
    lam_scale = math.sqrt(float(np.mean(measure.lam)))
    p = config.p
    theta = config.rho * lam_scale * measure.wbar / math.sqrt(p)
    nrm = np.linalg.norm(theta)
    if nrm > 0:
        theta = theta * (config.rho * lam_scale / nrm)
    tildes = []
    for c, strength in enumerate(variant.latent_strengths):
        gd = rng.generator(config.seed, rng.STREAM_MEASURE ^ (c + 1))
        u = gd.standard_normal(p)
        u = u / np.linalg.norm(u)
        tildes.append(strength * lam_scale * u)
    return theta, tildes


def sample_gmm(config: ModelConfig, data_seed: int | None = None) -> Dataset:
    """x = y*theta_star + sum_c m_c*tilde_c + noise with noise ~ N(0, Lambda).

    Spike directions are part of the model identity and always derive from
    the config seed; ``data_seed`` only redraws labels, latents and noise.
    """
    variant = config.variant
    if not isinstance(variant, GmmVariant):
        raise ConfigError("sample_gmm requires a gmm variant")
    measure = config.resolved_measure()
    theta, tildes = gmm_directions(config)
    g = rng.generator(config.seed if data_seed is None else data_seed, rng.STREAM_DATA)
    n, p = config.n, config.p
    y = np.where(g.random(n) < variant.upsilon, 1.0, -1.0)
    X = y[:, None] * theta[None, :]
    for tilde in tildes:
        if variant.latent_law == "rademacher":
            m = g.choice([-1.0, 1.0], size=n)
        else:
            m = g.standard_normal(n)
        X = X + m[:, None] * tilde[None, :]
    X = X + g.standard_normal((n, p)) * np.sqrt(measure.lam)[None, :]
    return Dataset(X, y, theta)


def sample_misspecified(config: ModelConfig, keep_hidden: bool = False, data_seed: int | None = None):
    """Labels generated from (x, z) with z a hidden block of q = round(phi*n)
    standard normal columns and hidden signal of norm gamma; only the x block
    is returned.  ``keep_hidden=True`` additionally returns (Z, theta_z) for
    oracle diagnostics."""
    variant = config.variant
    if not isinstance(variant, MisspecifiedVariant):
        raise ConfigError("sample_misspecified requires the misspecified variant")
    measure = config.resolved_measure()
    if measure.n_atoms != config.p:
        raise ConfigError("measure must have one atom per coordinate")
    g = rng.generator(config.seed if data_seed is None else data_seed, rng.STREAM_DATA)
    n, p = config.n, config.p
    q = int(round(variant.phi * n))
    X = g.standard_normal((n, p)) * np.sqrt(measure.lam)[None, :]
    theta_x = theta_from_measure(measure, config.rho)
    latent = X @ theta_x
    Z = None
    theta_z = None
    if q > 0:
        Z = g.standard_normal((n, q))
        theta_z = np.full(q, variant.gamma / math.sqrt(q))
        latent = latent + Z @ theta_z
    y = _draw_labels(g, config.link(latent))
    ds = Dataset(X, y, theta_x)
    if keep_hidden:
        return ds, Z, theta_z
    return ds


# ---------------------------------------------------------------------------
# random features
# ---------------------------------------------------------------------------


def default_activation(t):
    """Odd, compactly supported C^3 bump: t*(1 - t^2/9)^3 on |t| <= 3, else 0."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) <= 3.0
    out = np.zeros_like(t)
    ti = t[inside]
    out[inside] = ti * (1.0 - ti * ti / 9.0) ** 3
    return out


def hermite_calibrate(sigma: Callable, quad_size: int = 201) -> tuple[float, float, float]:
    """Gaussian moments (E sigma(Z), E Z sigma(Z), sqrt(E sigma^2 - mu0^2 - mu1^2)).

    The radicand is clamped at zero when it is a tiny negative rounding
    artifact; a genuinely negative radicand is a numerical inconsistency.
    """
    x, w = np.polynomial.hermite_e.hermegauss(quad_size)
    w = w / w.sum()
    s = np.asarray(sigma(x), dtype=float)
    mu0 = float(w @ s)
    mu1 = float(w @ (x * s))
    rad = float(w @ (s * s)) - mu0**2 - mu1**2
    if rad < -1e-10:
        raise ArithmeticError(f"negative second-moment radicand {rad:g}")
    mu2 = math.sqrt(max(rad, 0.0))
    return mu0, mu1, mu2


@dataclass(frozen=True)
class FeaturePair:
    """Nonlinear random features A and their moment-matched Gaussian surrogate B."""

    A: np.ndarray
    B: np.ndarray
    F: np.ndarray
    mu0: float
    mu1: float
    mu2: float

    def __post_init__(self):
        if self.A.shape != self.B.shape:
            raise ConfigError("A and B must share a shape")
        if self.mu2 < 0:
            raise ConfigError("mu2 must be nonnegative")
        for a in (self.A, self.B, self.F):
            a.setflags(write=False)


def make_feature_pair(dataset: Dataset, d: int, sigma: Callable, seed: int) -> FeaturePair:
    """A = sigma(X F) entrywise and B = mu0 + mu1*X F + mu2*Zstd with shared F.

    F has N(0, 1/p) entries; Zstd is a fresh standard normal matrix.  The
    moment calibration makes the first two feature moments of A and B agree.
    """
    if d < 1:
        raise ConfigError("d must be >= 1")
    g = rng.generator(seed, rng.STREAM_FEATURES)
    p = dataset.p
    F = g.standard_normal((p, d)) / math.sqrt(p)
    XF = dataset.X @ F
    mu0, mu1, mu2 = hermite_calibrate(sigma)
    A = np.asarray(sigma(XF), dtype=float)
    B = mu0 + mu1 * XF + mu2 * g.standard_normal(XF.shape)
    return FeaturePair(A, B, F, mu0, mu1, mu2)


def dataset_to_csv(dataset: Dataset, path) -> None:
    """Write the dataset as CSV with header y,x1..xp (external inspection only)."""
    header = "y," + ",".join(f"x{j + 1}" for j in range(dataset.p))
    data = np.column_stack([dataset.y, dataset.X])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.10g")
