"""Batch orchestration: experiment configs, grid sweeps, CSV emission.

Every experiment writes CSV files whose first line is a comment carrying the
config digest and root seed; reruns with the same config reproduce the files
byte for byte.  Figures are rendered afterwards from the CSV content only
(see plots.py), so disabling them never changes the data outputs.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import boosting, datagen, fixedpoint, fkappa, margin, rng
from .spectra import (
    ConfigError,
    DiagonalVariant,
    GmmVariant,
    LinkFunction,
    LOGISTIC,
    MisspecifiedVariant,
    ModelConfig,
    PURE_NOISE,
    config_digest,
    standard_gaussian_measure,
)

EXPERIMENTS = (
    "sweep-psi",
    "normalized-margin",
    "heatmap",
    "boost-run",
    "universality",
    "robustness-rademacher",
    "predict",
)


@dataclass
class ExperimentConfig:
    experiment: str = "sweep-psi"
    n: int = 400
    rho: float = 1.0
    link: str = "logistic"
    psi_grid: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    rho_grid: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0)
    replicates: int = 10
    mc_samples: int = 5000
    seed: int = 20240601
    threads: int = 1
    out: str = "out"
    variant: str = "diagonal"
    upsilon: float = 0.5
    gamma: float = 1.0
    phi: float = 1.0
    q: float = 1.0
    eps: float = 0.25
    m_test: int = 20000
    d_features: int = 800
    sigma: str = "compact-odd"
    mode: str = "features"
    measure_file: str = ""
    make_plots: bool = True

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not self.psi_grid or not self.rho_grid:
            raise ConfigError("grids must be nonempty")
        if self.mc_samples < 100:
            raise ConfigError("mc_samples must be >= 100")

    @property
    def link_fn(self) -> LinkFunction:
        if self.link == "logistic":
            return LOGISTIC
        if self.link == "pure-noise":
            return PURE_NOISE
        raise ConfigError(f"unknown link {self.link!r}")

    def digest(self) -> str:
        # out/threads/make_plots affect where and how fast, never what
        skip = {"out", "threads", "make_plots"}
        return config_digest((k, v) for k, v in vars(self).items() if k not in skip)


_CONFIG_KEYS = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}  # type: ignore[attr-defined]


def parse_config_text(text: str) -> dict:
    """Parse the flat ``key = value`` config format (# starts a comment)."""
    out: dict = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"bad config line (expected key = value): {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _coerce(key, val)
    return out


def _coerce(key: str, val: str):
    if key in ("psi_grid", "rho_grid"):
        return tuple(float(v) for v in val.replace(",", " ").split())
    if key in ("n", "replicates", "mc_samples", "seed", "threads", "m_test", "d_features"):
        return int(val)
    if key in ("rho", "upsilon", "gamma", "phi", "q", "eps"):
        return float(val)
    if key == "make_plots":
        return val.lower() in ("1", "true", "yes")
    return val


def load_config(path: str | None, overrides: dict | None = None) -> ExperimentConfig:
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            data.update(parse_config_text(fh.read()))
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**data)


# ---------------------------------------------------------------------------
# CSV plumbing
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return "%.10g" % v
    return str(v)


def write_csv(path, columns, rows, cfg: ExperimentConfig) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# config={cfg.digest()} seed={cfg.seed}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return str(path)


def _pool_map(fn, tasks, threads):
    """Order-preserving map, fanned out to processes when threads > 1."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


# ---------------------------------------------------------------------------
# per-replicate worker (module-level so it pickles)
# ---------------------------------------------------------------------------


def _model_config(cfg: ExperimentConfig, psi: float, rho: float, seed: int,
                  n: int | None = None) -> ModelConfig:
    n = cfg.n if n is None else n
    p = int(round(psi * n))
    measure = standard_gaussian_measure(p, seed)
    if cfg.variant == "diagonal":
        variant = DiagonalVariant()
    elif cfg.variant == "gmm":
        variant = GmmVariant(upsilon=cfg.upsilon)
    elif cfg.variant == "misspecified":
        variant = MisspecifiedVariant(gamma=cfg.gamma, phi=cfg.phi)
    else:
        raise ConfigError(f"unknown variant {cfg.variant!r}")
    return ModelConfig(psi=psi, rho=rho, n=n, link=cfg.link_fn, measure=measure,
                       variant=variant, seed=seed)


def _sample(config: ModelConfig, design: str = "gaussian"):
    if isinstance(config.variant, GmmVariant):
        return datagen.sample_gmm(config)
    if isinstance(config.variant, MisspecifiedVariant):
        return datagen.sample_misspecified(config)
    return datagen.sample_diagonal(config, design=design)


def _margin_task(args) -> dict:
    """One replicate: max margin LP plus test error of the margin direction."""
    cfg, psi, rho, rep, design = args
    seed = rng.split_seed(cfg.seed, 7919 * rep + 13)
    config = _model_config(cfg, psi, rho, seed)
    ds = _sample(config, design=design)
    mr = margin.max_margin_l1(ds)
    out = {
        "psi": psi,
        "rho": rho,
        "rep": rep,
        "p": config.p,
        "kappa_scaled": math.sqrt(config.p) * mr.kappa,
        "separable": mr.separable,
        "err": float("nan"),
    }
    if mr.separable:
        out["err"] = margin.generalization_error(
            mr.theta, config, cfg.m_test, rng.split_seed(seed, 104729)
        )
    return out


def _predict_point(cfg: ExperimentConfig, psi: float, rho: float):
    """Asymptotic prediction for one grid point of the configured variant."""
    p = int(round(psi * cfg.n))
    seed = rng.split_seed(cfg.seed, 15485863)
    if cfg.variant == "gmm":
        config = _model_config(cfg, psi, rho, seed)
        atoms = fixedpoint.atoms_for_gmm(config)
        return fixedpoint.kappa_star(atoms, psi, rho, None, "gmm")
    measure = standard_gaussian_measure(p, seed)
    gamma = cfg.gamma if cfg.variant == "misspecified" else 0.0
    kind = "misspec" if cfg.variant == "misspecified" else "glm"
    cloud = fkappa.make_cloud(kind, cfg.mc_samples, rho, cfg.link_fn,
                              rng.split_seed(cfg.seed, 32452843), gamma=gamma)
    return fixedpoint.kappa_star(measure, psi, rho, cloud, kind, q=cfg.q, gamma=gamma)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def run_sweep_psi(cfg: ExperimentConfig, design: str = "gaussian") -> list[str]:
    """Empirical scaled margins and test errors across the psi grid, next to
    the asymptotic predictions (margin limit, error limit, optimal error)."""
    tasks = [(cfg, psi, cfg.rho, rep, design)
             for psi in cfg.psi_grid for rep in range(cfg.replicates)]
    results = _pool_map(_margin_task, tasks, cfg.threads)
    rows = []
    failures = []
    for i, psi in enumerate(cfg.psi_grid):
        chunk = results[i * cfg.replicates : (i + 1) * cfg.replicates]
        kappas = np.array([r["kappa_scaled"] for r in chunk])
        errs = np.array([r["err"] for r in chunk if not math.isnan(r["err"])])
        n_sep = sum(r["separable"] for r in chunk)
        try:
            pred = _predict_point(cfg, psi, cfg.rho)
        except fkappa.NumericalError as exc:  # record and keep sweeping
            failures.append((psi, str(exc)))
            pred = fixedpoint.AsymptoticPrediction(
                float("nan"), float("nan"), float("nan"), float("nan"), float("nan"), None
            )
        rows.append([
            psi, cfg.n, int(round(psi * cfg.n)), cfg.replicates,
            float(np.mean(kappas)), float(np.std(kappas)), n_sep,
            float(np.mean(errs)) if errs.size else float("nan"),
            float(np.std(errs)) if errs.size else float("nan"),
            pred.kappa_star, pred.err_star, pred.bayes_err, pred.angle,
            pred.classical_bound,
        ])
    columns = [
        "psi", "n", "p", "replicates", "kappa_emp_mean", "kappa_emp_sd",
        "n_separable", "err_emp_mean", "err_emp_sd", "kappa_pred", "err_pred",
        "bayes_pred", "angle_pred", "classical_bound",
    ]
    suffix = "" if design == "gaussian" else f"_{design}"
    path = os.path.join(cfg.out, f"sweep_psi{suffix}.csv")
    files = [write_csv(path, columns, rows, cfg)]
    for psi, msg in failures:
        print(f"warning: prediction failed at psi={psi:g}: {msg}")
    if cfg.make_plots:
        from . import plots

        files.append(plots.plot_sweep(path))
    return files


def run_normalized_margin(cfg: ExperimentConfig) -> list[str]:
    """The psi sweep rescaled by sqrt(psi), plus the classical-bound column."""
    sweep_cfg = replace(cfg, make_plots=False)
    sweep_path = run_sweep_psi(sweep_cfg)[0]
    rows = []
    data = read_csv_rows(sweep_path)
    for rec in data:
        psi = float(rec["psi"])
        scaled_emp = float(rec["kappa_emp_mean"]) / math.sqrt(psi)
        kp = float(rec["kappa_pred"])
        scaled_pred = kp / math.sqrt(psi)
        classical = float(rec["classical_bound"])
        rows.append([psi, scaled_emp, scaled_pred, classical,
                     int(classical > 0.5 or math.isinf(classical))])
    pred_vals = [r[2] for r in rows if not math.isnan(r[2])]
    if any(b <= a + 1e-12 for a, b in zip(pred_vals, pred_vals[1:])):
        print("warning: predicted scaled margin is not strictly increasing on this grid")
    columns = ["psi", "scaled_margin_emp", "scaled_margin_pred",
               "classical_bound", "bound_exceeds_half"]
    path = os.path.join(cfg.out, "normalized_margin.csv")
    files = [write_csv(path, columns, rows, cfg)]
    if cfg.make_plots:
        from . import plots

        files.append(plots.plot_normalized(path))
    return files


def _heatmap_point(args) -> list:
    cfg, psi, rho = args
    sub = replace(cfg, variant="gmm", make_plots=False)
    pred = _predict_point(sub, psi, rho)
    kappas, errs = [], []
    for rep in range(cfg.replicates):
        seed = rng.split_seed(cfg.seed, 7919 * rep + 13)
        config = _model_config(sub, psi, rho, seed)
        ds = datagen.sample_gmm(config)
        mr = margin.max_margin_l1(ds)
        kappas.append(math.sqrt(config.p) * mr.kappa)
        if mr.separable:
            errs.append(margin.generalization_error(
                mr.theta, config, cfg.m_test, rng.split_seed(seed, 104729)))
    return [psi, rho, pred.kappa_star, pred.err_star,
            float(np.mean(kappas)), float(np.mean(errs)) if errs else float("nan"),
            pred.bayes_err]


def run_heatmap(cfg: ExperimentConfig) -> list[str]:
    """Mixture-model margin and error over a (psi, rho) grid: asymptotic
    prediction next to finite-sample LP averages (identity covariance;
    the signal is rescaled per row to match each target strength)."""
    tasks = [(cfg, psi, rho) for rho in cfg.rho_grid for psi in cfg.psi_grid]
    rows = _pool_map(_heatmap_point, tasks, cfg.threads)
    columns = ["psi", "rho", "kappa_pred", "err_pred", "kappa_emp", "err_emp", "bayes_pred"]
    path = os.path.join(cfg.out, "heatmap.csv")
    files = [write_csv(path, columns, rows, cfg)]
    if cfg.make_plots:
        from . import plots

        files.append(plots.plot_heatmap(path))
    return files


def run_boost(cfg: ExperimentConfig) -> list[str]:
    """One boosting study: adaptive run to interpolation, shrinkage run with
    its certificate, sparsity at interpolation, and test error of the final
    iterate against the interpolant's predicted limit."""
    psi = cfg.psi_grid[0]
    seed = rng.split_seed(cfg.seed, 13)
    config = _model_config(cfg, psi, cfg.rho, seed)
    ds = _sample(config)
    mr = margin.max_margin_l1(ds)
    if not mr.separable:
        raise fkappa.NumericalError("boost-run needs separable data; raise psi or rho")
    kappa_lp = mr.kappa
    M = float(np.max(np.abs(ds.X)))
    n, p = ds.n, ds.p

    T_zero, _ = boosting.certified_T(n, M, kappa_lp, 0.99, kind="zero-error")
    adaptive = boosting.boost_run(ds, q=cfg.q, stepsize="adaptive",
                                  T=min(T_zero, 500_000))
    T_cert, beta = boosting.certified_T(n, M, kappa_lp, cfg.eps, p=p, q=cfg.q)
    shrink = boosting.boost_run(
        ds, q=cfg.q, stepsize=boosting.StepsizeSpec("shrinkage", beta),
        T=min(T_cert, 2_000_000),
    )
    final_margin = shrink.normalized_margin(ds)
    pred = _predict_point(cfg, psi, cfg.rho)
    theta_dir = shrink.theta / np.abs(shrink.theta).sum()
    gen_err = margin.generalization_error(theta_dir, config, cfg.m_test,
                                          rng.split_seed(seed, 104729))
    s0 = boosting.active_features(adaptive) if adaptive.interp_time else -1
    bound_s0 = 12.0 / pred.kappa_star**2 * p * math.log(p) ** 2 if pred.kappa_star > 0 else float("inf")
    rows = [[
        n, p, kappa_lp, M, T_zero, adaptive.interp_time or -1, s0, bound_s0,
        cfg.eps, T_cert, beta, shrink.t, final_margin, (1 - cfg.eps) * kappa_lp,
        int(final_margin > (1 - cfg.eps) * kappa_lp), gen_err, pred.err_star,
        pred.bayes_err, pred.kappa_star,
    ]]
    columns = [
        "n", "p", "kappa_lp", "M", "T_zero_bound", "interp_time", "active_at_interp",
        "active_bound", "eps", "T_certified", "beta", "steps_run", "final_margin",
        "margin_floor", "margin_ok", "gen_err_final", "err_pred", "bayes_pred",
        "kappa_star",
    ]
    path = os.path.join(cfg.out, "boost_summary.csv")
    files = [write_csv(path, columns, rows, cfg)]
    trace_path = os.path.join(cfg.out, "boost_trace.csv")
    boosting.trace_to_csv(shrink, trace_path,
                          header_comment=f"config={cfg.digest()} seed={cfg.seed}")
    files.append(trace_path)
    if cfg.make_plots:
        from . import plots

        files.append(plots.plot_boost(trace_path, kappa_lp, cfg.eps))
    return files


def _universality_rep(args) -> list:
    cfg, rep = args
    seed = rng.split_seed(cfg.seed, 7919 * rep + 13)
    config = _model_config(cfg, cfg.psi_grid[0], cfg.rho, seed)
    ds = datagen.sample_diagonal(config)
    sigma = datagen.default_activation if cfg.sigma == "compact-odd" else (lambda t: t)
    pair = datagen.make_feature_pair(ds, cfg.d_features, sigma, rng.split_seed(seed, 31))
    scale = math.sqrt(cfg.d_features)
    ka = scale * margin.max_margin_l1(datagen.Dataset(pair.A, ds.y)).kappa
    kb = scale * margin.max_margin_l1(datagen.Dataset(pair.B, ds.y)).kappa
    return [rep, ka, kb, abs(ka - kb)]


def run_universality(cfg: ExperimentConfig) -> list[str]:
    """Paired scaled margins on nonlinear random features and their
    moment-matched Gaussian surrogate (identical weight matrix and source)."""
    tasks = [(cfg, rep) for rep in range(cfg.replicates)]
    rows = _pool_map(_universality_rep, tasks, cfg.threads)
    columns = ["rep", "kappa_features", "kappa_surrogate", "abs_diff"]
    path = os.path.join(cfg.out, "universality.csv")
    return [write_csv(path, columns, rows, cfg)]


def run_robustness_rademacher(cfg: ExperimentConfig) -> list[str]:
    """Margin and excess-error curves under Rademacher vs Gaussian designs
    with matching moments, averaged over replicates per psi."""
    rows = []
    bayes = fixedpoint.bayes_error(cfg.rho, cfg.link_fn)
    for design in ("gaussian", "rademacher"):
        tasks = [(cfg, psi, cfg.rho, rep, design)
                 for psi in cfg.psi_grid for rep in range(cfg.replicates)]
        results = _pool_map(_margin_task, tasks, cfg.threads)
        for i, psi in enumerate(cfg.psi_grid):
            chunk = results[i * cfg.replicates : (i + 1) * cfg.replicates]
            kappas = [r["kappa_scaled"] for r in chunk]
            errs = [r["err"] for r in chunk if not math.isnan(r["err"])]
            rows.append([design, psi, float(np.mean(kappas)),
                         (float(np.mean(errs)) - bayes) if errs else float("nan")])
    columns = ["design", "psi", "kappa_mean", "excess_err_mean"]
    path = os.path.join(cfg.out, "robustness_rademacher.csv")
    files = [write_csv(path, columns, rows, cfg)]
    if cfg.make_plots:
        from . import plots

        files.append(plots.plot_robustness(path))
    return files


def run_predict(cfg: ExperimentConfig) -> list[str]:
    """Asymptotic predictions only (no sampling): one CSV row per grid point."""
    rows = []
    for psi in cfg.psi_grid:
        pred = _predict_point(cfg, psi, cfg.rho)
        sol = pred.solution
        rows.append([
            psi, cfg.rho, pred.kappa_star,
            sol.c1 if sol else float("nan"),
            sol.c2 if sol else float("nan"),
            sol.s if sol else float("nan"),
            float(np.max(np.abs(sol.residuals))) if sol else float("nan"),
            pred.err_star, pred.bayes_err, pred.angle,
        ])
    columns = ["psi", "rho", "kappa", "c1", "c2", "s", "residual",
               "err_star", "bayes", "angle"]
    path = os.path.join(cfg.out, "predict.csv")
    return [write_csv(path, columns, rows, cfg)]


def run_margin_adhoc(cfg: ExperimentConfig) -> list[str]:
    """Single-instance primal/dual/interpolant cross-check on generated data."""
    psi = cfg.psi_grid[0]
    config = _model_config(cfg, psi, cfg.rho, rng.split_seed(cfg.seed, 13))
    ds = _sample(config)
    mr = margin.max_margin_l1(ds)
    dual = margin.dual_margin(ds)
    if mr.separable:
        _, nrm = margin.min_norm_interpolant_l1(ds)
        recip = nrm * mr.kappa
    else:
        nrm, recip = float("nan"), float("nan")
    rows = [[config.n, config.p, mr.status, mr.kappa, dual, abs(mr.kappa - dual),
             nrm, recip, mr.iterations]]
    columns = ["n", "p", "status", "kappa", "dual", "gap", "interp_norm",
               "norm_times_kappa", "iterations"]
    path = os.path.join(cfg.out, "margin.csv")
    return [write_csv(path, columns, rows, cfg)]


def read_csv_rows(path) -> list[dict]:
    """Read back one of our CSV files as a list of string-valued dicts."""
    with open(path) as fh:
        lines = [l.rstrip("\n") for l in fh if not l.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:] if line]


RUNNERS = {
    "sweep-psi": run_sweep_psi,
    "normalized-margin": run_normalized_margin,
    "heatmap": run_heatmap,
    "boost-run": run_boost,
    "universality": run_universality,
    "robustness-rademacher": run_robustness_rademacher,
    "predict": run_predict,
}
