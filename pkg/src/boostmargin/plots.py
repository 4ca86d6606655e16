"""Figure rendering.  Every plot is pure formatting over an already-written
CSV file and is saved as SVG next to it, so disabling plots never changes any
data output and rerendering never recomputes anything."""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .experiments import read_csv_rows

_EMP = dict(color="tab:blue", marker="o", ls="none", label="simulation")
_PRED = dict(color="tab:red", marker="x", ls="-", label="prediction")


def _setup(path):
    plt.rcParams["svg.hashsalt"] = os.path.basename(path)
    plt.rcParams["figure.dpi"] = 100


def _save(fig, csv_path, suffix=""):
    out = os.path.splitext(csv_path)[0] + suffix + ".svg"
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out


def _col(rows, name):
    return [float(r[name]) for r in rows]


def plot_sweep(csv_path) -> str:
    """Two panels: scaled margin and test error against psi."""
    _setup(csv_path)
    rows = read_csv_rows(csv_path)
    psi = _col(rows, "psi")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6), constrained_layout=True)
    ax1.errorbar(psi, _col(rows, "kappa_emp_mean"), yerr=_col(rows, "kappa_emp_sd"), **_EMP)
    ax1.plot(psi, _col(rows, "kappa_pred"), **_PRED)
    ax1.set_xlabel(r"$p/n$")
    ax1.set_ylabel("scaled max margin")
    ax1.legend()
    ax2.plot(psi, _col(rows, "err_emp_mean"), **_EMP)
    ax2.plot(psi, _col(rows, "err_pred"), **_PRED)
    ax2.plot(psi, _col(rows, "bayes_pred"), color="gray", ls="--", label="optimal error")
    ax2.set_xlabel(r"$p/n$")
    ax2.set_ylabel("test error")
    ax2.legend()
    return _save(fig, csv_path)


def plot_normalized(csv_path) -> str:
    _setup(csv_path)
    rows = read_csv_rows(csv_path)
    psi = _col(rows, "psi")
    fig, ax = plt.subplots(figsize=(5, 3.6), constrained_layout=True)
    ax.plot(psi, _col(rows, "scaled_margin_emp"), **_EMP)
    ax.plot(psi, _col(rows, "scaled_margin_pred"), **_PRED)
    ax.set_xlabel(r"$p/n$")
    ax.set_ylabel(r"margin limit / $\sqrt{\psi}$")
    ax.legend()
    return _save(fig, csv_path)


def plot_heatmap(csv_path) -> str:
    """Four panels: margin and error, prediction vs finite-sample."""
    _setup(csv_path)
    rows = read_csv_rows(csv_path)
    psis = sorted({float(r["psi"]) for r in rows})
    rhos = sorted({float(r["rho"]) for r in rows})
    grids = {}
    for name in ("kappa_pred", "kappa_emp", "err_pred", "err_emp"):
        grid = [[math.nan] * len(psis) for _ in rhos]
        for r in rows:
            i = rhos.index(float(r["rho"]))
            j = psis.index(float(r["psi"]))
            grid[i][j] = float(r[name])
        grids[name] = grid
    fig, axes = plt.subplots(2, 2, figsize=(9, 7), constrained_layout=True)
    titles = {
        "kappa_pred": "margin (prediction)",
        "kappa_emp": "margin (simulation)",
        "err_pred": "error (prediction)",
        "err_emp": "error (simulation)",
    }
    extent = (min(psis), max(psis), min(rhos), max(rhos))
    for ax, name in zip(axes.flat, ("kappa_pred", "kappa_emp", "err_pred", "err_emp")):
        im = ax.imshow(grids[name], origin="lower", aspect="auto", extent=extent)
        ax.set_title(titles[name])
        ax.set_xlabel(r"$p/n$")
        ax.set_ylabel("signal strength")
        fig.colorbar(im, ax=ax)
    return _save(fig, csv_path)


def plot_boost(trace_csv, kappa_lp: float, eps: float) -> str:
    _setup(trace_csv)
    rows = read_csv_rows(trace_csv)
    t = _col(rows, "t")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6), constrained_layout=True)
    ax1.plot(t, _col(rows, "gamma"), color="tab:blue", label="dual margin along run")
    ax1.axhline(kappa_lp, color="tab:red", ls="--", label="max margin")
    ax1.axhline((1 - eps) * kappa_lp, color="gray", ls=":", label="certified floor")
    ax1.set_xscale("log")
    ax1.set_xlabel("step")
    ax1.set_ylabel("margin scale")
    ax1.legend()
    ax2.plot(t, _col(rows, "train_err"), color="tab:blue", label="training error")
    ax2.plot(t, _col(rows, "active_count"), color="tab:green", ls="--", label="active features")
    ax2.set_xscale("log")
    ax2.set_xlabel("step")
    ax2.legend()
    return _save(fig, trace_csv)


def plot_robustness(csv_path) -> str:
    _setup(csv_path)
    rows = read_csv_rows(csv_path)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6), constrained_layout=True)
    styles = {"gaussian": dict(color="tab:blue", marker="o"),
              "rademacher": dict(color="tab:orange", marker="s")}
    for design, style in styles.items():
        sub = [r for r in rows if r["design"] == design]
        psi = _col(sub, "psi")
        ax1.plot(psi, _col(sub, "kappa_mean"), label=design, **style)
        ax2.plot(psi, _col(sub, "excess_err_mean"), label=design, **style)
    ax1.set_xlabel(r"$p/n$")
    ax1.set_ylabel("scaled max margin")
    ax2.set_xlabel(r"$p/n$")
    ax2.set_ylabel("test error minus optimal")
    ax1.legend()
    ax2.legend()
    return _save(fig, csv_path)
