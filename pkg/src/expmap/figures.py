"""Matplotlib renderings written next to the delimited output.

Every renderer takes the experiment report (or raw arrays), writes PNG
files into the output directory, and returns the written paths.  The Agg
backend is forced so rendering works headless.
"""

from __future__ import annotations

import math

import matplotlib
import numpy as np
from scipy.special import erf

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def density_figure(system, path, reference=None):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(system.cell_midpoints, system.require_density(), lw=0.8,
            label="Ulam density")
    if reference is not None:
        ax.plot(system.cell_midpoints, reference, lw=0.8, ls="--",
                label="reference")
        ax.legend()
    ax.set_xlabel("x")
    ax.set_ylabel("h(x)")
    ax.set_title(f"invariant density ({system.family.kind}, a={system.a:g}, "
                 f"N={system.grid_count})")
    return _finish(fig, path)


def autocovariance_figure(covs, path, title="autocovariances"):
    covs = np.asarray(covs)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(np.arange(covs.size), np.abs(covs) + 1e-300, "o-", ms=3)
    ax.set_xlabel("lag")
    ax.set_ylabel("|C_k|")
    ax.set_title(title)
    return _finish(fig, path)


def cdf_figure(samples, path, loc=0.0, scale=1.0, title="empirical CDF"):
    samples = np.sort(np.asarray(samples))
    n = samples.size
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.step(samples, np.arange(1, n + 1) / n, where="post", lw=0.9,
            label="empirical")
    grid = np.linspace(samples[0], samples[-1], 400)
    z = (grid - loc) / (scale * math.sqrt(2.0))
    ax.plot(grid, 0.5 * (1.0 + erf(z)), "--", lw=1.0, label="normal")
    ax.set_xlabel("normalized sum")
    ax.set_ylabel("CDF")
    ax.set_title(title)
    ax.legend()
    return _finish(fig, path)


def lil_figure(checkpoints, curve, band, path):
    fig, ax = plt.subplots(figsize=(7, 4))
    show = min(curve.shape[1], 60)
    ax.semilogx(checkpoints, curve[:, :show], color="tab:blue", alpha=0.15,
                lw=0.6)
    ax.semilogx(checkpoints, np.median(curve, axis=1), color="tab:red",
                lw=1.6, label="median")
    for b in band:
        ax.axhline(b, color="k", ls=":", lw=0.8)
    ax.set_xlabel("n")
    ax.set_ylabel("running max of S_n / sqrt(2 n log log n)")
    ax.set_title("law of iterated logarithm, running maxima")
    ax.legend()
    return _finish(fig, path)


def histogram_figure(samples, path, scale=None, title="histogram"):
    samples = np.asarray(samples)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(samples, bins=80, density=True, alpha=0.7)
    if scale is not None:
        grid = np.linspace(samples.min(), samples.max(), 400)
        pdf = np.exp(-grid ** 2 / (2 * scale ** 2)) / (scale * math.sqrt(2 * math.pi))
        ax.plot(grid, pdf, "r--", lw=1.2, label=f"N(0, {scale ** 2:g})")
        ax.legend()
    ax.set_xlabel("normalized sum")
    ax.set_ylabel("density")
    ax.set_title(title)
    return _finish(fig, path)


def partition_figure(partition, path):
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    w = partition.widths()
    axes[0].hist(np.log10(np.maximum(w, 1e-300)), bins=60)
    axes[0].set_xlabel("log10 cell width")
    axes[0].set_ylabel("count")
    axes[1].loglog(w, partition.max_deriv, ".", ms=2, alpha=0.5)
    axes[1].set_xlabel("cell width")
    axes[1].set_ylabel("max |x_n'|")
    fig.suptitle(f"parameter partition, depth {partition.n}, "
                 f"{partition.cell_count} cells")
    return _finish(fig, path)


def scan_figure(a_grid, sigmas, path):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(a_grid, sigmas, "o-", ms=3)
    ax.set_xlabel("a")
    ax.set_ylabel("sigma_a")
    ax.set_title("Green-Kubo standard deviation across the window")
    return _finish(fig, path)


def typicality_figure(checkpoints, curve, threshold, path):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.loglog(checkpoints, np.median(curve, axis=1), "o-", ms=3,
              label="median over samples")
    ax.loglog(checkpoints, np.max(curve, axis=1), "s--", ms=3, label="max")
    ax.loglog(checkpoints, 1.0 / np.sqrt(np.asarray(checkpoints, dtype=float)),
              ":", label="n^(-1/2)")
    ax.axhline(threshold, color="k", lw=0.8, ls=":")
    ax.set_xlabel("n")
    ax.set_ylabel("max indicator discrepancy")
    ax.set_title("typicality: orbit frequency vs invariant mass")
    ax.legend()
    return _finish(fig, path)


def transversality_figure(a_grid, bounds, path):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(a_grid, bounds, "o", ms=3)
    ax.set_xlabel("a")
    ax.set_ylabel("two-sided ratio bound C")
    ax.set_title("transversality ratio bounds across the window")
    return _finish(fig, path)
