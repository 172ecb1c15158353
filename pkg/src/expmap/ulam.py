"""Ulam discretization of the transfer operator and variance machinery.

The transfer operator L_a phi(x) = sum over preimages y of phi(y)/|T_a'(y)|
is discretized on N equal cells as a row-stochastic matrix P with
P[i, j] = fraction of cell i mapped by T_a into cell j.  Cell-average
vectors evolve by left multiplication, and the invariant density h_a is
the normalized left fixed vector.

Piecewise-linear branches get exact interval-overlap entries; the
nonlinear Markov family is bracketed by monotone endpoint evaluation on an
8-fold refined source grid, which keeps the density error at O(1/N).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import families, observables
from .errors import (
    ConvergenceError,
    DegenerateObservableError,
    InsufficientDataError,
    StateError,
)

SUPPORT_THRESHOLD = 1e-8
CORRELATION_FLOOR = 1e-13
SIGMA_DEGENERATE = 1e-6
NONLINEAR_REFINE = 8


@dataclass
class UlamSystem:
    """Grid transfer operator for a fixed parameter, with solved density."""

    family: families.MapFamily
    a: float
    grid_count: int
    matrix: sp.csr_matrix
    density: np.ndarray | None = None
    support_mask: np.ndarray | None = None

    @property
    def cell_midpoints(self):
        n = self.grid_count
        return (np.arange(n) + 0.5) / n

    def require_density(self):
        if self.density is None:
            raise StateError("invariant density not solved yet")
        return self.density


def _linear_segments(family, a, grid_count):
    """(source cell, mass fraction, image lo, image hi) for linear branches."""
    n = grid_count
    edges = np.linspace(0.0, 1.0, n + 1)
    bpts = families.branch_points(family, a)
    src, frac, u, v = [], [], [], []
    for k in range(family.p0):
        bl, br = bpts[k], bpts[k + 1]
        lo = np.maximum(edges[:-1], bl)
        hi = np.minimum(edges[1:], br)
        m = hi > lo
        if not np.any(m):
            continue
        idx = np.nonzero(m)[0]
        lo, hi = lo[m], hi[m]
        # per-branch closed form avoids mod-1 wrapping at the right endpoint
        y1, y2 = _branch_limits(family, a, k, lo, hi)
        src.append(idx)
        frac.append((hi - lo) * n)
        u.append(np.minimum(y1, y2))
        v.append(np.maximum(y1, y2))
    return (np.concatenate(src), np.concatenate(frac),
            np.concatenate(u), np.concatenate(v))


def _branch_limits(family, a, k, lo, hi):
    """Branch-k image endpoints without mod-1 wrapping artifacts."""
    if family.kind == "tent_slope":
        s = family.params["s0"] + a
        f = lambda x: s * np.minimum(x, 1.0 - x)
        return f(lo), f(hi)
    if family.kind == "beta":
        beta = family.params["beta0"] + a
        return beta * lo - k, beta * hi - k
    if family.kind == "constant_doubling":
        return 2.0 * lo - k, 2.0 * hi - k
    raise ValueError("nonlinear family has no exact linear segments")


def _nonlinear_segments(family, a, grid_count):
    """Refined monotone bracketing for the markov_full_branch family."""
    n = grid_count
    r = NONLINEAR_REFINE
    fine = np.linspace(0.0, 1.0, n * r + 1)
    bpts = families.branch_points(family, a)
    amp = family.params["amplitude"]
    src, frac, u, v = [], [], [], []
    for k in range(family.p0):
        bl, br = bpts[k], bpts[k + 1]
        lo = np.maximum(fine[:-1], bl)
        hi = np.minimum(fine[1:], br)
        m = hi > lo
        idx = (np.nonzero(m)[0] // r).astype(np.int64)
        lo, hi = lo[m], hi[m]
        base = lambda x: 2.0 * x - k + amp * a * np.sin(2.0 * np.pi * x)
        y1, y2 = base(lo), base(hi)
        src.append(idx)
        frac.append((hi - lo) * n)
        u.append(np.clip(np.minimum(y1, y2), 0.0, 1.0))
        v.append(np.clip(np.maximum(y1, y2), 0.0, 1.0))
    return (np.concatenate(src), np.concatenate(frac),
            np.concatenate(u), np.concatenate(v))


def build_ulam(family, a, grid_count):
    """Assemble the row-stochastic Ulam matrix for T_a on grid_count cells."""
    if grid_count < 16:
        raise ValueError("grid_count must be at least 16")
    family.check_parameter(a)
    n = grid_count
    if family.kind == "markov_full_branch":
        src, frac, u, v = _nonlinear_segments(family, a, grid_count)
    else:
        src, frac, u, v = _linear_segments(family, a, grid_count)

    length = np.maximum(v - u, 1e-300)
    first = np.clip(np.floor(u * n).astype(np.int64), 0, n - 1)
    last = np.clip(np.ceil(v * n).astype(np.int64) - 1, 0, n - 1)
    last = np.maximum(last, first)
    max_span = int(np.max(last - first)) + 1

    rows, cols, vals = [], [], []
    for off in range(max_span):
        j = first + off
        active = j <= last
        if not np.any(active):
            break
        jj = j[active]
        cell_lo = jj / n
        cell_hi = (jj + 1) / n
        overlap = np.minimum(v[active], cell_hi) - np.maximum(u[active], cell_lo)
        overlap = np.clip(overlap, 0.0, None)
        w = frac[active] * overlap / length[active]
        rows.append(src[active])
        cols.append(jj)
        vals.append(w)
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    # renormalize away the residual of degenerate (point-image) segments
    rowsum = np.asarray(mat.sum(axis=1)).ravel()
    scale = np.where(rowsum > 0, 1.0 / np.maximum(rowsum, 1e-300), 0.0)
    mat = sp.diags(scale) @ mat
    return UlamSystem(family=family, a=a, grid_count=n, matrix=mat.tocsr())


def invariant_density(system, tolerance=1e-12, max_iterations=100_000):
    """Power iteration for the left fixed vector, normalized to mean 1."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    n = system.grid_count
    pt = system.matrix.T.tocsr()
    h = np.ones(n)
    residual = np.inf
    for _ in range(max_iterations):
        nh = pt @ h
        nh /= np.mean(nh)
        residual = float(np.mean(np.abs(nh - h)))
        h = nh
        if residual < tolerance:
            break
    else:
        raise ConvergenceError(
            f"power iteration did not converge in {max_iterations} steps",
            residual=residual,
        )
    h = np.clip(h, 0.0, None)
    h /= np.mean(h)
    system.density = h
    system.support_mask = h > SUPPORT_THRESHOLD
    return h


def solve(family, a, grid_count, tolerance=1e-12, max_iterations=100_000):
    """Convenience: build and solve in one call."""
    system = build_ulam(family, a, grid_count)
    invariant_density(system, tolerance, max_iterations)
    return system


def measure_mean(system, obs):
    """integral of obs d(mu_a) via cell averages."""
    h = system.require_density()
    cells = obs.cell_averages(system.grid_count)
    return float(np.mean(cells * h))


def measure_mass(system, lo, hi):
    """mu_a-mass of the interval [lo, hi]."""
    h = system.require_density()
    n = system.grid_count
    edges = np.linspace(0.0, 1.0, n + 1)
    overlap = np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0.0, None)
    return float(np.sum(overlap * h))


def correlation(system, phi, psi, n_lag):
    """Centered correlation of phi and psi o T^n under mu_a.

    Computed in the measure-forward direction: the signed density
    phi * h_a is pushed n times through the matrix and paired with psi,
    so there is no Monte Carlo noise.
    """
    h = system.require_density()
    n = system.grid_count
    pc = phi.cell_averages(n)
    qc = psi.cell_averages(n)
    f = pc * h
    for _ in range(n_lag):
        f = f @ system.matrix
    mean_p = float(np.mean(pc * h))
    mean_q = float(np.mean(qc * h))
    return float(np.mean(f * qc)) - mean_p * mean_q


def autocovariances(system, phi, max_lag):
    """C_0..C_max_lag of the centered observable along the dynamics."""
    h = system.require_density()
    n = system.grid_count
    pc = phi.cell_averages(n)
    mean_p = float(np.mean(pc * h))
    f = pc * h
    out = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        out[k] = float(np.mean(f * pc)) - mean_p * mean_p
        if k < max_lag:
            f = f @ system.matrix
    return out


def decay_rate(correlations):
    """Fit |C_k| ~ rho^k by least squares on log|C_k| vs k.

    Lags below the numerical floor are excluded; fewer than 5 usable lags
    raises InsufficientDataError (super-fast decay).
    Returns (rho, r_squared).
    """
    c = np.asarray(correlations, dtype=float)
    k = np.arange(c.size)
    usable = np.abs(c) > CORRELATION_FLOOR
    # skip lag 0: the fit concerns the decay of the tail
    usable[0] = False
    if np.count_nonzero(usable) < 5:
        raise InsufficientDataError(
            f"only {np.count_nonzero(usable)} lags above the floor "
            f"{CORRELATION_FLOOR}; decay too fast to fit"
        )
    xs = k[usable].astype(float)
    ys = np.log(np.abs(c[usable]))
    slope, intercept = np.polyfit(xs, ys, 1)
    fitted = slope * xs + intercept
    ss_res = float(np.sum((ys - fitted) ** 2))
    ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(slope)), r2


@dataclass
class VarianceResult:
    """Green-Kubo variance with its truncated autocovariance tail."""

    sigma_squared: float
    autocovariances: np.ndarray
    truncation_K: int
    rho_fit: float | None
    trusted: bool = True

    @property
    def sigma(self):
        return float(np.sqrt(max(self.sigma_squared, 0.0)))


def green_kubo_sigma(family, a, phi, tolerance=1e-9, max_lag=256,
                     grid_count=4096, system=None):
    """sigma_a(phi)^2 = C_0 + 2 sum_k C_k with adaptive truncation.

    Truncation stops after 3 consecutive |C_k| below tolerance; a single
    small term can be a zero-crossing of an oscillating tail.  If the tail
    never decays the partial sum is returned with ``trusted=False``.
    """
    if system is None:
        system = solve(family, a, grid_count)
    h = system.require_density()
    n = system.grid_count
    pc = phi.cell_averages(n)
    mean_p = float(np.mean(pc * h))
    f = pc * h
    covs = [float(np.mean(f * pc)) - mean_p ** 2]
    small_run = 0
    trusted = True
    k = 0
    while k < max_lag:
        f = f @ system.matrix
        k += 1
        ck = float(np.mean(f * pc)) - mean_p ** 2
        covs.append(ck)
        small_run = small_run + 1 if abs(ck) < tolerance else 0
        if small_run >= 3:
            break
    else:
        trusted = False
    covs = np.array(covs)
    sigma2 = float(covs[0] + 2.0 * np.sum(covs[1:]))
    try:
        rho, _ = decay_rate(covs)
    except InsufficientDataError:
        rho = None
    return VarianceResult(sigma2, covs, len(covs) - 1, rho, trusted)


def normalize_observable(family, a, phi, tolerance=1e-9, max_lag=256,
                         grid_count=4096, system=None):
    """phi_a = (phi - mean) / sigma as a piecewise table on the grid.

    Raises DegenerateObservableError when sigma_a(phi) <= 1e-6 (the
    excluded co-boundary case).  Returns (observable, VarianceResult).
    """
    if system is None:
        system = solve(family, a, grid_count)
    var = green_kubo_sigma(family, a, phi, tolerance, max_lag, system=system)
    if var.sigma <= SIGMA_DEGENERATE:
        raise DegenerateObservableError(
            f"sigma_a(phi) = {var.sigma:.3e} below {SIGMA_DEGENERATE}"
        )
    mean_p = measure_mean(system, phi)
    cells = (phi.cell_averages(system.grid_count) - mean_p) / var.sigma
    table = observables.from_cells(cells, alpha=phi.alpha, window_A=phi.window_A)
    return table, var


def lasota_yorke_probe(family, a, phi, n_steps, grid_count=2048,
                       norm_grid=256, system=None):
    """Ingredients of the Lasota-Yorke inequality for L_a^n.

    Applies the Ulam matrix n times to the cell-averaged observable and
    returns (V_alpha norm of L^n phi, L1 norm of phi, resulting table) so
    the caller can test ||L^n phi|| <= C rho^n ||phi|| + C ||phi||_L1 for
    candidate constants.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if system is None:
        system = build_ulam(family, a, grid_count)
    f = phi.cell_averages(system.grid_count)
    for _ in range(n_steps):
        f = f @ system.matrix
    table = observables.from_cells(f, alpha=phi.alpha, window_A=phi.window_A)
    return (
        observables.norm_alpha(table, grid_count=norm_grid),
        observables.l1_norm(phi),
        table,
    )


def transfer_pointwise(family, a, phi, xs):
    """Brute-force preimage sum L_a phi(x) = sum phi(y)/|T'(y)|.

    Independent of the Ulam matrix; used as the oracle for the matrix
    route.  Preimages are solved per branch (linear inversion for the
    piecewise-linear families, bisection for the Markov family).
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    bpts = families.branch_points(family, a)
    out = np.zeros_like(xs)
    for k in range(family.p0):
        bl, br = bpts[k], bpts[k + 1]
        y = _invert_branch(family, a, k, bl, br, xs)
        good = ~np.isnan(y)
        if np.any(good):
            d = np.abs(families.deriv_x(family, a, y[good]))
            out[good] += np.asarray(phi(y[good])) / d
    return out if out.size > 1 else float(out[0])


def _invert_branch(family, a, k, bl, br, xs):
    """Preimage of each x in branch k, NaN where the branch misses it."""
    y = np.full_like(xs, np.nan)
    if family.kind == "tent_slope":
        s = family.params["s0"] + a
        cand = xs / s if k == 0 else 1.0 - xs / s
        lo, hi = (0.0, 0.5) if k == 0 else (0.5, 1.0)
        ok = (cand >= lo) & (cand <= hi) & (xs <= s / 2.0)
        y[ok] = cand[ok]
        return y
    if family.kind == "beta":
        beta = family.params["beta0"] + a
        cand = (xs + k) / beta
        ok = (cand >= bl) & (cand < br)
        y[ok] = cand[ok]
        return y
    if family.kind == "constant_doubling":
        cand = (xs + k) / 2.0
        ok = (cand >= bl) & (cand < br)
        y[ok] = cand[ok]
        return y
    # markov_full_branch: monotone increasing on each branch, bisect
    amp = family.params["amplitude"]
    g = lambda t: 2.0 * t - k + amp * a * np.sin(2.0 * np.pi * t) - xs
    lo = np.full_like(xs, bl)
    hi = np.full_like(xs, br)
    glo = g(lo + 1e-15)
    ghi = g(hi - 1e-15)
    ok = (glo <= 0.0) & (ghi >= 0.0)
    for _ in range(80):
        mid = (lo + hi) / 2.0
        gm = g(mid)
        less = gm < 0.0
        lo = np.where(less, mid, lo)
        hi = np.where(less, hi, mid)
    y[ok] = ((lo + hi) / 2.0)[ok]
    return y


def sigma_scan(family, phi, a_grid, tolerance=1e-9, max_lag=256,
               grid_count=2048, holder_kappa=0.5, pmap=None):
    """(a, mean_a, sigma_a) along a parameter grid plus a Hoelder quotient.

    The quotient max |sigma_{a_i} - sigma_{a_{i+1}}| / |a_i - a_{i+1}|^kappa
    is the empirical counterpart of the variance-regularity bound; it is
    absent for single-point grids.
    """
    a_grid = np.asarray(a_grid, dtype=float)

    def one(a):
        system = solve(family, float(a), grid_count)
        var = green_kubo_sigma(family, float(a), phi, tolerance, max_lag,
                               system=system)
        return measure_mean(system, phi), var.sigma

    runner = pmap if pmap is not None else lambda f, xs: [f(x) for x in xs]
    pairs = runner(one, list(a_grid))
    means = np.array([p[0] for p in pairs])
    sigmas = np.array([p[1] for p in pairs])
    if a_grid.size >= 2:
        da = np.abs(np.diff(a_grid))
        quotient = float(np.max(np.abs(np.diff(sigmas)) / da ** holder_kappa))
    else:
        quotient = None
    return a_grid, means, sigmas, quotient


class MomentInterpolator:
    """Linear interpolation of (mean_a, sigma_a) from a sigma_scan grid.

    Variance regularity in the parameter justifies interpolating instead
    of solving per sample; ``validate`` measures the interpolation error
    at held-out points.
    """

    def __init__(self, a_grid, means, sigmas):
        self.a_grid = np.asarray(a_grid, dtype=float)
        self.means = np.asarray(means, dtype=float)
        self.sigmas = np.asarray(sigmas, dtype=float)
        self.validation_error = None

    @classmethod
    def from_scan(cls, family, phi, points=64, grid_count=2048,
                  tolerance=1e-9, max_lag=256, pmap=None):
        if family.kind == "constant_doubling" or family.window == 0.0:
            grid = np.array([0.0])
        else:
            grid = np.linspace(0.0, family.window, points)
        a, m, s, _ = sigma_scan(family, phi, grid, tolerance, max_lag,
                                grid_count, pmap=pmap)
        return cls(a, m, s)

    def mean(self, a):
        if self.a_grid.size == 1:
            return np.full_like(np.asarray(a, dtype=float), self.means[0])
        return np.interp(a, self.a_grid, self.means)

    def sigma(self, a):
        if self.a_grid.size == 1:
            return np.full_like(np.asarray(a, dtype=float), self.sigmas[0])
        return np.interp(a, self.a_grid, self.sigmas)

    def validate(self, family, phi, count=8, grid_count=2048, seed=12345):
        """Max relative sigma error at held-out parameters."""
        if self.a_grid.size == 1:
            self.validation_error = 0.0
            return 0.0
        rng = np.random.default_rng(seed)
        lo, hi = self.a_grid[0], self.a_grid[-1]
        held = lo + (hi - lo) * (np.arange(count) + rng.random(count)) / count
        worst = 0.0
        for a in held:
            var = green_kubo_sigma(family, float(a), phi, grid_count=grid_count)
            err = abs(var.sigma - float(self.sigma(a))) / max(var.sigma, 1e-12)
            worst = max(worst, err)
        self.validation_error = worst
        return worst


def direct_variance(family, a, phi, n_starts=4000, block_len=1000, seed=0,
                    burn_in=64, system=None, grid_count=4096):
    """Var(S_n)/n estimated from Birkhoff sums over mu_a-distributed starts.

    The independent route paired with green_kubo_sigma: starts are drawn
    from the solved density by inverse-CDF sampling, iterated block_len
    steps, and the empirical variance of S/sqrt(block_len) is returned.
    """
    from . import sampling

    if system is None:
        system = solve(family, a, grid_count)
    h = system.require_density()
    n = system.grid_count
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xD1EC7)))
    cdf = np.cumsum(h) / n
    cdf /= cdf[-1]
    u = rng.random(n_starts)
    cells = np.searchsorted(cdf, u)
    offs = rng.random(n_starts)
    x = (cells + offs) / n
    if family.kind == "constant_doubling":
        # float64 iteration of 2x mod 1 collapses; use the exact bit orbit
        stream = sampling.DoublingBitOrbit(seed, range(n_starts),
                                           burn_in + block_len, x0=x)
    else:
        stream = sampling.PlainOrbit(family, np.full(n_starts, a), x0=x)
    for _ in range(burn_in):
        stream.step()
    mean_p = measure_mean(system, phi)
    s = np.zeros(n_starts)
    for _ in range(block_len):
        s += np.asarray(phi(stream.x)) - mean_p
        stream.step()
    return float(np.var(s) / block_len)
