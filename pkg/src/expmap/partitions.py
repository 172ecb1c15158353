"""Parameter-space machinery: transversality, partitions, condition sums.

The depth-n partition of a parameter interval J consists of the maximal
open intervals on which the itinerary of a -> (x_0(a), ..., x_{n-1}(a))
is constant.  Cell boundaries are parameters where some x_i(a) crosses a
branch point; they are located depth by depth from sign changes on a
probe grid and refined by bisection.  Off a finite exceptional set these
crossings are transversal, so the scan-plus-bisection scheme catches
them; missed double crossings are controlled by itinerary
re-verification, which flags a cell as unresolved instead of silently
summing it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import families
from .errors import DepthCapError, UsageError

DEPTH_CAP = 24
# probes must clear the bisection error of refined cell boundaries, so the
# endpoint inset has an absolute floor tied to the default tolerance
INSET_FLOOR = 5e-13
CHEB_NODES = 17


@dataclass
class TransversalityReport:
    """Ratios x_j'(a) / (T_a^j)'(x_0(a)) and their two-sided bound.

    ``bound_C`` is None when the orbit was truncated before recording any
    ratio (the parameter sits in the finite exceptional set).
    """

    a: float
    ratios: np.ndarray
    bound_C: float | None
    truncated_at: int | None = None


def transversality_ratios(family, a, j_max):
    """Ratio sequence for j = 1..j_max; truncates at a boundary hit."""
    families.seed_derivative_or_raise(family)
    rec = families.orbit(family, a, j_max)
    stop = j_max
    truncated = None
    if rec.boundary_hits:
        stop = rec.boundary_hits[0]
        truncated = stop
    ratios = rec.a_derivative[1:stop + 1] / rec.x_derivative[1:stop + 1]
    finite = np.abs(ratios[np.abs(ratios) > 0])
    if finite.size:
        bound = float(max(np.max(finite), np.max(1.0 / finite)))
    else:
        bound = None
    return TransversalityReport(a, ratios, bound, truncated)


def parameter_vs_phase_growth(family, a, n):
    """(|x_n'(a)|, |(T_a^n)'(x_0(a))|), the two sides of the comparison."""
    rec = families.orbit(family, a, n)
    if rec.boundary_hits and rec.first_hit < n:
        return (
            abs(rec.a_derivative[rec.first_hit]),
            abs(rec.x_derivative[rec.first_hit]),
            rec.first_hit,
        )
    return abs(rec.a_derivative[n]), abs(rec.x_derivative[n]), None


@dataclass
class ParameterPartition:
    """Cells of the depth-n partition stored as parallel arrays."""

    family: families.MapFamily
    J: tuple
    n: int
    lo: np.ndarray
    hi: np.ndarray
    itinerary: np.ndarray        # shape (cells, n), 1-based branch indices
    min_deriv: np.ndarray        # min of |x_n'| over the cell
    max_deriv: np.ndarray
    image_length: np.ndarray
    resolved: np.ndarray         # itinerary constant across probes
    boundary_params: np.ndarray
    unresolved_count: int = 0
    support_exits: np.ndarray | None = None
    depth_stats: list = field(default_factory=list)

    @property
    def cell_count(self):
        return self.lo.size

    def cell(self, idx):
        return PartitionCell(
            lo=float(self.lo[idx]),
            hi=float(self.hi[idx]),
            itinerary=tuple(int(b) for b in self.itinerary[idx]),
            min_deriv=float(self.min_deriv[idx]),
            max_deriv=float(self.max_deriv[idx]),
            image_length=float(self.image_length[idx]),
            resolved=bool(self.resolved[idx]),
        )

    def widths(self):
        return self.hi - self.lo


@dataclass(frozen=True)
class PartitionCell:
    lo: float
    hi: float
    itinerary: tuple
    min_deriv: float
    max_deriv: float
    image_length: float
    resolved: bool

    def contains(self, a):
        return self.lo < a < self.hi


def _probe_points(lo, hi, count, inset_floor=INSET_FLOOR):
    """Inset endpoints plus interior Chebyshev nodes for each cell row."""
    width = hi - lo
    inset = np.minimum(np.maximum(width * 1e-9, inset_floor), width * 0.25)
    k = np.arange(1, count + 1)
    theta = (2.0 * k - 1.0) / (2.0 * count) * np.pi
    interior = 0.5 * (1.0 - np.cos(theta))        # in (0, 1)
    cols = [lo + inset, hi - inset]
    cols += [lo + width * t for t in interior]
    return np.sort(np.stack(cols, axis=1), axis=1)


def _refine_crossings(family, depth, lo, hi, n_iter):
    """Vectorized bisection on the step-`depth` itinerary difference.

    Brackets (lo, hi) are parameter pairs whose orbits first differ in
    branch index at step `depth`; the crossing of x_depth(a) with the
    separating branch point is driven to width <= 2^-n_iter * |hi-lo|.
    """
    lo = lo.copy()
    hi = hi.copy()
    it_lo = _itinerary_at(family, lo, depth)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        it_mid = _itinerary_at(family, mid, depth)
        same = it_mid == it_lo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def _itinerary_at(family, a_values, depth):
    """Branch index of x_depth(a) for each a."""
    a = np.asarray(a_values, dtype=float)
    x = np.asarray(families.x0_value(family, a), dtype=float) + np.zeros_like(a)
    step = families.make_stepper(family, a)
    for _ in range(depth):
        x = step(x)
    return np.asarray(families.branch_index(family, a, x))


def build_partition(family, J, n, grid_density=0, bisection_tolerance=1e-13,
                    collect_depth_stats=False):
    """Construct the depth-n partition of the parameter interval J.

    ``grid_density`` is the total scan budget (default
    max(2048, 4 * p0^n)), allocated per depth proportionally to the cell
    count.  With ``collect_depth_stats`` the per-depth condition-III sums
    are captured during construction and attached as ``depth_stats``.
    """
    if n < 1:
        raise ValueError("partition depth must be at least 1")
    if n > DEPTH_CAP:
        raise DepthCapError(
            f"depth {n} exceeds the full-enumeration cap {DEPTH_CAP}; "
            "use sampled diagnostics instead"
        )
    a_lo, a_hi = float(J[0]), float(J[1])
    family.check_parameter(a_lo)
    family.check_parameter(a_hi)
    if grid_density <= 0:
        grid_density = max(2048, 4 * family.p0 ** n)

    lo = np.array([a_lo])
    hi = np.array([a_hi])
    boundaries = []
    depth_stats = []
    for depth in range(n):
        probes = int(np.clip(grid_density // max(lo.size, 1), 5, 257))
        n_probes = probes
        # extra rounds catch probe gaps holding crossings of two distinct
        # boundaries (possible when p0 > 2): cells whose endpoint branches
        # still differ after splitting get re-scanned
        for _ in range(3):
            pts = _probe_points(lo, hi, n_probes - 2)
            flat = pts.ravel()
            its = _itinerary_at(family, flat, depth).reshape(pts.shape)
            diff = its[:, 1:] != its[:, :-1]
            rows, cols = np.nonzero(diff)
            if not rows.size:
                break
            blo = pts[rows, cols]
            bhi = pts[rows, cols + 1]
            span = float(np.max(bhi - blo))
            n_iter = max(1, int(math.ceil(math.log2(
                max(span, 1e-300) / bisection_tolerance))) + 1)
            cross = _refine_crossings(family, depth, blo, bhi, n_iter)
            boundaries.append(cross)
            # split cells at the refined crossings, guarding vs slivers
            edges = np.unique(np.concatenate([lo, [float(hi[-1])], cross]))
            if edges.size > 2:
                keep = np.ones(edges.size, dtype=bool)
                keep[1:-1] = np.diff(edges)[:-1] > bisection_tolerance * 4.0
                edges = edges[keep]
            lo = edges[:-1]
            hi = edges[1:]
            n_probes = 3  # verification rounds only need endpoint checks
        if collect_depth_stats:
            depth_stats.append(
                _depth_summary(family, lo, hi, depth + 1)
            )

    part = _finalize(family, (a_lo, a_hi), n, lo, hi,
                     np.concatenate(boundaries) if boundaries
                     else np.empty(0))
    if collect_depth_stats:
        part.depth_stats = depth_stats
    return part


_STAT_CHUNK = 65536  # cells per streaming chunk; bounds peak memory


def _cell_stats(family, lo, hi, depth, record_itinerary=True):
    """Per-cell orbit statistics at 17 Chebyshev nodes + inset endpoints.

    Streams the orbit one step at a time in cell chunks, so memory stays
    O(cells) regardless of depth.  Returns (itinerary, resolved,
    min_deriv, max_deriv, image_length).
    """
    n_cells = lo.size
    itinerary = (np.empty((n_cells, depth), dtype=np.int8)
                 if record_itinerary else None)
    resolved = np.empty(n_cells, dtype=bool)
    min_d = np.empty(n_cells)
    max_d = np.empty(n_cells)
    img = np.empty(n_cells)
    for c0 in range(0, n_cells, _STAT_CHUNK):
        c1 = min(c0 + _STAT_CHUNK, n_cells)
        pts = _probe_points(lo[c0:c1], hi[c0:c1], CHEB_NODES)
        cells, nodes = pts.shape
        flat = pts.ravel()
        x = np.asarray(families.x0_value(family, flat), dtype=float) \
            + np.zeros_like(flat)
        ad = np.full(flat.size, families.x0_deriv(family, flat))
        kernel = families.make_orbit_kernel(family, flat)
        same = np.ones(cells, dtype=bool)
        for step in range(depth):
            b = families.branch_index(family, flat, x).reshape(cells, nodes)
            same &= np.all(b == b[:, :1], axis=1)
            if record_itinerary:
                itinerary[c0:c1, step] = b[:, 0]
            x, ad = kernel(x, ad)
        ds = np.abs(ad).reshape(cells, nodes)
        xs = x.reshape(cells, nodes)
        resolved[c0:c1] = same
        min_d[c0:c1] = ds.min(axis=1)
        max_d[c0:c1] = ds.max(axis=1)
        img[c0:c1] = xs.max(axis=1) - xs.min(axis=1)
    return itinerary, resolved, min_d, max_d, img


def _depth_summary(family, lo, hi, depth):
    """Condition-III ingredients for an intermediate depth."""
    _, resolved, _, max_d, _ = _cell_stats(family, lo, hi, depth,
                                           record_itinerary=False)
    return {
        "depth": depth,
        "cells": int(lo.size),
        "condition_iii_sum": float(np.sum(1.0 / max_d[resolved])),
        "unresolved": int(np.count_nonzero(~resolved)),
    }


def _finalize(family, J, n, lo, hi, boundary_params):
    itinerary, resolved, min_d, max_d, img = _cell_stats(family, lo, hi, n)
    return ParameterPartition(
        family=family,
        J=J,
        n=n,
        lo=lo,
        hi=hi,
        itinerary=itinerary,
        min_deriv=min_d,
        max_deriv=max_d,
        image_length=img,
        resolved=resolved,
        boundary_params=np.sort(boundary_params),
        unresolved_count=int(np.count_nonzero(~resolved)),
    )


def condition_iii_sum(partition):
    """Sum over resolved cells of 1 / max |x_n'|.

    Returns (value, is_lower_bound): the flag is set when unresolved
    cells were excluded, making the sum an honest lower bound.
    """
    mask = partition.resolved
    value = float(np.sum(1.0 / partition.max_deriv[mask]))
    return value, bool(np.any(~mask))


def small_image_fraction(partition, d):
    """Total length of cells whose image under x_n has length <= d."""
    if d < 0:
        raise ValueError("threshold must be nonnegative")
    if d == 0:
        return 0.0
    mask = partition.image_length <= d
    return float(np.sum(partition.widths()[mask]))


def distortion_ratio(family, cell, a1, a2, n):
    """|x_n'(a1) / x_n'(a2)| for two parameters in the same cell."""
    if not (cell.contains(a1) and cell.contains(a2)):
        raise UsageError(
            f"parameters {a1}, {a2} not both interior to cell "
            f"({cell.lo}, {cell.hi})"
        )
    _, ader = families.orbit_batch(family, np.array([a1, a2]), n)
    d1, d2 = np.abs(ader[n])
    return float(d1 / d2)


def distortion_table(family, partition):
    """(ratio - 1, image length) over all resolved cells at the partition depth.

    The a1, a2 pair per cell is the inset endpoints (maximal separation),
    and the ratio is symmetrized to max(r, 1/r) so the table pairs with
    the distortion bound regardless of orientation.
    """
    mask = partition.resolved
    lo = partition.lo[mask]
    hi = partition.hi[mask]
    width = hi - lo
    inset = np.minimum(np.maximum(width * 1e-9, INSET_FLOOR), width * 0.25)
    a1 = lo + inset
    a2 = hi - inset
    _, ader1 = families.orbit_batch(family, a1, partition.n)
    _, ader2 = families.orbit_batch(family, a2, partition.n)
    r = np.abs(ader1[partition.n]) / np.abs(ader2[partition.n])
    r = np.maximum(r, 1.0 / r)
    return r - 1.0, partition.image_length[mask]


def check_support_exits(partition, support_lo, support_hi, probes=5):
    """Flag cells whose orbit leaves [support_lo, support_hi].

    K(a) is itself a numerical object here, so this is a diagnostic flag
    rather than a partition-defining condition.
    """
    family = partition.family
    pts = _probe_points(partition.lo, partition.hi, probes - 2)
    flat = pts.ravel()
    x = np.asarray(families.x0_value(family, flat), dtype=float) \
        + np.zeros_like(flat)
    step = families.make_stepper(family, flat)
    inside = (x >= support_lo - 1e-12) & (x <= support_hi + 1e-12)
    for _ in range(partition.n):
        x = step(x)
        inside &= (x >= support_lo - 1e-12) & (x <= support_hi + 1e-12)
    ok = inside.reshape(pts.shape).all(axis=1)
    partition.support_exits = ~ok
    return partition.support_exits


def partition_rows(partition):
    """Iterator of CSV rows: a_lo, a_hi, itinerary, derivs, image length."""
    for i in range(partition.cell_count):
        yield (
            partition.lo[i],
            partition.hi[i],
            ".".join(str(int(b)) for b in partition.itinerary[i]),
            partition.min_deriv[i],
            partition.max_deriv[i],
            partition.image_length[i],
        )
