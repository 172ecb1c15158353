"""One-parameter families of piecewise expanding maps of [0, 1].

Four built-in families are provided:

``tent_slope``
    T_a(x) = (s0 + a) * min(x, 1 - x), slope in (sqrt(2), 2].
``beta``
    T_a(x) = (beta0 + a) * x  mod 1.
``constant_doubling``
    T_a(x) = 2x mod 1 for every a (the constant family).
``markov_full_branch``
    T_a(x) = (2x mod 1) + amplitude * a * sin(2 pi x).  The perturbation
    vanishes at 0, 1/2 and 1, so both branches map onto [0, 1] for every
    admissible a and the Markov structure is preserved.

Evaluation at a branch point follows the right-limit convention; under
mod-1 families, values within 1e-15 of 1 are clamped to 0 so orbits stay
in [0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchBoundaryError, DegenerateSeedError, DomainError

GOLDEN_BETA = (1.0 + math.sqrt(5.0)) / 2.0

# distance to a branch point below which orbits are flagged
BOUNDARY_TOL = 1e-12
# mod-1 values this close to 1.0 are clamped to 0.0
WRAP_TOL = 1e-15

FAMILY_KINDS = ("tent_slope", "beta", "constant_doubling", "markov_full_branch")


@dataclass(frozen=True)
class MapFamily:
    """A parametrized piecewise expanding map with its point-of-interest map.

    ``window`` is the admissible parameter interval [0, eps]; all operations
    reject parameters outside it.  ``x0_kind`` selects the point-of-interest
    map a -> x_0(a): "postcritical" (image of the turning point),
    "identity" (x_0(a) = a) or "affine" (x_0(a) = xstar + kappa * a).
    """

    kind: str
    alpha: float
    lambda_min: float
    lambda_max: float
    p0: int
    window: float
    params: dict = field(default_factory=dict)
    x0_kind: str = "identity"
    x0_params: tuple = ()

    def check_parameter(self, a):
        if not (0.0 <= a <= self.window):
            raise DomainError(
                f"parameter a={a} outside admissible window [0, {self.window}] "
                f"for family {self.kind}"
            )


def make_family(kind, *, s0=1.9, beta0=GOLDEN_BETA, amplitude=0.1,
                window=None, x0=None, x0_xstar=0.3, x0_kappa=10.0):
    """Construct a built-in family with validated constants."""
    if kind == "tent_slope":
        if not (math.sqrt(2.0) < s0 <= 2.0):
            raise DomainError(f"tent base slope s0={s0} outside (sqrt(2), 2]")
        eps = 0.1 if window is None else window
        eps = min(eps, 2.0 - s0)
        x0_kind = x0 or "postcritical"
        return MapFamily(
            kind=kind, alpha=1.0, lambda_min=s0, lambda_max=s0 + eps,
            p0=2, window=eps, params={"s0": s0},
            x0_kind=x0_kind, x0_params=(x0_xstar, x0_kappa),
        )
    if kind == "beta":
        if beta0 <= 1.0:
            raise DomainError(f"beta base beta0={beta0} must exceed 1")
        eps = 0.05 if window is None else window
        if math.floor(beta0 + eps) != math.floor(beta0):
            raise DomainError(
                f"window [0, {eps}] crosses an integer part change of beta"
            )
        x0_kind = x0 or "affine"
        return MapFamily(
            kind=kind, alpha=1.0, lambda_min=beta0, lambda_max=beta0 + eps,
            p0=math.floor(beta0) + 1, window=eps, params={"beta0": beta0},
            x0_kind=x0_kind, x0_params=(x0_xstar, x0_kappa),
        )
    if kind == "constant_doubling":
        eps = 1.0 if window is None else window
        x0_kind = x0 or "identity"
        return MapFamily(
            kind=kind, alpha=1.0, lambda_min=2.0, lambda_max=2.0,
            p0=2, window=eps, params={},
            x0_kind=x0_kind, x0_params=(x0_xstar, x0_kappa),
        )
    if kind == "markov_full_branch":
        eps = 0.05 if window is None else window
        # expansion 2 - 2*pi*amplitude*a must stay above 1.3
        if 2.0 - 2.0 * math.pi * amplitude * eps < 1.3:
            raise DomainError(
                f"markov perturbation amplitude {amplitude} too large for "
                f"window [0, {eps}]"
            )
        x0_kind = x0 or "affine"
        return MapFamily(
            kind=kind, alpha=1.0,
            lambda_min=2.0 - 2.0 * math.pi * amplitude * eps,
            lambda_max=2.0 + 2.0 * math.pi * amplitude * eps,
            p0=2, window=eps, params={"amplitude": amplitude},
            x0_kind=x0_kind, x0_params=(x0_xstar, x0_kappa),
        )
    raise DomainError(f"unknown family kind {kind!r}")


def branch_points(family, a):
    """Ordered branch points b_0(a)=0 < ... < b_p0(a)=1."""
    family.check_parameter(a)
    if family.kind == "tent_slope":
        return np.array([0.0, 0.5, 1.0])
    if family.kind == "beta":
        beta = family.params["beta0"] + a
        ks = np.arange(1, family.p0)
        return np.concatenate(([0.0], ks / beta, [1.0]))
    # doubling and markov share the dyadic partition
    return np.array([0.0, 0.5, 1.0])


def _wrap(y):
    """mod-1 with the near-1 clamp, elementwise."""
    y = np.mod(y, 1.0)
    return np.where(y >= 1.0 - WRAP_TOL, 0.0, y)


def _check_a(family, a):
    if np.ndim(a):
        family.check_parameter(float(np.min(a)))
        family.check_parameter(float(np.max(a)))
    else:
        family.check_parameter(float(a))


def eval_map(family, a, x):
    """T_a(x), vectorized over x (and over a if broadcastable)."""
    _check_a(family, a)
    x = np.asarray(x, dtype=float)
    if family.kind == "tent_slope":
        s = family.params["s0"] + a
        return s * np.minimum(x, 1.0 - x)
    if family.kind == "beta":
        beta = family.params["beta0"] + a
        return _wrap(beta * x)
    if family.kind == "constant_doubling":
        return _wrap(2.0 * x)
    # markov_full_branch
    amp = family.params["amplitude"]
    return _wrap(np.mod(2.0 * x, 1.0) + amp * a * np.sin(2.0 * np.pi * x))


def deriv_x(family, a, x):
    """d/dx T_a(x); vectorized, right-limit branch at branch points."""
    x = np.asarray(x, dtype=float)
    if family.kind == "tent_slope":
        s = family.params["s0"] + a
        return np.where(x < 0.5, s, -s) * np.ones_like(x)
    if family.kind == "beta":
        beta = family.params["beta0"] + a
        return beta * np.ones_like(x)
    if family.kind == "constant_doubling":
        return 2.0 * np.ones_like(x)
    amp = family.params["amplitude"]
    return 2.0 + amp * a * 2.0 * np.pi * np.cos(2.0 * np.pi * x)


def deriv_a(family, a, x):
    """d/da T_a(x); vectorized."""
    x = np.asarray(x, dtype=float)
    if family.kind == "tent_slope":
        return np.minimum(x, 1.0 - x)
    if family.kind == "beta":
        # (beta0+a)x mod 1 is linear in a off the discontinuities
        return x.copy() if isinstance(x, np.ndarray) else float(x)
    if family.kind == "constant_doubling":
        return np.zeros_like(x)
    amp = family.params["amplitude"]
    return amp * np.sin(2.0 * np.pi * x)


def _check_off_boundary(family, a, x):
    bpts = branch_points(family, a)
    if np.min(np.abs(np.asarray(x) - bpts[:, None])) < BOUNDARY_TOL:
        raise BranchBoundaryError(
            f"x={x} within {BOUNDARY_TOL} of a branch point of {family.kind}"
        )


def deriv_x_at(family, a, x):
    """Scalar T_a'(x) with the branch-boundary guard."""
    family.check_parameter(a)
    _check_off_boundary(family, a, x)
    return float(deriv_x(family, a, x))


def deriv_a_at(family, a, x):
    """Scalar d/da T_a(x) with the branch-boundary guard."""
    family.check_parameter(a)
    _check_off_boundary(family, a, x)
    return float(deriv_a(family, a, x))


def branch_index(family, a, x):
    """1-based index k with x in (b_{k-1}, b_k); right-limit at boundaries.

    Vectorized over both a and x (branch points of the beta family move
    with a, so the index is computed from the branch formula directly).
    """
    x = np.asarray(x, dtype=float)
    if family.kind == "beta":
        beta = family.params["beta0"] + np.asarray(a, dtype=float)
        idx = np.floor(beta * x).astype(np.int64) + 1
        return np.clip(idx, 1, family.p0)
    return np.where(x < 0.5, np.int8(1), np.int8(2))


def x0_value(family, a):
    """The point of interest x_0(a)."""
    _check_a(family, a)
    a = np.asarray(a, dtype=float)
    if family.x0_kind == "postcritical":
        # image of the turning point: T_a(c_a) = (s0+a)/2 for tent families
        if family.kind != "tent_slope":
            raise DomainError("postcritical seed only defined for tent_slope")
        return (family.params["s0"] + a) / 2.0
    if family.x0_kind == "identity":
        return a + 0.0
    xstar, kappa = family.x0_params
    x0 = xstar + kappa * a
    if np.any(x0 < 0.0) or np.any(x0 > 1.0):
        raise DomainError(
            f"x0(a) = {xstar} + {kappa} a leaves [0,1] on the window"
        )
    return x0


def x0_deriv(family, a):
    """x_0'(a) for the configured point-of-interest map."""
    if family.x0_kind == "postcritical":
        return 0.5
    if family.x0_kind == "identity":
        return 1.0
    return family.x0_params[1]


@dataclass
class OrbitRecord:
    """Orbit of x_0(a) with phase- and parameter-derivative sequences.

    ``x_derivative[j]`` is the signed running product (T_a^j)'(x_0(a))
    (1 for j = 0); ``a_derivative[j]`` is x_j'(a) from the chain-rule
    recursion x_j' = T_a'(x_{j-1}) x_{j-1}' + (d/da T_a)(x_{j-1}).
    ``boundary_hits`` lists orbit indices within tolerance of a branch
    point; downstream partition logic treats them as flags, not errors.
    """

    a: float
    points: np.ndarray
    itinerary: np.ndarray
    x_derivative: np.ndarray
    a_derivative: np.ndarray
    boundary_hits: list

    @property
    def first_hit(self):
        return self.boundary_hits[0] if self.boundary_hits else None


def orbit(family, a, n):
    """Iterate x_0(a) for n steps, recording derivatives and itinerary."""
    family.check_parameter(a)
    points = np.empty(n + 1)
    itinerary = np.empty(n, dtype=np.int64)
    xder = np.empty(n + 1)
    ader = np.empty(n + 1)
    hits = []

    bpts = branch_points(family, a)
    x = float(x0_value(family, a))
    points[0] = x
    xder[0] = 1.0
    ader[0] = x0_deriv(family, a)
    for j in range(n):
        if np.min(np.abs(x - bpts)) < BOUNDARY_TOL:
            hits.append(j)
        itinerary[j] = branch_index(family, a, x)
        tx = float(deriv_x(family, a, x))
        ta = float(deriv_a(family, a, x))
        xder[j + 1] = xder[j] * tx
        ader[j + 1] = tx * ader[j] + ta
        x = float(eval_map(family, a, x))
        points[j + 1] = x
    return OrbitRecord(a, points, itinerary, xder, ader, hits)


def orbit_points_only(family, a, n):
    """Points of the orbit of x_0(a) without derivative bookkeeping."""
    family.check_parameter(a)
    points = np.empty(n + 1)
    x = float(x0_value(family, a))
    points[0] = x
    for j in range(n):
        x = float(eval_map(family, a, x))
        points[j + 1] = x
    return points


def make_stepper(family, a):
    """x -> T_a(x), specialized per family with a fixed (checked once)."""
    _check_a(family, a)
    if family.kind == "tent_slope":
        s = family.params["s0"] + a
        return lambda x: s * np.minimum(x, 1.0 - x)
    if family.kind == "beta":
        beta = family.params["beta0"] + a
        return lambda x: _wrap(beta * x)
    if family.kind == "constant_doubling":
        return lambda x: _wrap(2.0 * x)
    amp_a = family.params["amplitude"] * a

    def step(x):
        return _wrap(np.mod(2.0 * x, 1.0) + amp_a * np.sin(2.0 * np.pi * x))

    return step


def make_orbit_kernel(family, a):
    """(x, ader) -> (T_a(x), updated x_j') specialized per family."""
    _check_a(family, a)
    if family.kind == "tent_slope":
        s = family.params["s0"] + a

        def kernel(x, ad):
            m = np.minimum(x, 1.0 - x)
            tx = np.where(x < 0.5, s, -s)
            return s * m, tx * ad + m

        return kernel
    if family.kind == "beta":
        beta = family.params["beta0"] + a

        def kernel(x, ad):
            return _wrap(beta * x), beta * ad + x

        return kernel
    if family.kind == "constant_doubling":

        def kernel(x, ad):
            return _wrap(2.0 * x), 2.0 * ad

        return kernel
    amp = family.params["amplitude"]
    amp_a = amp * a
    two_pi = 2.0 * np.pi

    def kernel(x, ad):
        sn = np.sin(two_pi * x)
        tx = 2.0 + amp_a * two_pi * np.cos(two_pi * x)
        y = _wrap(np.mod(2.0 * x, 1.0) + amp_a * sn)
        return y, tx * ad + amp * sn

    return kernel


def orbit_batch(family, a_values, n):
    """Vectorized orbit points and parameter derivatives over many a.

    Returns (points, a_derivative) with shape (n+1, len(a_values)).  Used
    by the parameter-space machinery at moderate depths; statistical
    experiments use the streaming engine in :mod:`expmap.sampling`.
    """
    a = np.asarray(a_values, dtype=float)
    pts = np.empty((n + 1, a.size))
    ader = np.empty((n + 1, a.size))
    x = np.asarray(x0_value(family, a), dtype=float) + np.zeros_like(a)
    pts[0] = x
    ader[0] = x0_deriv(family, a)
    kernel = make_orbit_kernel(family, a)
    for j in range(n):
        x, ad = kernel(x, ader[j])
        pts[j + 1] = x
        ader[j + 1] = ad
    return pts, ader


def phase_derivative_batch(family, a_values, points):
    """Signed (T_a^j)'(x_0(a)) for j = 0..n from precomputed orbit points."""
    a = np.asarray(a_values, dtype=float)
    n = points.shape[0] - 1
    out = np.empty_like(points)
    out[0] = 1.0
    for j in range(n):
        out[j + 1] = out[j] * deriv_x(family, a, points[j])
    return out


def seed_derivative_or_raise(family):
    """x_0'(a), rejecting seeds that are constant in a."""
    d = x0_deriv(family, 0.0)
    if d == 0.0:
        raise DegenerateSeedError(
            "point-of-interest map has zero parameter derivative; "
            "transversality ratios are identically zero"
        )
    return d
