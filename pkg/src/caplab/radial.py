"""Exact condenser capacity for radial weights, sweeps, and slope fits.

For a radial weight w(r) the capacity of the concentric-ball condenser
(closed ball r_in, complement of ball r_out) reduces to a 1-D problem: the
energy of a radial profile phi is

    E[phi] = omega_{n-1} * int_{r_in}^{r_out} (w(r) phi'(r)^2)^(p/2) r^(n-1) dr,

and the minimizer over profiles with phi(r_in)=1, phi(r_out)=0 satisfies
g(r) |phi'|^(p-1) = const with g = w^(p/2) r^(n-1).  Integrating the optimal
slope gives the closed form

    cap = omega_{n-1} * ( int_{r_in}^{r_out} g(r)^(-1/(p-1)) dr )^(1-p).

Radial optimality of the minimizer is asserted here as a design decision and
cross-validated against the grid engine, whose feasible set is a strict
subset of the admissible class (see the cross-engine tests).

The module also provides R-sweeps over the standard condensers
(ratio*R, R), log-log slope fitting for scaling-law checks, the composite
two-capacity quantity used by the product criterion, and a liminf estimator
that classifies a capacity sequence as bounded, divergent, or vanishing.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (ArgumentError, DomainError, InsufficientDataError,
                     UnsupportedExponentError)
from .operators import WeightField, sphere_surface_area
from .quadrature import adaptive_integral, panel_integrals

# The optimal-slope exponent -1/(p-1) blows up as p -> 1+; below this the
# integrand cancellation is catastrophic and the engine refuses to run.
MIN_EXPONENT = 1.05

# Weight positivity probe resolution on [r_in, r_out].
_DEGENERACY_PROBES = 257

_PROFILE_POINTS = 257


@dataclass
class CapacityResult:
    """A computed capacity with the optimizing profile and diagnostics."""

    value: float
    profile: list  # [(radius, value)] samples of the optimal profile
    quadrature_error_estimate: float
    method: str  # "radial-exact" | "discrete"
    degenerate: bool = False
    converged: bool = True
    iterations: int = 0
    energy_history: Optional[list] = field(default=None, compare=False, repr=False)
    grid_values: Optional[np.ndarray] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CapacitySequence:
    """Capacity values along an increasing sequence of outer radii R."""

    entries: tuple  # ((R, value), ...) with R strictly increasing
    p: float
    condenser_ratio: float
    n: Optional[int] = None
    kind: str = "capacity"  # "capacity" | "composite"

    def __post_init__(self):
        rs = [r for r, _ in self.entries]
        if any(b <= a for a, b in zip(rs, rs[1:])):
            raise ArgumentError("R values must be strictly increasing")
        if any(v < 0 for _, v in self.entries):
            raise ArgumentError("capacity values must be non-negative")

    @property
    def radii(self) -> np.ndarray:
        return np.array([r for r, _ in self.entries])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.entries])


def radial_capacity(n: int, p: float, fld: WeightField, r_in: float, r_out: float,
                    rel_tol: float = 1e-8) -> CapacityResult:
    """Capacity of the condenser (ball r_in, complement of ball r_out).

    Computed from the closed-form optimal-profile integral by adaptive
    quadrature refined until the estimated relative error of the integral
    is below ``rel_tol``.  The profile is recovered by cumulative
    integration of the optimal slope.

    A weight that is non-positive anywhere on [r_in, r_out] short-circuits
    to a degenerate result with value 0 (every admissible profile has zero
    energy along a flat direction of the form).
    """
    if p <= 1.0:
        raise UnsupportedExponentError(f"capacity exponent requires p > 1, got p={p}")
    if p < MIN_EXPONENT:
        raise UnsupportedExponentError(
            f"p={p} is below the supported minimum {MIN_EXPONENT} "
            "(optimal-slope exponent -1/(p-1) is numerically unstable)")
    if not (0 < r_in < r_out):
        raise ArgumentError(f"requires 0 < r_in < r_out, got ({r_in}, {r_out})")
    if not fld.is_radial:
        raise ArgumentError("radial_capacity needs a radial weight field "
                            "(use the grid engine for general fields)")
    if fld.dimension != n:
        raise ArgumentError(f"field dimension {fld.dimension} does not match n={n}")

    probes = np.geomspace(r_in, r_out, _DEGENERACY_PROBES)
    wmin = float(np.min(fld.weight_at(probes)))
    if wmin <= 0.0:
        return CapacityResult(
            value=0.0,
            profile=[(float(r_in), 1.0), (float(r_out), 0.0)],
            quadrature_error_estimate=0.0,
            method="radial-exact",
            degenerate=True,
        )

    expo = 1.0 / (p - 1.0)

    def inv_g(r):
        # g^(-1/(p-1)) with g = w^(p/2) r^(n-1), in log space for stability
        r = np.asarray(r, dtype=float)
        logw = np.log(fld.weight_at(r))
        return np.exp(-expo * (0.5 * p * logw + (n - 1) * np.log(r)))

    nodes = np.geomspace(r_in, r_out, 17)
    integral, err = adaptive_integral(inv_g, r_in, r_out, rel_tol=rel_tol,
                                      breakpoints=nodes)
    omega = sphere_surface_area(n)
    value = omega * integral ** (1.0 - p)
    # cap = omega * I^(1-p): relative error amplifies by |1-p|
    value_err = abs(1.0 - p) * (err / integral) * value

    profile = _optimal_profile(inv_g, r_in, r_out, integral)
    return CapacityResult(value=float(value), profile=profile,
                          quadrature_error_estimate=float(value_err),
                          method="radial-exact")


def _optimal_profile(inv_g, r_in, r_out, total):
    """Sample phi*(r) = (int_r^{r_out} g^(-1/(p-1))) / (int_{r_in}^{r_out} ...)."""
    rs = np.geomspace(r_in, r_out, _PROFILE_POINTS)
    seg = panel_integrals(inv_g, rs)
    tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    phi = np.clip(tail / tail[0], 0.0, 1.0)
    phi[0], phi[-1] = 1.0, 0.0
    # Use the panel-sum normalization rather than `total` so the endpoints
    # are exact regardless of small quadrature differences.
    return list(zip(rs.tolist(), phi.tolist()))


def capacity_scan(n: int, p: float, fld: WeightField, R_list, ratio: float = 0.5,
                  rel_tol: float = 1e-8) -> CapacitySequence:
    """Capacity along the condensers (ratio*R, R) for each R in R_list.

    The default ratio 1/2 matches the standard nested condensers.  Entries
    may be computed in parallel (CAPLAB_THREADS > 1); assembly is always
    ordered by R, so the result is deterministic.
    """
    R_list = [float(R) for R in R_list]
    if not R_list:
        raise ArgumentError("R_list must be nonempty")
    if any(b <= a for a, b in zip(R_list, R_list[1:])):
        raise ArgumentError("R_list must be strictly increasing")
    if not (0.0 < ratio < 1.0):
        raise ArgumentError(f"ratio must lie in (0, 1), got {ratio}")

    def one(R):
        return radial_capacity(n, p, fld, ratio * R, R, rel_tol=rel_tol).value

    threads = int(os.environ.get("CAPLAB_THREADS", "1"))
    if threads > 1 and len(R_list) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(one, R_list))
    else:
        values = [one(R) for R in R_list]
    entries = tuple((R, v) for R, v in zip(R_list, values))
    return CapacitySequence(entries=entries, p=p, condenser_ratio=ratio, n=n)


# ---------------------------------------------------------------------------
# Log-log slope fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line through (log R, log value)."""

    slope: float
    intercept: float
    residual: float  # RMS deviation in log space
    window: tuple
    n_points: int


def fit_log_slope(seq: CapacitySequence, window=None) -> SlopeFit:
    """Fit log(value) ~ slope * log(R) + intercept inside the window.

    Needs at least 3 strictly positive entries in the window; a zero or
    negative value there is a domain error (its log is undefined).
    """
    radii, values = seq.radii, seq.values
    if window is None:
        window = (float(radii[0]), float(radii[-1]))
    lo, hi = window
    mask = (radii >= lo) & (radii <= hi)
    if int(mask.sum()) < 3:
        raise InsufficientDataError(
            f"need >= 3 entries in window {window}, found {int(mask.sum())}")
    r, v = radii[mask], values[mask]
    if np.any(v <= 0):
        raise DomainError("log-log fit requires strictly positive values in the window")
    logr, logv = np.log(r), np.log(v)
    slope, intercept = np.polyfit(logr, logv, 1)
    resid = logv - (slope * logr + intercept)
    return SlopeFit(slope=float(slope), intercept=float(intercept),
                    residual=float(np.sqrt(np.mean(resid ** 2))),
                    window=(float(lo), float(hi)), n_points=int(mask.sum()))


def power_weight_capacity_slope(n: int, p: float, sigma: float) -> float:
    """Predicted log-log growth rate (2n - p(sigma+2))/2 of the capacity of
    the (R/2, R) condensers under the model weight of decay rate sigma."""
    return (2.0 * n - p * (sigma + 2.0)) / 2.0


# ---------------------------------------------------------------------------
# Composite capacity product
# ---------------------------------------------------------------------------

def _composite_exponents(q: float, nu: float) -> tuple[float, float]:
    if not (0.0 < nu < 1.0):
        raise ArgumentError(f"nu must lie in (0, 1), got {nu}")
    if not nu < q - 1.0:
        raise ArgumentError(f"nu must be below q-1 = {q - 1.0}, got {nu}")
    p1 = 2.0 * (q - nu) / (q - 1.0)
    p2 = 2.0 * q / (q - 1.0 - nu)
    return p1, p2


def frak_C(n: int, fld: WeightField, q: float, nu: float, R: float,
           rel_tol: float = 1e-8) -> float:
    """Composite capacity product at radius R:

        (cap_{p1} of (R, 2R))^(1/2) * (cap_{p2} of (R/2, R))^(1/p2)

    with p1 = 2(q-nu)/(q-1) and p2 = 2q/(q-1-nu).  Note the first factor
    lives on the (R, 2R) condenser and the second on (R/2, R).
    """
    if R <= 0:
        raise ArgumentError(f"R must be positive, got {R}")
    p1, p2 = _composite_exponents(q, nu)
    c1 = radial_capacity(n, p1, fld, R, 2.0 * R, rel_tol=rel_tol).value
    c2 = radial_capacity(n, p2, fld, R / 2.0, R, rel_tol=rel_tol).value
    return c1 ** 0.5 * c2 ** (1.0 / p2)


def frak_c_scan(n: int, fld: WeightField, q: float, nu: float, R_list,
                rel_tol: float = 1e-8) -> CapacitySequence:
    """Sweep of the composite product over increasing R."""
    R_list = [float(R) for R in R_list]
    if any(b <= a for a, b in zip(R_list, R_list[1:])):
        raise ArgumentError("R_list must be strictly increasing")
    _, p2 = _composite_exponents(q, nu)
    entries = tuple((R, frak_C(n, fld, q, nu, R, rel_tol=rel_tol)) for R in R_list)
    return CapacitySequence(entries=entries, p=p2, condenser_ratio=0.5, n=n,
                            kind="composite")


def frak_c_slope_from_factors(n: int, sigma: float, q: float, nu: float) -> float:
    """Predicted composite slope as the sum of the two factor slopes:
    (2n - p1(sigma+2))/4 + (2n - p2(sigma+2))/(2 p2)."""
    p1, p2 = _composite_exponents(q, nu)
    return (2.0 * n - p1 * (sigma + 2.0)) / 4.0 \
        + (2.0 * n - p2 * (sigma + 2.0)) / (2.0 * p2)


def frak_c_slope_closed_form(n: int, sigma: float, q: float, nu: float) -> float:
    """Predicted composite slope in the combined form
    (2q-1-nu)(q(n-sigma-2) - n) / (2q(q-1)).

    The two printed forms of this rate disagree in at least one published
    rendering; both are kept here and the sweep-measured slope is the
    arbiter.  After substituting p1, p2 they coincide (see the tests).
    """
    _composite_exponents(q, nu)  # validate
    return (2.0 * q - 1.0 - nu) * (q * (n - sigma - 2.0) - n) / (2.0 * q * (q - 1.0))


# ---------------------------------------------------------------------------
# liminf estimation
# ---------------------------------------------------------------------------

#: Fitted slopes within this band count as bounded; the regime exponents
#: of interest differ from zero by at least 0.1, well clear of the band.
LIMINF_SLOPE_TOL = 0.02


@dataclass(frozen=True)
class LiminfEstimate:
    """Verdict on the large-R behaviour of a capacity sequence."""

    verdict: str  # "bounded" | "diverges" | "tends_to_zero"
    slope: float
    estimate: Optional[float] = None  # last normalized value when bounded

    @property
    def finite(self) -> bool:
        """Whether the liminf along the sequence is finite (not diverging)."""
        return self.verdict in ("bounded", "tends_to_zero")


def estimate_liminf(seq: CapacitySequence, normalizer: Optional[float] = None) -> LiminfEstimate:
    """Classify the tail of a capacity sequence by its fitted log-log slope.

    ``normalizer`` multiplies each value by R^normalizer first (the
    vanishing-normalized criterion uses normalizer = -n).  Requires at
    least 5 entries spanning at least two decades of R.
    """
    radii, values = seq.radii, seq.values
    if len(radii) < 5:
        raise InsufficientDataError(f"need >= 5 entries, got {len(radii)}")
    if radii[-1] / radii[0] < 100.0:
        raise InsufficientDataError(
            f"entries must span >= 2 decades of R, got {radii[-1] / radii[0]:.3g}x")
    if normalizer is not None:
        values = values * radii ** normalizer
    if np.any(values <= 0):
        raise DomainError("liminf estimation requires strictly positive values")
    logr, logv = np.log(radii), np.log(values)
    slope = float(np.polyfit(logr, logv, 1)[0])
    if slope > LIMINF_SLOPE_TOL:
        return LiminfEstimate(verdict="diverges", slope=slope)
    if slope < -LIMINF_SLOPE_TOL:
        return LiminfEstimate(verdict="tends_to_zero", slope=slope)
    return LiminfEstimate(verdict="bounded", slope=slope, estimate=float(values[-1]))


def default_r_sweep(r_min: float = 10.0, r_max: float = 1e4, points: int = 13) -> np.ndarray:
    """Log-spaced R grid used by the scaling-law checks."""
    if not (0 < r_min < r_max):
        raise ArgumentError("requires 0 < r_min < r_max")
    if points < 2:
        raise ArgumentError("points must be >= 2")
    return np.geomspace(r_min, r_max, points)
