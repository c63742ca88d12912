"""Regime classification: Liouville comparison vs. explicit counterexample.

Two entry points:

* ``classify_model`` encodes the complete decision map for the model weight
  (1+|x|^2)^(-sigma/2): every (n, q, sigma) lands on exactly one side, with
  the regime boundaries sigma = -2, sigma = n-2 and q = n/(n-sigma-2)
  flagged when hit exactly.

* ``classify_capacity`` evaluates the capacity-based sufficient conditions
  on supplied capacity sequences (plain, reweighted-exponent, composite
  product, and vanishing-normalized), for operators where only capacity
  data is available.  The conditions are sufficient, not necessary, so the
  fallthrough verdict is OutsideScope.

Authority tags name the rule that fired: "Thm*" for sufficient-condition
rules, "Ex*" for explicit counterexample families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ArgumentError
from .operators import WeightField
from .radial import (CapacitySequence, capacity_scan, default_r_sweep,
                     estimate_liminf, frak_c_scan)

LIOUVILLE = "LiouvilleHolds"
COUNTEREXAMPLE = "CounterexampleExists"
OUTSIDE = "OutsideScope"

_THEOREM_TAGS = {f"Thm{i}" for i in range(1, 9)} | {f"Prop{i}" for i in range(3, 9)}
_EXAMPLE_TAGS = {"Ex2", "Ex4", "Ex5", "Ex7"}

# Boundary detection tolerance on the critical exponent comparison.
_BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class RegimeVerdict:
    """Classification outcome with the rule that decided it."""

    outcome: str  # LiouvilleHolds | CounterexampleExists | OutsideScope
    authority: Optional[str] = None
    exponents: Optional[dict] = None  # {"p", "p1", "p2", "nu"} when used
    boundary: bool = False

    def __post_init__(self):
        if self.outcome == LIOUVILLE and self.authority not in _THEOREM_TAGS:
            raise ArgumentError(f"Liouville verdicts need a theorem tag, got {self.authority!r}")
        if self.outcome == COUNTEREXAMPLE and self.authority not in _EXAMPLE_TAGS:
            raise ArgumentError(f"counterexample verdicts need an example tag, got {self.authority!r}")


def exponents(q: float, nu: float) -> tuple[float, float, float]:
    """The capacity exponents attached to (q, nu):

        p = p1 = 2(q - nu)/(q - 1),   p2 = 2q/(q - 1 - nu),

    all strictly above 2 for nu in (0, 1) with nu < q - 1."""
    if not (0.0 < nu < 1.0):
        raise ArgumentError(f"nu must lie in (0, 1), got {nu}")
    if not nu < q - 1.0:
        raise ArgumentError(f"nu must be below q - 1 = {q - 1.0}, got {nu}")
    p1 = 2.0 * (q - nu) / (q - 1.0)
    p2 = 2.0 * q / (q - 1.0 - nu)
    return p1, p1, p2


def default_nu(q: float) -> float:
    """nu = min(1, q-1)/2: the attached exponent may use any admissible nu,
    and the midpoint keeps the downstream quadrature well conditioned."""
    if q <= 1.0:
        raise ArgumentError(f"nu is only defined for q > 1, got q={q}")
    return min(1.0, q - 1.0) / 2.0


def _isclose(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=_BOUNDARY_RTOL, abs_tol=1e-300)


def classify_model(n: int, q: float, sigma: float) -> RegimeVerdict:
    """Decision map for the model weight.  Total: never OutsideScope.

    * 0 < q < 1: comparison holds iff sigma >= n-2, else the two-branch
      counterexample family applies.
    * q = 1: comparison holds iff sigma > -2, else the q=1 family.
    * q > 1: comparison holds for sigma >= n-2, and for -2 < sigma < n-2
      up to the critical exponent q <= n/(n-sigma-2); beyond it the
      vanishing-partner family applies, and sigma <= -2 always admits one.
    """
    if n < 2:
        raise ArgumentError(f"dimension must be >= 2, got {n}")
    if q <= 0:
        raise ArgumentError(f"q must be positive, got {q}")

    on_sigma_low = _isclose(sigma, -2.0)
    on_sigma_high = _isclose(sigma, n - 2.0)

    if q < 1.0:
        if sigma >= n - 2.0:
            return RegimeVerdict(LIOUVILLE, "Thm2", boundary=on_sigma_high)
        return RegimeVerdict(COUNTEREXAMPLE, "Ex2", boundary=on_sigma_low)

    if q == 1.0:
        if sigma > -2.0:
            return RegimeVerdict(LIOUVILLE, "Thm8", boundary=on_sigma_high)
        return RegimeVerdict(COUNTEREXAMPLE, "Ex7", boundary=on_sigma_low)

    # q > 1
    if sigma >= n - 2.0:
        return RegimeVerdict(LIOUVILLE, "Thm2", boundary=on_sigma_high)
    if sigma <= -2.0:
        return RegimeVerdict(COUNTEREXAMPLE, "Ex4", boundary=on_sigma_low)
    q_crit = n / (n - sigma - 2.0)
    on_q_crit = _isclose(q, q_crit)
    nu = default_nu(q)
    p1, _, p2 = exponents(q, nu)
    expo = {"p": p1, "p1": p1, "p2": p2, "nu": nu}
    if q <= q_crit or on_q_crit:
        # the non-strict boundary is covered by the composite-product rule
        return RegimeVerdict(LIOUVILLE, "Thm6", exponents=expo, boundary=on_q_crit)
    return RegimeVerdict(COUNTEREXAMPLE, "Ex5", exponents=expo, boundary=False)


def classify_capacity(seqs: dict, q: float, nu: Optional[float] = None) -> RegimeVerdict:
    """Apply the capacity-based sufficient conditions to labeled sequences.

    ``seqs`` maps labels to CapacitySequence objects:

    * "cap2"  - capacity at exponent 2 over the (R/2, R) condensers,
    * "capp"  - capacity at the attached exponent p = 2(q-nu)/(q-1),
    * "frakc" - the composite two-capacity product.

    Rules fire in order: a finite-liminf cap2 sequence settles any q; for
    q > 1 a finite capp or composite sequence settles it; for q = 1 the
    R^-n normalized cap2 sequence must tend to zero.  A verdict requires
    the liminf along the sequence to be finite, so both the "bounded" and
    the "tends to zero" estimates qualify.  Anything else is OutsideScope.
    """
    if q <= 0:
        raise ArgumentError(f"q must be positive, got {q}")
    known = {"cap2", "capp", "frakc"}
    unknown = set(seqs) - known
    if unknown:
        raise ArgumentError(f"unknown sequence labels: {sorted(unknown)}")

    cap2 = seqs.get("cap2")
    if q == 1.0 and cap2 is None:
        raise ArgumentError("q = 1 requires a cap2 sequence")
    if q != 1.0 and cap2 is None and (q <= 1.0 or not ({"capp", "frakc"} & set(seqs))):
        raise ArgumentError(f"no applicable sequence supplied for q = {q}")

    if cap2 is not None:
        if not _isclose(cap2.p, 2.0):
            raise ArgumentError(f"cap2 sequence has exponent {cap2.p}, expected 2")
        if estimate_liminf(cap2).finite:
            return RegimeVerdict(LIOUVILLE, "Thm1")

    if q > 1.0:
        if nu is None:
            nu = default_nu(q)
        p1, _, p2 = exponents(q, nu)
        expo = {"p": p1, "p1": p1, "p2": p2, "nu": nu}
        capp = seqs.get("capp")
        if capp is not None:
            if not _isclose(capp.p, p1):
                raise ArgumentError(
                    f"capp sequence exponent {capp.p} does not match p = {p1} from (q, nu)")
            if estimate_liminf(capp).finite:
                return RegimeVerdict(LIOUVILLE, "Thm3", exponents=expo)
        frakc = seqs.get("frakc")
        if frakc is not None:
            if frakc.kind != "composite":
                raise ArgumentError("frakc label requires a composite-product sequence")
            if estimate_liminf(frakc).finite:
                return RegimeVerdict(LIOUVILLE, "Thm5", exponents=expo)

    if q == 1.0:
        if cap2.n is None:
            raise ArgumentError("the q = 1 rule needs the sequence to record its dimension")
        est = estimate_liminf(cap2, normalizer=-float(cap2.n))
        if est.verdict == "tends_to_zero":
            return RegimeVerdict(LIOUVILLE, "Thm7")

    return RegimeVerdict(OUTSIDE)


def model_capacity_sequences(n: int, q: float, sigma: float,
                             nu: Optional[float] = None, R_list=None,
                             rel_tol: float = 1e-8) -> dict:
    """Engine-generated sequence bundle for the model weight at (n, q, sigma),
    with exactly the labels classify_capacity consumes."""
    fld = WeightField.radial_power(n, sigma)
    if R_list is None:
        R_list = default_r_sweep()
    seqs = {"cap2": capacity_scan(n, 2.0, fld, R_list, rel_tol=rel_tol)}
    if q > 1.0:
        if nu is None:
            nu = default_nu(q)
        p1, _, _ = exponents(q, nu)
        seqs["capp"] = capacity_scan(n, p1, fld, R_list, rel_tol=rel_tol)
        seqs["frakc"] = frak_c_scan(n, fld, q, nu, R_list, rel_tol=rel_tol)
    return seqs


# ---------------------------------------------------------------------------
# Canonical truth table
# ---------------------------------------------------------------------------

#: 20 (n, q, sigma) points covering every branch of the decision map and all
#: three regime boundaries.
TRUTH_TABLE_POINTS = (
    # q < 1
    (3, 0.5, 1.0),    # sigma = n-2 boundary
    (3, 0.5, 2.0),    # sigma > n-2
    (3, 0.5, 0.0),    # sigma < n-2
    (3, 0.5, -3.0),   # sigma far below
    (2, 0.5, 0.0),    # sigma = n-2 = 0 boundary
    # q = 1
    (3, 1.0, 0.0),
    (3, 1.0, -1.9),
    (3, 1.0, -2.0),   # sigma = -2 boundary
    (3, 1.0, -3.0),
    (2, 1.0, -2.0),   # sigma = -2 boundary, n = 2
    # q > 1
    (3, 2.0, 1.0),    # sigma = n-2 boundary
    (3, 2.0, 3.0),    # sigma > n-2
    (3, 2.0, 0.0),    # subcritical q
    (3, 3.0, 0.0),    # q = n/(n-sigma-2) boundary
    (3, 4.0, 0.0),    # supercritical q
    (3, 6.0, 0.5),    # q = n/(n-sigma-2) boundary
    (3, 8.0, 0.5),    # supercritical q
    (3, 2.0, -2.0),   # sigma = -2 boundary
    (3, 2.0, -3.0),   # sigma below -2
    (4, 1.5, -1.0),   # n = 4 supercritical
)


def model_truth_table(points=TRUTH_TABLE_POINTS, with_capacity: bool = False,
                      R_list=None) -> list:
    """Rows of (n, q, sigma, model verdict[, capacity verdict]) for the
    canonical battery, optionally evaluating the capacity rules on
    engine-generated sequences."""
    rows = []
    for n, q, sigma in points:
        model = classify_model(n, q, sigma)
        row = {"n": n, "q": q, "sigma": sigma, "model": model}
        if with_capacity:
            seqs = model_capacity_sequences(n, q, sigma, R_list=R_list)
            row["capacity"] = classify_capacity(seqs, q)
        rows.append(row)
    return rows
