"""Adaptive 1-D quadrature used by the radial engines.

Composite Simpson with interval bisection.  Each interval keeps its plain
Simpson value S1 and the two-half refinement S2; the Richardson error
|S2 - S1| / 15 drives refinement and the extrapolated value S2 + (S2-S1)/15
is what gets summed.  Integrands are evaluated in batches (they must accept
numpy arrays), so deep refinement stays cheap.

Power-law integrands spanning several decades should pass log-spaced
``breakpoints`` so the initial partition already resolves the scale range.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError


def adaptive_integral(f, a: float, b: float, *, rel_tol: float = 1e-8,
                      abs_tol: float = 1e-14, breakpoints=None,
                      max_intervals: int = 20000) -> tuple[float, float]:
    """Integrate f over [a, b]; returns (value, error_estimate).

    Refines until the summed Richardson error falls below
    max(rel_tol * |integral|, abs_tol) or the interval budget runs out.
    """
    if not b > a:
        raise ArgumentError(f"integration bounds must satisfy a < b, got ({a}, {b})")
    if breakpoints is None:
        xs = np.linspace(a, b, 9)
    else:
        xs = np.unique(np.clip(np.asarray(breakpoints, dtype=float), a, b))
        if xs[0] > a or xs[-1] < b:
            xs = np.unique(np.concatenate([[a], xs, [b]]))

    left, right = xs[:-1], xs[1:]
    f_left = np.asarray(f(left), dtype=float)
    f_right = np.asarray(f(right), dtype=float)
    f_mid = np.asarray(f(0.5 * (left + right)), dtype=float)
    vals, errs, fl, fm, fr, lefts, rights = _refine_once(
        f, left, right, f_left, f_mid, f_right)

    while lefts.size < max_intervals:
        total = vals.sum()
        total_err = errs.sum()
        if total_err <= max(rel_tol * abs(total), abs_tol):
            break
        # Split every interval carrying more than its share of the error
        # budget; always include the worst one so progress is guaranteed.
        budget = max(rel_tol * abs(total), abs_tol)
        share = budget / max(lefts.size, 1)
        split = errs > share
        split[np.argmax(errs)] = True
        keep = ~split

        mid = 0.5 * (lefts[split] + rights[split])
        new_left = np.concatenate([lefts[split], mid])
        new_right = np.concatenate([mid, rights[split]])
        new_fl = np.concatenate([fl[split], fm[split]])
        new_fr = np.concatenate([fm[split], fr[split]])
        new_fm = np.asarray(f(0.5 * (new_left + new_right)), dtype=float)

        nv, ne, nfl, nfm, nfr, nl, nr = _refine_once(
            f, new_left, new_right, new_fl, new_fm, new_fr)
        vals = np.concatenate([vals[keep], nv])
        errs = np.concatenate([errs[keep], ne])
        fl = np.concatenate([fl[keep], nfl])
        fm = np.concatenate([fm[keep], nfm])
        fr = np.concatenate([fr[keep], nfr])
        lefts = np.concatenate([lefts[keep], nl])
        rights = np.concatenate([rights[keep], nr])

    return float(vals.sum()), float(errs.sum())


def _refine_once(f, left, right, f_left, f_mid, f_right):
    """Simpson on each interval and on its two halves.

    Returns extrapolated values, Richardson errors, and the half-point
    evaluations so a later split can reuse them.
    """
    h = right - left
    s1 = (h / 6.0) * (f_left + 4.0 * f_mid + f_right)
    lq = 0.75 * left + 0.25 * right
    rq = 0.25 * left + 0.75 * right
    f_lq = np.asarray(f(lq), dtype=float)
    f_rq = np.asarray(f(rq), dtype=float)
    s2 = (h / 12.0) * (f_left + 4.0 * f_lq + 2.0 * f_mid + 4.0 * f_rq + f_right)
    err = np.abs(s2 - s1) / 15.0
    vals = s2 + (s2 - s1) / 15.0
    return vals, err, f_left, f_mid, f_right, left, right


_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(7)


def panel_integrals(f, nodes: np.ndarray) -> np.ndarray:
    """Fixed 7-point Gauss-Legendre integral of f on each panel [x_k, x_{k+1}].

    Used for cumulative integrals (profile recovery) where the panels are
    already fine; no adaptivity.
    """
    nodes = np.asarray(nodes, dtype=float)
    a, b = nodes[:-1], nodes[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    # points shape (panels, 7)
    pts = mid[:, None] + half[:, None] * _GAUSS_NODES[None, :]
    fv = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    return half * (fv * _GAUSS_WEIGHTS[None, :]).sum(axis=1)
