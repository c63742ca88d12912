"""Report serialization: deterministic JSON/CSV writers and SVG plots.

Floating-point output is fixed at 17 significant digits, which round-trips
float64 exactly, so identical configs produce byte-identical CSV and JSON.
Files are written atomically (temp file in the target directory + rename).
"""

from __future__ import annotations

import math
import os
import tempfile

import numpy as np

from .classifier import RegimeVerdict
from .errors import ArgumentError
from .radial import CapacityResult, CapacitySequence, SlopeFit


def format_float(x: float) -> str:
    """17 significant digits; exact round-trip for float64."""
    if not math.isfinite(x):
        raise ArgumentError(f"cannot serialize non-finite value {x}")
    return f"{x:.17g}"


def dumps_json(obj, indent: int = 0) -> str:
    """JSON text with fixed float formatting and sorted keys."""
    pad = " " * indent
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{out}"'
    if isinstance(obj, dict):
        items = [f'{pad}  "{k}": {dumps_json(obj[k], indent + 2).lstrip()}'
                 for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        items = [f"{pad}  {dumps_json(x, indent + 2).lstrip()}" for x in seq]
        return "[\n" + ",\n".join(items) + f"\n{pad}]" if seq else "[]"
    raise ArgumentError(f"cannot serialize object of type {type(obj).__name__}")


def write_text_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Result <-> dict
# ---------------------------------------------------------------------------

def capacity_result_to_dict(res: CapacityResult) -> dict:
    return {
        "value": res.value,
        "profile": [[r, v] for r, v in res.profile],
        "quadrature_error_estimate": res.quadrature_error_estimate,
        "method": res.method,
        "degenerate": res.degenerate,
        "converged": res.converged,
        "iterations": res.iterations,
    }


def capacity_result_from_dict(d: dict) -> CapacityResult:
    return CapacityResult(
        value=float(d["value"]),
        profile=[(float(r), float(v)) for r, v in d["profile"]],
        quadrature_error_estimate=float(d["quadrature_error_estimate"]),
        method=str(d["method"]),
        degenerate=bool(d["degenerate"]),
        converged=bool(d["converged"]),
        iterations=int(d["iterations"]),
    )


def slope_fit_to_dict(fit: SlopeFit) -> dict:
    return {"slope": fit.slope, "intercept": fit.intercept,
            "residual": fit.residual, "window": list(fit.window),
            "n_points": fit.n_points}


def slope_fit_from_dict(d: dict) -> SlopeFit:
    return SlopeFit(slope=float(d["slope"]), intercept=float(d["intercept"]),
                    residual=float(d["residual"]),
                    window=tuple(float(x) for x in d["window"]),
                    n_points=int(d["n_points"]))


def verdict_to_dict(v: RegimeVerdict) -> dict:
    return {"outcome": v.outcome, "authority": v.authority,
            "exponents": dict(v.exponents) if v.exponents else None,
            "boundary": v.boundary}


def verdict_from_dict(d: dict) -> RegimeVerdict:
    expo = d.get("exponents")
    return RegimeVerdict(outcome=str(d["outcome"]),
                         authority=d.get("authority"),
                         exponents={k: float(x) for k, x in expo.items()} if expo else None,
                         boundary=bool(d["boundary"]))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def sequence_to_csv(seq: CapacitySequence) -> str:
    lines = ["R,value"]
    lines += [f"{format_float(r)},{format_float(v)}" for r, v in seq.entries]
    return "\n".join(lines) + "\n"


def sequence_to_dict(seq: CapacitySequence) -> dict:
    return {"entries": [[r, v] for r, v in seq.entries], "p": seq.p,
            "condenser_ratio": seq.condenser_ratio, "n": seq.n, "kind": seq.kind}


def truth_table_to_csv(rows: list) -> str:
    has_capacity = rows and "capacity" in rows[0]
    header = "n,q,sigma,model_outcome,model_authority,boundary"
    if has_capacity:
        header += ",capacity_outcome,capacity_authority,agree"
    lines = [header]
    for row in rows:
        m = row["model"]
        line = (f"{row['n']},{format_float(row['q'])},{format_float(row['sigma'])},"
                f"{m.outcome},{m.authority},{int(m.boundary)}")
        if has_capacity:
            c = row["capacity"]
            agree = c.outcome == "OutsideScope" or c.outcome == m.outcome
            line += f",{c.outcome},{c.authority or ''},{int(agree)}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def grid_values_to_csv(values: np.ndarray, shape: tuple) -> str:
    """2-D grid function as a CSV matrix (rows = first axis)."""
    if len(shape) != 2:
        raise ArgumentError("CSV matrix dump supports 2-D grids only")
    mat = np.asarray(values).reshape(shape)
    return "\n".join(",".join(format_float(x) for x in row) for row in mat) + "\n"


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

def svg_loglog_plot(path: str, radii, values, fit: SlopeFit | None = None,
                    title: str = "") -> None:
    """Self-contained log-log SVG: one series of points, optionally the
    fitted line with its slope annotated."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "caplab"

    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(radii, values, "o", ms=5, label="computed")
    if fit is not None:
        line = np.exp(fit.intercept) * radii ** fit.slope
        ax.loglog(radii, line, "-", lw=1.2,
                  label=f"fit: slope = {fit.slope:.4f}")
        ax.legend(loc="best", fontsize=9)
    ax.set_xlabel("R")
    ax.set_ylabel("value")
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".svg")
    os.close(fd)
    try:
        fig.savefig(tmp, format="svg", metadata={"Date": None})
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)
