"""Coefficient fields of divergence-form operators, and condenser geometry.

A field represents the symmetric, non-negative-definite coefficient matrix
a_ij(x) of the operator  Lu = sum_ij (a_ij(x) u_xi)_xj  on R^n.  Three kinds
are supported:

* ``radial_power``  a_ij(x) = (1 + |x|^2)^(-sigma/2) delta_ij,
* ``isotropic``     a_ij(x) = w(|x|) delta_ij for a caller-supplied w(r),
* ``matrix``        a_ij(x) = caller-supplied symmetric n x n matrix.

Every field is immutable after construction and all operations here are pure,
so they are safe to share across threads.  Coefficients must be evaluable
pointwise (continuous representatives); general dimensions are capped at
n <= 10, which is all the desk-scale quadrature downstream can use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ArgumentError, InvalidFieldError

MAX_GENERAL_DIMENSION = 10

# Tolerance for the pointwise non-negativity / symmetry probes.
PROBE_TOL = 1e-12


def sphere_surface_area(n: int) -> float:
    """Surface measure of the unit (n-1)-sphere: 2 pi^(n/2) / Gamma(n/2)."""
    if n < 2:
        raise ArgumentError(f"dimension must be >= 2, got {n}")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class WeightField:
    """Coefficient matrix a_ij(x) of a divergence-form operator on R^n."""

    dimension: int
    kind: str  # "radial_power" | "isotropic" | "matrix"
    sigma: Optional[float] = None
    w: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    a: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    # Constants (A, sigma) of the power-decay envelope
    # sup_{R/2 < |x| < R} sum_ij a_ij^2 <= A R^(-2 sigma), when known.
    decay_constants: Optional[tuple[float, float]] = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def radial_power(cls, n: int, sigma: float) -> "WeightField":
        """The model weight (1 + |x|^2)^(-sigma/2) delta_ij."""
        if n < 2:
            raise ArgumentError(f"dimension must be >= 2, got {n}")
        # sup of n (1+r^2)^(-sigma) over the annulus (R/2, R), R >= 1, is
        # within a constant of R^(-2 sigma); the constant below is an upper bound.
        amp = n * (4.0 ** sigma if sigma >= 0 else 2.0 ** (-sigma))
        return cls(dimension=n, kind="radial_power", sigma=float(sigma),
                   decay_constants=(amp, float(sigma)))

    @classmethod
    def identity(cls, n: int) -> "WeightField":
        """a_ij = delta_ij, the classical (unweighted) case."""
        return cls.radial_power(n, 0.0)

    @classmethod
    def isotropic(cls, n: int, w: Callable, decay_constants=None) -> "WeightField":
        """Scalar radial weight: a_ij(x) = w(|x|) delta_ij.  w must accept arrays."""
        if not 2 <= n <= MAX_GENERAL_DIMENSION:
            raise ArgumentError(f"dimension must be in [2, {MAX_GENERAL_DIMENSION}], got {n}")
        return cls(dimension=n, kind="isotropic", w=w, decay_constants=decay_constants)

    @classmethod
    def matrix(cls, n: int, a: Callable, decay_constants=None, probes: int = 100,
               probe_radius: float = 10.0, seed: int = 0) -> "WeightField":
        """General matrix field a(x) -> symmetric PSD (n, n) array.

        Symmetry is checked on ``probes`` random points at construction;
        non-negativity of the quadratic form is checked lazily on every
        evaluation (a probed value below -1e-12 raises InvalidFieldError).
        """
        if not 2 <= n <= MAX_GENERAL_DIMENSION:
            raise ArgumentError(f"dimension must be in [2, {MAX_GENERAL_DIMENSION}], got {n}")
        fld = cls(dimension=n, kind="matrix", a=a, decay_constants=decay_constants)
        rng = np.random.default_rng(seed)
        for x in rng.uniform(-probe_radius, probe_radius, size=(probes, n)):
            m = np.asarray(a(x), dtype=float)
            if m.shape != (n, n):
                raise InvalidFieldError(f"matrix callback returned shape {m.shape}, expected {(n, n)}")
            if np.max(np.abs(m - m.T)) > PROBE_TOL:
                raise InvalidFieldError(f"coefficient matrix is not symmetric at x={x}")
        return fld

    # -- evaluation ---------------------------------------------------------

    @property
    def is_radial(self) -> bool:
        return self.kind in ("radial_power", "isotropic")

    def weight_at(self, r):
        """Scalar weight w(r) for radial kinds; vectorized over r."""
        r = np.asarray(r, dtype=float)
        if self.kind == "radial_power":
            return (1.0 + r * r) ** (-self.sigma / 2.0)
        if self.kind == "isotropic":
            return np.asarray(self.w(r), dtype=float)
        raise ArgumentError("weight_at is only defined for radial fields")

    def matrix_at(self, x) -> np.ndarray:
        """The full coefficient matrix at a point."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ArgumentError(f"point has shape {x.shape}, field dimension is {self.dimension}")
        if self.is_radial:
            r = float(np.linalg.norm(x))
            return float(self.weight_at(r)) * np.eye(self.dimension)
        return np.asarray(self.a(x), dtype=float)

    def matrices_at(self, points: np.ndarray) -> np.ndarray:
        """Coefficient matrices at many points, shape (m, n, n)."""
        points = np.asarray(points, dtype=float)
        m, n = points.shape
        if n != self.dimension:
            raise ArgumentError(f"points have dimension {n}, field dimension is {self.dimension}")
        if self.is_radial:
            r = np.sqrt((points * points).sum(axis=1))
            return self.weight_at(r)[:, None, None] * np.eye(n)[None, :, :]
        out = np.empty((m, n, n))
        for i in range(m):
            out[i] = self.a(points[i])
        return out


def quadratic_form(fld: WeightField, x, xi) -> float:
    """Pointwise quadratic form  sum_ij a_ij(x) xi_i xi_j.

    Never negative for a valid field; a probed value below -1e-12 raises
    InvalidFieldError, smaller negative round-off is clamped to zero.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if x.shape != (fld.dimension,) or xi.shape != (fld.dimension,):
        raise ArgumentError(
            f"x and xi must have shape ({fld.dimension},); got {x.shape} and {xi.shape}")
    if fld.is_radial:
        r = float(np.linalg.norm(x))
        q = float(fld.weight_at(r)) * float(xi @ xi)
    else:
        q = float(xi @ (fld.matrix_at(x) @ xi))
    if q < -PROBE_TOL:
        raise InvalidFieldError(f"quadratic form is negative ({q}) at x={x}: field is not PSD")
    return max(q, 0.0)


def bilinear_form(fld: WeightField, x, xi, eta) -> float:
    """sum_ij a_ij(x) xi_i eta_j, the polarization of quadratic_form."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if fld.is_radial:
        return float(fld.weight_at(float(np.linalg.norm(x)))) * float(xi @ eta)
    return float(xi @ (fld.matrix_at(x) @ eta))


def weight_sup_norm(fld: WeightField, r_in: float, r_out: float,
                    samples: int = 512, rng=None) -> float:
    """Approximate sup over the annulus r_in < |x| < r_out of sum_ij a_ij(x)^2.

    Radial-power fields use the exact closed form n (1+r^2)^(-sigma), whose
    supremum sits at the annulus endpoint selected by the sign of sigma.
    Other kinds are sampled densely; the returned value is a lower bound on
    the true supremum.
    """
    if not (0 < r_in < r_out):
        raise ArgumentError(f"annulus requires 0 < r_in < r_out, got ({r_in}, {r_out})")
    if samples < 1:
        raise ArgumentError("samples must be >= 1")
    n = fld.dimension
    if fld.kind == "radial_power":
        r = r_in if fld.sigma >= 0 else r_out
        return n * (1.0 + r * r) ** (-fld.sigma)
    if fld.kind == "isotropic":
        r = np.linspace(r_in, r_out, max(samples, 2))
        w = np.asarray(fld.w(r), dtype=float)
        return float(np.max(n * w * w))
    if rng is None:
        rng = np.random.default_rng(0)
    radii = rng.uniform(r_in, r_out, size=samples)
    dirs = rng.normal(size=(samples, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = radii[:, None] * dirs
    mats = fld.matrices_at(pts)
    return float(np.max((mats * mats).sum(axis=(1, 2))))


# ---------------------------------------------------------------------------
# Condensers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Uniform Cartesian grid of cells covering a box.

    Cell (i_1, ..., i_n) has center lo + (i + 1/2) * spacing and volume
    spacing^n.  Cells are flattened in C order.
    """

    lo: tuple
    shape: tuple
    spacing: float

    def __post_init__(self):
        if len(self.lo) != len(self.shape):
            raise ArgumentError("lo and shape must have equal length")
        if self.spacing <= 0:
            raise ArgumentError("spacing must be positive")
        if any(s < 2 for s in self.shape):
            raise ArgumentError("grid needs at least 2 cells per axis")

    @property
    def dimension(self) -> int:
        return len(self.shape)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def centers(self) -> np.ndarray:
        """All cell centers, shape (n_cells, dimension), C order."""
        axes = [self.lo[d] + (np.arange(self.shape[d]) + 0.5) * self.spacing
                for d in range(self.dimension)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class Condenser:
    """Plate pair of a capacity problem: inner plate at 1, outer plate at 0."""

    kind: str  # "concentric_balls" | "grid_mask"
    dimension: int
    r_in: Optional[float] = None
    r_out: Optional[float] = None
    inner_cells: Optional[np.ndarray] = field(default=None, compare=False)
    outer_cells: Optional[np.ndarray] = field(default=None, compare=False)
    grid: Optional[GridSpec] = None
    mask_norm: str = "l2"  # plate radii measured in "l2" (balls) or "linf" (boxes)

    @classmethod
    def concentric_balls(cls, n: int, r_in: float, r_out: float) -> "Condenser":
        """Closed ball of radius r_in against the complement of the r_out ball."""
        if n < 2:
            raise ArgumentError(f"dimension must be >= 2, got {n}")
        if not (0 < r_in < r_out):
            raise ArgumentError(f"requires 0 < r_in < r_out, got ({r_in}, {r_out})")
        return cls(kind="concentric_balls", dimension=n, r_in=float(r_in), r_out=float(r_out))

    @classmethod
    def grid_mask(cls, grid: GridSpec, inner_cells, outer_cells,
                  r_in: Optional[float] = None, r_out: Optional[float] = None) -> "Condenser":
        """Plates given as flat cell-index sets on a grid.

        Optional r_in / r_out record the annulus radii when the mask was
        built from one; the comparison check needs them.
        """
        inner = np.unique(np.asarray(inner_cells, dtype=np.intp))
        outer = np.unique(np.asarray(outer_cells, dtype=np.intp))
        if inner.size == 0 or outer.size == 0:
            raise ArgumentError("inner and outer plates must both be nonempty")
        if np.intersect1d(inner, outer).size > 0:
            raise ArgumentError("inner and outer plates must be disjoint")
        n_cells = grid.n_cells
        for arr, name in ((inner, "inner"), (outer, "outer")):
            if arr.min() < 0 or arr.max() >= n_cells:
                raise ArgumentError(f"{name} plate indices out of range for the grid")
        return cls(kind="grid_mask", dimension=grid.dimension,
                   inner_cells=inner, outer_cells=outer, grid=grid,
                   r_in=r_in, r_out=r_out)


# ---------------------------------------------------------------------------
# Config-block constructors (shared by the CLI)
# ---------------------------------------------------------------------------

_WEIGHT_KEYS = {"kind", "sigma", "n", "scale"}


def weight_field_from_config(cfg: dict) -> WeightField:
    """Build a WeightField from a config block like
    ``{kind = "radial_power", sigma = -1.0, n = 3}``.

    Supported kinds: radial_power (needs sigma), identity, zero
    (the degenerate all-zero field, for exercising trivial paths).
    """
    from .errors import ConfigError

    unknown = set(cfg) - _WEIGHT_KEYS
    if unknown:
        raise ConfigError(f"unknown weight config keys: {sorted(unknown)}")
    kind = cfg.get("kind", "radial_power")
    try:
        n = int(cfg["n"])
    except KeyError:
        raise ConfigError("weight config requires 'n'")
    if kind == "radial_power":
        if "sigma" not in cfg:
            raise ConfigError("radial_power weight requires 'sigma'")
        return WeightField.radial_power(n, float(cfg["sigma"]))
    if kind == "identity":
        return WeightField.identity(n)
    if kind == "zero":
        return WeightField.isotropic(n, lambda r: np.zeros_like(np.asarray(r, dtype=float)))
    raise ConfigError(f"unknown weight kind {kind!r}")


_CONDENSER_KEYS = {"kind", "r_in", "r_out", "n"}


def condenser_from_config(cfg: dict) -> Condenser:
    """Concentric-ball condenser from ``{kind = "concentric_balls", r_in, r_out, n}``."""
    from .errors import ConfigError

    unknown = set(cfg) - _CONDENSER_KEYS
    if unknown:
        raise ConfigError(f"unknown condenser config keys: {sorted(unknown)}")
    kind = cfg.get("kind", "concentric_balls")
    if kind != "concentric_balls":
        raise ConfigError("only concentric_balls condensers are config-constructible; "
                          "grid masks are built by the grid module")
    try:
        return Condenser.concentric_balls(int(cfg["n"]), float(cfg["r_in"]), float(cfg["r_out"]))
    except KeyError as exc:
        raise ConfigError(f"condenser config missing key {exc}")
