"""Spectral model of the transverse geometry of the round S^3 over CP^1.

The regular Sasakian structure on S^3 fibers over CP^1; Reeb-invariant,
axisymmetric basic potentials reduce to functions of the moment coordinate

    x = (|z|^2 - 1) / (|z|^2 + 1)  in  [-1, 1],

where z is an affine coordinate on the quotient.  In this coordinate the
reference objects take fully explicit form:

* reference measure: uniform, dmu_ref = dx/2 (normalized to mass 1);
* basic Laplacian:   Lap f = 4 d/dx[(1 - x^2) f'(x)], with Legendre
  eigenfunctions P_k and eigenvalues -4k(k+1);
* volume ratio of a deformed structure: r(phi) = 1 + Lap(phi)/4;
* transverse scalar curvature: S(phi) * r(phi) = 4 - Lap(log r)/2,
  so the reference has S = 4 = 2m(m+1) at transverse complex dimension
  m = 1.

Discretization is Gauss-Legendre collocation.  The Laplacian is diagonal
on Legendre coefficients, so its matrix is exact on the resolved
polynomial space and the discrete spectrum reproduces -4k(k+1) to
rounding.  Both poles of the sphere sit off the grid; no boundary
handling is needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.typing import NDArray
import scipy.linalg

from .errors import (
    ConfigurationError,
    GridMismatchError,
    InadmissibleError,
    ResolutionError,
)

MIN_GRID = 8


def _lock(a: NDArray[np.float64]) -> NDArray[np.float64]:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def _legendre_pair_ld(n: int, x: NDArray) -> tuple[NDArray, NDArray]:
    """P_n and P_n' by the three-term recurrence, in extended precision."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def _nodes_weights_ld(n: int) -> tuple[NDArray, NDArray]:
    """Gauss-Legendre nodes/weights, Newton-refined in extended precision.

    Differentiating through the Legendre transform multiplies coefficient
    roundoff by up to 8 n^3; float64 node tables leave visible noise
    (~1e-6 at n = 256), so the grid data are built in longdouble and cast.
    """
    x = npleg.leggauss(n)[0].astype(np.longdouble)
    for _ in range(3):
        p, dp = _legendre_pair_ld(n, x)
        x = x - p / dp
    _, dp = _legendre_pair_ld(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    return x, w


def _vander_ld(n: int, x: NDArray) -> NDArray:
    v = np.empty((len(x), n), dtype=np.longdouble)
    v[:, 0] = 1.0
    v[:, 1] = x
    for k in range(2, n):
        v[:, k] = ((2 * k - 1) * x * v[:, k - 1] - (k - 1) * v[:, k - 2]) / k
    return v


@dataclass(frozen=True)
class Grid:
    """Gauss-Legendre collocation grid on [-1, 1] with cached operators.

    ``w`` are quadrature weights for the normalized measure dx/2 (they sum
    to 1).  Differentiation goes through the Legendre transform; the
    Laplacian uses the eigenrelation 4 d/dx[(1-x^2) P_k'] = -4k(k+1) P_k,
    which makes it diagonal on coefficients, exact on the resolved
    polynomial space, and keeps the discrete spectrum exactly -4k(k+1).
    ``lap`` is the assembled dense matrix for linear solves (Newton
    steps, implicit flow steps, eigenproblems); pointwise applications
    use the factored transform route, which carries less roundoff.
    """

    n: int
    x: NDArray[np.float64]
    w: NDArray[np.float64]
    vander: NDArray[np.float64]      # P_k(x_i), shape (n, n)
    fwd: NDArray[np.float64]         # nodal values -> Legendre coefficients
    dcoef: NDArray[np.float64]       # coefficient-space d/dx
    lap_eigs: NDArray[np.float64]    # -4k(k+1)
    lap: NDArray[np.float64]
    # extended-precision copies of the factored operators; pointwise
    # derivative and Laplacian applications run through these so that the
    # 8 n^3 roundoff amplification lands on the longdouble epsilon
    _w_ld: NDArray[np.longdouble]
    _vander_ld: NDArray[np.longdouble]
    _fwd_ld: NDArray[np.longdouble]
    _dcoef_ld: NDArray[np.longdouble]
    _lap_eigs_ld: NDArray[np.longdouble]

    def __eq__(self, other):
        return isinstance(other, Grid) and self.n == other.n

    def __hash__(self):
        return hash(("Grid", self.n))

    # -- transforms ------------------------------------------------------

    def to_coeffs(self, f: NDArray) -> NDArray[np.float64]:
        """Legendre coefficients of the degree-(n-1) interpolant."""
        return self.fwd @ np.asarray(f, dtype=np.float64)

    def from_coeffs(self, c: NDArray) -> NDArray[np.float64]:
        c = np.asarray(c, dtype=np.float64)
        if len(c) < self.n:
            c = np.pad(c, (0, self.n - len(c)))
        return self.vander @ c

    def interpolate(self, f: NDArray, x_new: NDArray) -> NDArray[np.float64]:
        """Evaluate the spectral interpolant of nodal values at new points."""
        return npleg.legval(np.asarray(x_new, dtype=np.float64), self.to_coeffs(f))

    # -- calculus --------------------------------------------------------

    def integrate(self, f: NDArray) -> float:
        """Integral against the normalized reference measure dx/2."""
        return float(self.w @ np.asarray(f, dtype=np.float64))

    def deriv(self, f: NDArray) -> NDArray[np.float64]:
        f = np.asarray(f, dtype=np.longdouble)
        c = self._fwd_ld @ f
        return (self._vander_ld @ (self._dcoef_ld @ c)).astype(np.float64)

    def laplacian(self, f: NDArray) -> NDArray[np.float64]:
        return self._laplacian_ld(f).astype(np.float64)

    def _laplacian_ld(self, f: NDArray) -> NDArray[np.longdouble]:
        # Large additive constants amplify roundoff through the top
        # Legendre modes (the eigenvalue reaches -4n^2); subtracting the
        # mean first is exact for the operator and keeps the noise floor
        # at the O(1)-field level.  Chained applications (ratio, then
        # curvature of the ratio) square the amplification, so callers
        # that feed one Laplacian into another stay in longdouble
        # between the two applications.
        f = np.asarray(f, dtype=np.longdouble)
        c = self._fwd_ld @ (f - self._w_ld @ f)
        return self._vander_ld @ (self._lap_eigs_ld * c)


@lru_cache(maxsize=8)
def make_grid(n: int = 256) -> Grid:
    """Build the collocation grid; n must be at least 8.  Grids are cached
    per size (they are immutable)."""
    if int(n) != n or n < MIN_GRID:
        raise ConfigurationError(f"grid size must be an integer >= {MIN_GRID}, got {n}")
    n = int(n)
    x_ld, w_raw_ld = _nodes_weights_ld(n)
    vander_ld = _vander_ld(n, x_ld)
    k = np.arange(n)
    # c_k = (2k+1) * sum_i w_i f(x_i) P_k(x_i); exact for deg(f) < n.
    fwd_ld = (2 * k + 1)[:, None] * (vander_ld.T * (w_raw_ld / 2)[None, :])
    x = x_ld.astype(np.float64)
    w = (w_raw_ld / 2).astype(np.float64)
    vander = vander_ld.astype(np.float64)
    fwd = fwd_ld.astype(np.float64)
    dcoef = np.zeros((n, n))
    for j in range(1, n):
        e = np.zeros(j + 1)
        e[j] = 1.0
        dc = npleg.legder(e)
        dcoef[: len(dc), j] = dc
    lam = -4.0 * k * (k + 1.0)
    lap = (vander * (lam * (2 * k + 1))[None, :]) @ (vander.T * w[None, :])
    return Grid(
        n=n,
        x=_lock(x),
        w=_lock(w),
        vander=_lock(vander),
        fwd=_lock(fwd),
        dcoef=_lock(dcoef),
        lap_eigs=_lock(lam),
        lap=_lock(lap),
        _w_ld=w_raw_ld / 2,
        _vander_ld=vander_ld,
        _fwd_ld=fwd_ld,
        _dcoef_ld=dcoef.astype(np.longdouble),
        _lap_eigs_ld=k.astype(np.longdouble) * (k + 1) * -4,
    )


# ---------------------------------------------------------------------------
# structures and potentials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Model:
    """Bookkeeping for the Sasakian model: transverse complex dimension m,
    the D-homothetic (Tanno) scale, and the collocation grid.

    The target equation couples the transverse Ricci form to (m+1) times
    the contact form; ``einstein_target`` records that constant.  At
    tanno_scale = 1 the reference structure is the constant-curvature
    Sasakian-Einstein one with transverse Einstein constant 2(m+1).
    PDE paths (states, functionals, flows) require m = 1; the curvature
    algebra accepts any m >= 1.
    """

    m: int = 1
    tanno_scale: float = 1.0
    grid: Optional[Grid] = None

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ConfigurationError(f"m must be a positive integer, got {self.m}")
        if not (self.tanno_scale > 0):
            raise ConfigurationError(f"tanno_scale must be positive, got {self.tanno_scale}")

    @property
    def einstein_target(self) -> float:
        return float(self.m + 1)

    @property
    def transverse_einstein_constant(self) -> float:
        """Constant mu in Ric^T = mu g^T for the (rescaled) reference."""
        return 2.0 * (self.m + 1) / self.tanno_scale


def tanno_deform(model: Model, s: float) -> Model:
    """D-homothetic deformation g^T -> s g^T; mu maps to mu / s.

    The choice s = mu / (2(m+1)) renormalizes any transverse-Einstein
    structure to the Einstein constant 2(m+1).
    """
    if not (s > 0):
        raise ConfigurationError(f"tanno scale factor must be positive, got {s}")
    return Model(m=model.m, tanno_scale=model.tanno_scale * s, grid=model.grid)


@dataclass(frozen=True)
class BasicPotential:
    """Axisymmetric basic potential sampled on the collocation grid."""

    values: NDArray[np.float64]
    grid: Grid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.n,):
            raise GridMismatchError(
                f"potential has shape {v.shape}, grid expects ({self.grid.n},)"
            )
        object.__setattr__(self, "values", _lock(v))

    @classmethod
    def from_callable(cls, grid: Grid, f: Callable[[NDArray], NDArray]) -> "BasicPotential":
        return cls(values=np.asarray(f(grid.x), dtype=np.float64) + np.zeros(grid.n), grid=grid)

    @classmethod
    def zero(cls, grid: Grid) -> "BasicPotential":
        return cls(values=np.zeros(grid.n), grid=grid)

    def shifted(self, c: float) -> "BasicPotential":
        return BasicPotential(values=self.values + float(c), grid=self.grid)

    def mean(self) -> float:
        return self.grid.integrate(self.values)

    def osc(self) -> float:
        return float(self.values.max() - self.values.min())

    def sup(self) -> float:
        return float(np.abs(self.values).max())


def _check_same_grid(*grids: Grid) -> Grid:
    g0 = grids[0]
    for g in grids[1:]:
        if g.n != g0.n:
            raise GridMismatchError(f"grid sizes differ: {g0.n} vs {g.n}")
    return g0


def _ratio_of(grid: Grid, values: NDArray) -> NDArray[np.float64]:
    return 1.0 + grid.laplacian(values) / 4.0


def admissibility(phi: BasicPotential) -> tuple[bool, float]:
    """Whether the deformed structure is positive, and the margin min r(phi)."""
    margin = float(_ratio_of(phi.grid, phi.values).min())
    return margin > 0.0, margin


# ---------------------------------------------------------------------------
# metric states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricState:
    """Derived geometric data of an admissible potential.

    ratio            volume ratio r(phi) against the reference measure
    scalar_curvature transverse scalar curvature S of the deformed structure
    ricci_potential  normalized Ricci potential h with int e^h dmu_phi = 1
    norm_constant    the constant c in h = -log r - (m+1) phi + c
    margin           min of ratio (positivity margin)
    """

    potential: BasicPotential
    ratio: NDArray[np.float64]
    scalar_curvature: NDArray[np.float64]
    ricci_potential: NDArray[np.float64]
    norm_constant: float
    margin: float

    @property
    def grid(self) -> Grid:
        return self.potential.grid

    @property
    def measure(self) -> NDArray[np.float64]:
        """Quadrature weights of the deformed (normalized) measure."""
        return self.grid.w * self.ratio

    def integrate(self, f: NDArray) -> float:
        """Integral against the deformed measure dmu_phi."""
        return float(self.measure @ np.asarray(f, dtype=np.float64))

    def laplacian(self, f: NDArray) -> NDArray[np.float64]:
        """Laplacian of the deformed structure: reference Laplacian / ratio."""
        return self.grid.laplacian(f) / self.ratio

    def grad_norm_sq(self, f: NDArray) -> NDArray[np.float64]:
        """|df|^2 in the deformed metric: 4 (1-x^2) f'^2 / ratio."""
        g = self.grid
        df = g.deriv(f)
        return 4.0 * (1.0 - g.x**2) * df**2 / self.ratio


M_DIM = 1            # transverse complex dimension of the PDE model
SCALAR_TARGET = 4.0  # 2 m (m+1) at m = 1; also the quotient Gauss curvature


def log_mean_exp(grid_or_weights, z: NDArray) -> float:
    """log of int e^z against the given (nonnegative, mass ~1) weights.

    Guarded against overflow; mandatory for Ricci-potential normalization
    because flow trajectories develop large additive constants.
    """
    w = grid_or_weights.w if isinstance(grid_or_weights, Grid) else np.asarray(grid_or_weights)
    z = np.asarray(z, dtype=np.float64)
    zmax = float(z.max())
    return zmax + float(np.log(w @ np.exp(z - zmax)))


def metric_state(phi: BasicPotential) -> MetricState:
    """Volume ratio, scalar curvature and Ricci potential of a potential.

    Raises InadmissibleError when the deformed structure is not positive.
    """
    grid = phi.grid
    ratio_ld = 1.0 + grid._laplacian_ld(phi.values) / 4.0
    ratio = ratio_ld.astype(np.float64)
    margin = float(ratio.min())
    if margin <= 0.0:
        raise InadmissibleError(margin)
    log_ratio = np.log(ratio)
    # Normalization: int e^h dmu_phi = e^c int e^{-(m+1) phi} dmu_ref = 1,
    # so c is the explicit log-integral below (no root-find needed: e^c
    # multiplies a fixed positive integral).
    c = -log_mean_exp(grid, -(M_DIM + 1) * phi.values)
    h = -log_ratio - (M_DIM + 1) * phi.values + c
    scalar = (
        (SCALAR_TARGET - 0.5 * grid._laplacian_ld(np.log(ratio_ld))) / ratio_ld
    ).astype(np.float64)
    return MetricState(
        potential=phi,
        ratio=_lock(ratio),
        scalar_curvature=_lock(scalar),
        ricci_potential=_lock(h),
        norm_constant=float(c),
        margin=margin,
    )


def reference_state(grid: Grid) -> MetricState:
    return metric_state(BasicPotential.zero(grid))


def basic_laplacian(f: NDArray, state: Optional[MetricState] = None,
                    grid: Optional[Grid] = None) -> NDArray[np.float64]:
    """Basic Laplacian of f: reference operator, or the deformed one when a
    state is given."""
    if state is not None:
        return state.laplacian(f)
    if grid is None:
        raise ConfigurationError("basic_laplacian needs a state or a grid")
    return grid.laplacian(f)


def integrate(f: NDArray, state: Optional[MetricState] = None,
              grid: Optional[Grid] = None) -> float:
    """Integral of f against the normalized reference or deformed measure."""
    if state is not None:
        return state.integrate(f)
    if grid is None:
        raise ConfigurationError("integrate needs a state or a grid")
    return grid.integrate(f)


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumResult:
    """Leading eigenvalues of the deformed Laplacian (axisymmetric sector).

    eigenvalues       sorted descending from 0 toward -inf
    clusters          (eigenvalue, multiplicity) after tolerance grouping
    has_obstruction   True when -4(m+1) lies in the computed spectrum;
                      on the round model this flags the Hamiltonian
                      holomorphic fields that obstruct uniqueness
    obstruction_gap   min distance of the spectrum to -4(m+1)
    """

    eigenvalues: NDArray[np.float64]
    clusters: tuple[tuple[float, int], ...]
    has_obstruction: bool
    obstruction_gap: float


def spectrum(state: MetricState, k: int, obstruction_tol: float = 1e-6) -> SpectrumResult:
    """First k+1 eigenvalues (including 0) of the deformed basic Laplacian.

    Solves the generalized symmetric problem  Lap_ref f = lambda r f  in
    the quadrature inner product; on the reference this returns exactly
    -4 j (j+1).  Requires k <= n // 3 (spectral accuracy window).
    """
    grid = state.grid
    if k < 0:
        raise ConfigurationError("k must be nonnegative")
    if k > grid.n // 3:
        raise ResolutionError(
            f"requested {k} eigenvalues on an n={grid.n} grid; "
            f"resolvable window is k <= {grid.n // 3}"
        )
    a = grid.w[:, None] * grid.lap
    a = 0.5 * (a + a.T)
    b = grid.w * state.ratio
    vals = scipy.linalg.eigh(a, np.diag(b), eigvals_only=True)
    vals = vals[::-1][: k + 1]  # descending: 0 first
    clusters: list[tuple[float, int]] = []
    for v in vals:
        if clusters and abs(v - clusters[-1][0]) <= 1e-8 * (1.0 + abs(v)):
            ev, mult = clusters[-1]
            clusters[-1] = (ev, mult + 1)
        else:
            clusters.append((float(v), 1))
    target = -4.0 * (M_DIM + 1)
    gap = float(np.abs(vals - target).min())
    return SpectrumResult(
        eigenvalues=_lock(vals),
        clusters=tuple(clusters),
        has_obstruction=bool(gap <= abs(target) * obstruction_tol),
        obstruction_gap=gap,
    )
