"""Energy functionals of basic potentials and their structure identities.

The functionals I, J, F0, F and the K-energy are defined against a base
metric state; potentials compose additively, so a state deformed by phi
relative to a base with potential psi is simply the state of psi + phi.
All measures are normalized to mass one, which makes every functional
finite and translation behavior explicit.

Quadrature choices: J integrates I(s phi)/s with a 32-node Gauss rule in
s (the integrand is smooth, here in fact linear in s); the K-energy
integrates over the path parameter with 48 Gauss nodes by default and
accepts a quadratic reparametrization of the same ray, which serves as
the path-independence cross-check.

The K-energy integrand is evaluated after moving the Laplacian off the
log-ratio field by self-adjointness: int f Lap(log r) dmu equals
int Lap(f) log r dmu exactly for the discrete operator, and the moved
form avoids differentiating a computed field a second time (which
amplifies its rounding noise by the top Laplacian eigenvalue).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.typing import NDArray

from .errors import PreconditionError, SolverError
from .transverse import (
    M_DIM,
    SCALAR_TARGET,
    BasicPotential,
    Grid,
    MetricState,
    log_mean_exp,
    metric_state,
)

__all__ = [
    "FunctionalLedger",
    "CocycleReport",
    "SandwichReport",
    "ShiftBoundReport",
    "MabuchiReport",
    "OscBoundReport",
    "relative_state",
    "eval_I",
    "eval_J",
    "eval_F",
    "eval_K_energy",
    "verify_cocycle",
    "verify_ij_sandwich",
    "verify_shift_bound",
    "verify_mabuchi_f_relation",
    "osc_bound_report",
    "random_potential",
]


@lru_cache(maxsize=4)
def _gauss01(n: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Gauss-Legendre nodes and weights on (0, 1)."""
    t, w = npleg.leggauss(n)
    return (t + 1.0) / 2.0, w / 2.0


def relative_state(base: MetricState, phi: BasicPotential) -> MetricState:
    """State of the base deformed by phi (potentials compose additively)."""
    values = base.potential.values + phi.values
    return metric_state(BasicPotential(values=values, grid=phi.grid))


def eval_I(phi: BasicPotential, base: MetricState) -> float:
    """I = int phi (dmu_base - dmu_phi), measures normalized to mass one."""
    state = relative_state(base, phi)
    grid = phi.grid
    return float(grid.w @ (phi.values * (base.ratio - state.ratio)))


def eval_J(phi: BasicPotential, base: MetricState, s_nodes: int = 32) -> float:
    """J = int_0^1 I(s phi)/s ds by Gauss quadrature in s.

    I vanishes quadratically at s = 0, so the integrand extends smoothly;
    admissibility along the ray follows from admissibility of phi
    (the admissible cone is convex along rays from zero), and a failure
    at an interior node therefore surfaces as an error.
    """
    grid = phi.grid
    s, w = _gauss01(s_nodes)
    total = 0.0
    for sj, wj in zip(s, w):
        scaled = BasicPotential(values=sj * phi.values, grid=grid)
        total += wj * eval_I(scaled, base) / sj
    return float(total)


def eval_F(phi: BasicPotential, base: MetricState) -> tuple[float, float]:
    """F0 = J - int phi dmu_base and the full F with its log term.

    F = F0 - 1/(m+1) log int e^{h - (m+1) phi} dmu_base, where h is the
    Ricci potential of the base; the exponent is evaluated through the
    log-sum-exp guard since (m+1) phi grows without bound along
    properness scans.
    """
    grid = phi.grid
    j_val = eval_J(phi, base)
    f0 = j_val - float(grid.w @ (phi.values * base.ratio))
    z = base.ricci_potential - (M_DIM + 1) * phi.values
    f = f0 - log_mean_exp(grid.w * base.ratio, z) / (M_DIM + 1)
    return float(f0), float(f)


def eval_K_energy(
    phi: BasicPotential,
    base: MetricState,
    path_nodes: int = 48,
    path: str = "linear",
) -> float:
    """K-energy by quadrature of -int phidot (S_t - 2m(m+1)) dmu_t dt.

    ``path`` selects the parametrization of the ray to phi: "linear"
    (phi_t = t phi) or "quadratic" (phi_t = t^2 phi).  The value is
    path-independent; the second parametrization exists to verify that.
    """
    if path == "linear":
        a = lambda t: t
        adot = lambda t: 1.0
    elif path == "quadratic":
        a = lambda t: t * t
        adot = lambda t: 2.0 * t
    else:
        raise ValueError(f"unknown path {path!r}")
    grid = phi.grid
    lap_phi = grid.laplacian(phi.values)
    t_nodes, t_weights = _gauss01(path_nodes)
    total = 0.0
    for tj, wj in zip(t_nodes, t_weights):
        state = relative_state(
            base, BasicPotential(values=a(tj) * phi.values, grid=grid)
        )
        log_ratio = np.log(state.ratio)
        # int phidot (S_t - 4) dmu_t with phidot = adot * phi; the
        # Lap(log r_t) part of S_t r_t is moved onto phidot by
        # self-adjointness before quadrature.
        inner = adot(tj) * (
            SCALAR_TARGET * float(grid.w @ (phi.values * (1.0 - state.ratio)))
            - 0.5 * float(grid.w @ (lap_phi * log_ratio))
        )
        total -= wj * inner
    return float(total)


# ---------------------------------------------------------------------------
# identity reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CocycleReport:
    """Residuals of the composition law F(psi) + F_psi(phi - psi) = F(phi)
    and of the antisymmetry F(psi) = -F_psi(-psi), for F0 and F."""

    cocycle_f0: float
    cocycle_f: float
    antisym_f0: float
    antisym_f: float

    def max_residual(self) -> float:
        return max(
            abs(self.cocycle_f0),
            abs(self.cocycle_f),
            abs(self.antisym_f0),
            abs(self.antisym_f),
        )


def verify_cocycle(
    psi: BasicPotential, phi: BasicPotential, base: MetricState
) -> CocycleReport:
    grid = psi.grid
    mid = relative_state(base, psi)
    f0_psi, f_psi = eval_F(psi, base)
    f0_phi, f_phi = eval_F(phi, base)
    rel = BasicPotential(values=phi.values - psi.values, grid=grid)
    f0_rel, f_rel = eval_F(rel, mid)
    back = BasicPotential(values=-psi.values, grid=grid)
    f0_back, f_back = eval_F(back, mid)
    return CocycleReport(
        cocycle_f0=f0_psi + f0_rel - f0_phi,
        cocycle_f=f_psi + f_rel - f_phi,
        antisym_f0=f0_psi + f0_back,
        antisym_f=f_psi + f_back,
    )


@dataclass(frozen=True)
class SandwichReport:
    i_value: float
    j_value: float
    lower_slack: float   # (m+1)(I-J) - I >= 0
    upper_slack: float   # m I - (m+1)(I-J) >= 0
    holds: bool


def verify_ij_sandwich(
    phi: BasicPotential, base: MetricState, tol: float = 1e-12
) -> SandwichReport:
    """I >= 0, J >= 0 and I <= (m+1)(I-J) <= m I, with slack values.

    At m = 1 both slacks collapse to zero (J = I/2 exactly)."""
    i_val = eval_I(phi, base)
    j_val = eval_J(phi, base)
    mid = (M_DIM + 1) * (i_val - j_val)
    lower = mid - i_val
    upper = M_DIM * i_val - mid
    holds = (
        i_val >= -tol and j_val >= -tol and lower >= -tol and upper >= -tol
    )
    return SandwichReport(
        i_value=i_val,
        j_value=j_val,
        lower_slack=lower,
        upper_slack=upper,
        holds=bool(holds),
    )


@dataclass(frozen=True)
class ShiftBoundReport:
    lhs: float
    rhs: float
    slack: float
    holds: bool


def verify_shift_bound(
    phi: BasicPotential, shift: BasicPotential, base: MetricState
) -> ShiftBoundReport:
    """|I_{base_shift}(phi - shift) - I_base(phi)| <= (m+1) Osc(shift).

    Both I-values see the same deformed structure: relative to the
    shifted base it is represented by the potential phi - shift.
    """
    shifted_base = relative_state(base, shift)
    rel = BasicPotential(values=phi.values - shift.values, grid=phi.grid)
    lhs = abs(eval_I(rel, shifted_base) - eval_I(phi, base))
    rhs = (M_DIM + 1) * shift.osc()
    return ShiftBoundReport(
        lhs=lhs, rhs=rhs, slack=rhs - lhs, holds=bool(lhs <= rhs + 1e-12)
    )


@dataclass(frozen=True)
class MabuchiReport:
    k_energy: float
    f_value: float
    h_base_mean: float   # int h_base dmu_base
    h_state_mean: float  # int h_phi dmu_phi
    residual: float
    inequality_slack: float
    holds: bool


def verify_mabuchi_f_relation(
    phi: BasicPotential, base: MetricState, path_nodes: int = 48
) -> MabuchiReport:
    """K = 2(m+1) F + 2 (int h dmu_base - int h_phi dmu_phi), and the
    lower bound K >= 2(m+1) F + 2 int h dmu_base.

    The inequality slack is -2 int h_phi dmu_phi, nonnegative because
    the normalization int e^{h_phi} dmu_phi = 1 forces the mean of h_phi
    to be nonpositive (Jensen).
    """
    grid = phi.grid
    k_val = eval_K_energy(phi, base, path_nodes=path_nodes)
    _, f_val = eval_F(phi, base)
    state = relative_state(base, phi)
    h_base = float(grid.w @ (base.ratio * base.ricci_potential))
    h_state = float(grid.w @ (state.ratio * state.ricci_potential))
    residual = k_val - 2 * (M_DIM + 1) * f_val - 2 * (h_base - h_state)
    slack = -2.0 * h_state
    return MabuchiReport(
        k_energy=k_val,
        f_value=f_val,
        h_base_mean=h_base,
        h_state_mean=h_state,
        residual=residual,
        inequality_slack=slack,
        holds=bool(slack >= -1e-10),
    )


@dataclass(frozen=True)
class OscBoundReport:
    osc: float
    i_value: float
    eps: float
    excess: float            # Osc - I
    implied_constant: float  # (Osc - I) * eps, an upper estimate for the
    #                          eps-scaled constant in the oscillation bound


def osc_bound_report(
    phi: BasicPotential, base: MetricState, eps: float
) -> OscBoundReport:
    """Oscillation-versus-I report under the curvature lower bound.

    Requires S^T of the deformed state to be at least 2 eps (at m = 1
    the transverse Ricci bound reduces to exactly that).  Violation is a
    precondition error carrying the offending minimum.
    """
    if not (eps > 0):
        raise PreconditionError(f"eps must be positive, got {eps}")
    state = relative_state(base, phi)
    s_min = float(state.scalar_curvature.min())
    if s_min < 2.0 * eps:
        raise PreconditionError(
            f"transverse curvature bound fails: min S^T = {s_min:.6g} < 2 eps = {2 * eps:.6g}"
        )
    osc = phi.osc()
    i_val = eval_I(phi, base)
    excess = osc - i_val
    return OscBoundReport(
        osc=osc,
        i_value=i_val,
        eps=eps,
        excess=excess,
        implied_constant=excess * eps,
    )


# ---------------------------------------------------------------------------
# sampling and the ledger
# ---------------------------------------------------------------------------


def random_potential(
    grid: Grid,
    rng: np.random.Generator,
    degree: int = 12,
    amplitude: float = 0.2,
    min_margin: float = 0.1,
    max_tries: int = 200,
) -> BasicPotential:
    """Seeded random potential: truncated Legendre series with decaying
    coefficients, rejection-sampled to admissibility margin >= min_margin."""
    for _ in range(max_tries):
        coeffs = np.zeros(degree + 1)
        decay = 0.6 ** np.arange(degree + 1)
        coeffs[1:] = rng.normal(0.0, amplitude, degree) * decay[1:]
        phi = BasicPotential(values=grid.from_coeffs(coeffs), grid=grid)
        margin = 1.0 + grid.laplacian(phi.values).min() / 4.0
        if margin >= min_margin:
            return phi
    raise SolverError(
        f"no admissible sample with margin >= {min_margin} in {max_tries} tries",
        trace=[],
    )


@dataclass(frozen=True)
class FunctionalLedger:
    """All functional values of one potential against one base, in the
    shape the CSV report uses."""

    tag: str
    base: str
    potential: BasicPotential
    I: float
    J: float
    F0: float
    F: float
    K: float
    osc: float
    margin: float

    @classmethod
    def evaluate(
        cls,
        tag: str,
        phi: BasicPotential,
        base: MetricState,
        base_name: str = "reference",
        path_nodes: int = 48,
    ) -> "FunctionalLedger":
        state = relative_state(base, phi)
        f0, f = eval_F(phi, base)
        return cls(
            tag=tag,
            base=base_name,
            potential=phi,
            I=eval_I(phi, base),
            J=eval_J(phi, base),
            F0=f0,
            F=f,
            K=eval_K_energy(phi, base, path_nodes=path_nodes),
            osc=phi.osc(),
            margin=state.margin,
        )

    def row(self) -> tuple:
        return (self.tag, self.I, self.J, self.F0, self.F, self.K, self.osc, self.margin)
