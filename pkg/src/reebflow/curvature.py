"""Transverse curvature algebra at constant holomorphic sectional curvature.

For general transverse dimension m the module works at the round model,
where the curvature tensor in an orthonormal frame is

    R_{i jbar k lbar} = (c/2) (g_{i jbar} g_{k lbar} + g_{i lbar} g_{k jbar}),

and every scalar invariant has a closed form.  The contractions are also
computed by brute-force index loops with no symmetry shortcuts, so the
loops act as the oracle for the closed forms rather than the other way
around.

Norm convention (the literature varies): all tensor norms here are
orthonormal-frame sums of squared components.  This is the convention
under which the trace chain closes at the round model,
S^2 - |rho|^2 = 4 m (m-1) (m+1)^2, which is what the characteristic-
class integrand below requires.

At m = 1 the curvature tensor has a single component equal to the
quotient Gauss curvature, so |Rm|^2 = (S^T)^2 pointwise and the traceless
part Q vanishes identically; q_norm_field checks that degeneracy through
two independent numerical pipelines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigurationError
from .transverse import BasicPotential, MetricState, SCALAR_TARGET, metric_state

__all__ = [
    "RoundCurvatureModel",
    "CharacteristicIntegrandReport",
    "PinchEstimates",
    "round_tensor_contractions",
    "verify_round_characteristic_integrand",
    "q_norm_field",
    "calabi_functional",
    "calabi_bound",
    "pinch_estimates",
]

NORM_CONVENTION = (
    "orthonormal-frame sum of squared components; fixed by requiring the "
    "round-model trace chain S^2 - |rho|^2 = 4 m (m-1) (m+1)^2"
)


@dataclass(frozen=True)
class RoundCurvatureModel:
    m: int
    c: float
    scalar: float       # S^T
    ricci_norm_sq: float   # |rho^T|^2
    riemann_norm_sq: float  # |Rm^T|^2
    q_norm_sq: float        # |Q|^2
    convention: str = NORM_CONVENTION

    @property
    def scalar_closed_form(self) -> float:
        return 0.5 * self.c * self.m * (self.m + 1)

    @property
    def riemann_closed_form(self) -> float:
        return 0.5 * self.c**2 * self.m * (self.m + 1)


def round_tensor_contractions(m: int, c: float) -> RoundCurvatureModel:
    """Brute-force contractions of the constant-curvature tensor.

    Explicit quadruple loops on purpose: this is the oracle the closed
    forms are checked against, so it must not share their algebra.
    """
    if m < 1:
        raise ConfigurationError(f"transverse dimension must be >= 1, got {m}")
    if not (c > 0):
        raise ConfigurationError(f"sectional curvature constant must be positive, got {c}")
    g = np.eye(m)
    r = np.zeros((m, m, m, m))
    for i in range(m):
        for j in range(m):
            for k in range(m):
                for l in range(m):
                    r[i, j, k, l] = 0.5 * c * (g[i, j] * g[k, l] + g[i, l] * g[k, j])

    # math.fsum keeps the accumulations exactly rounded; the identity
    # checks downstream run at absolute tolerances near machine epsilon
    # and must not eat summation noise from the quadruple loops.
    scalar = math.fsum(r[i, i, k, k] for i in range(m) for k in range(m))

    rho = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            rho[i, j] = math.fsum(r[i, j, k, k] for k in range(m))
    rho_sq = math.fsum(v**2 for v in rho.ravel())

    rm_sq = math.fsum(v**2 for v in r.ravel())

    lam = scalar / (m * (m + 1))
    q_sq = math.fsum(
        (r[i, j, k, l] - lam * (g[i, j] * g[k, l] + g[i, l] * g[k, j])) ** 2
        for i in range(m)
        for j in range(m)
        for k in range(m)
        for l in range(m)
    )

    return RoundCurvatureModel(
        m=m,
        c=float(c),
        scalar=float(scalar),
        ricci_norm_sq=rho_sq,
        riemann_norm_sq=float(rm_sq),
        q_norm_sq=float(q_sq),
    )


@dataclass(frozen=True)
class CharacteristicIntegrandReport:
    m: int
    c: float
    integrand: float
    sign: int
    model: RoundCurvatureModel


def verify_round_characteristic_integrand(
    m: int, c: float = 4.0
) -> CharacteristicIntegrandReport:
    """Pointwise integrand of the basic characteristic combination
    2 c_2 - (m/(m+1)) c_1^2 wedged down to top degree, evaluated on the
    constant-curvature model:

        |Rm|^2 - 2 S^2 / (m(m+1))
               - ((m-1)(m+2)/(m(m+1))) (S^2 - (2m(m+1))^2).

    Zero at c = 4 (both the traceless part and the pinching term vanish);
    for perturbed c only the pinching term survives and the sign is
    reported.  The wedge power degenerates below m = 2.
    """
    if m < 2:
        raise ConfigurationError(f"the characteristic integrand needs m >= 2, got {m}")
    model = round_tensor_contractions(m, c)
    s = model.scalar
    pinch = s**2 - (2 * m * (m + 1)) ** 2
    integrand = (
        model.riemann_norm_sq
        - 2.0 * s**2 / (m * (m + 1))
        - (m - 1) * (m + 2) / (m * (m + 1)) * pinch
    )
    return CharacteristicIntegrandReport(
        m=m, c=float(c), integrand=float(integrand),
        sign=int(np.sign(integrand)) if abs(integrand) > 1e-12 else 0,
        model=model,
    )


def q_norm_field(phi: BasicPotential, state: Optional[MetricState] = None) -> NDArray[np.float64]:
    """Pointwise |Q|^2 of the deformed structure at m = 1.

    Every m = 1 metric has pointwise constant transverse holomorphic
    sectional curvature, so the field must vanish identically; computing
    |Rm|^2 = K^2 through the plain conformal-factor Gauss formula and
    S^T through the factored state pipeline makes this a consistency
    check between two numerically distinct chains.
    """
    if state is None:
        state = metric_state(phi)
    grid = phi.grid
    log_r = np.log(state.ratio)
    gauss = (SCALAR_TARGET - 0.5 * grid.laplacian(log_r)) / state.ratio
    return gauss**2 - state.scalar_curvature**2


def calabi_functional(phi: BasicPotential, state: Optional[MetricState] = None) -> float:
    """Integral of (S^T - 2m(m+1))^2 against the deformed measure."""
    if state is None:
        state = metric_state(phi)
    dev = state.scalar_curvature - SCALAR_TARGET
    return float(state.measure @ dev**2)


def calabi_bound(eps: float, m: int = 1) -> float:
    """Upper bound 2 (2m)^2 (m+1) eps + (2m)^2 eps^2 that an |S^T - 2m(m+1)|
    <= eps structure forces on the Calabi functional (per unit volume)."""
    if not (eps > 0):
        raise ConfigurationError(f"eps must be positive, got {eps}")
    return 2.0 * (2 * m) ** 2 * (m + 1) * eps + (2 * m) ** 2 * eps**2


@dataclass(frozen=True)
class PinchEstimates:
    alpha_upper: float
    beta_lower: float
    n_states: int


def pinch_estimates(states: Iterable[MetricState], m: int = 1) -> PinchEstimates:
    """Upper estimate of alpha and lower estimate of beta from produced
    structures: a structure with 0 <= S^T <= 2m lambda witnesses
    alpha <= lambda, one with S^T >= 2m lambda witnesses beta >= lambda.
    These are one-sided estimates over the sample, never the true values.
    """
    alpha = np.inf
    beta = -np.inf
    count = 0
    for st in states:
        s = st.scalar_curvature
        count += 1
        if s.min() >= 0.0:
            alpha = min(alpha, s.max() / (2 * m))
        beta = max(beta, s.min() / (2 * m))
    if count == 0:
        raise ConfigurationError("need at least one state for pinch estimates")
    return PinchEstimates(alpha_upper=float(alpha), beta_lower=float(beta), n_states=count)
