"""Closed-form exponents, roots and coefficients for the flow machinery.

Everything here is an explicit rational/algebraic expression in the real
dimension d >= 1 and the exponent p >= 1.  Infinite values (the critical
exponent for d <= 2, the degenerate root when the quadratic denominator
vanishes, the d = 3, p = 6 nonlinearity) are represented by ``math.inf``,
never by a large float.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError

#: values of gamma within this distance of 0 classify as admissible
#: (the admissible intervals are closed; this absorbs roundoff at the edges)
GAMMA_TIE_TOL = 1e-11

#: |delta| below this is treated as the degenerate (linear) case
DELTA_ZERO_TOL = 1e-12


def two_star(d: float) -> float:
    """Critical exponent 2d/(d-2); infinite for d <= 2."""
    if d <= 2.0:
        return math.inf
    return 2.0 * d / (d - 2.0)


def two_sharp(d: float) -> float:
    """Heat-flow threshold exponent (2d^2+1)/(d-1)^2; infinite for d = 1."""
    if d == 1.0:
        return math.inf
    return (2.0 * d * d + 1.0) / (d - 1.0) ** 2


@dataclass(frozen=True)
class Params:
    """Ambient configuration (d, p) of every computation.

    d is a real dimension >= 1; p >= 1 must not exceed the critical exponent
    when that is finite.  p = 2 is valid and routes the functionals to their
    logarithmic branch.
    """

    d: float
    p: float

    def __post_init__(self):
        if self.d < 1.0:
            raise DomainError(f"dimension must be >= 1, got {self.d}")
        if self.p < 1.0:
            raise DomainError(f"exponent must be >= 1, got {self.p}")
        ts = two_star(self.d)
        if self.p > ts * (1.0 + 1e-14):
            raise DomainError(
                f"p={self.p} exceeds the critical exponent {ts:.6g} for d={self.d}"
            )

    @property
    def two_star(self) -> float:
        return two_star(self.d)

    @property
    def two_sharp(self) -> float:
        return two_sharp(self.d)


def critical_exponents(params: Params) -> tuple[float, float]:
    """(2d/(d-2) or inf, (2d^2+1)/(d-1)^2 or inf)."""
    return params.two_star, params.two_sharp


def ab_coefficients(params: Params) -> tuple[float, float]:
    """Coefficients (a, b) of the dissipation quadratic gamma(beta) =
    -1 + 2 b beta - a beta^2."""
    d, p = params.d, params.p
    a = ((d - 1.0) ** 2 * p * p - 3.0 * (d * d + 2.0) * p + 3.0 * (d * d + 2.0 * d + 3.0)) / (
        d + 2.0
    ) ** 2
    b = (d + 3.0 - p) / (d + 2.0)
    return a, b


def gamma_of_beta(params: Params, beta: float) -> float:
    """gamma(beta) = -1 + 2 b beta - a beta^2, the coefficient multiplying the
    quartic-ratio integral in the nonlinear-flow dissipation identity."""
    a, b = ab_coefficients(params)
    return -1.0 + 2.0 * b * beta - a * beta * beta


def gamma_one(params: Params) -> float:
    """gamma(1), the heat-flow dissipation coefficient.

    Evaluated from the expansion (p-1) (2d^2 + 1 - p (d-1)^2) / (d+2)^2,
    which equals ((d-1)/(d+2))^2 (p-1) (2#-p) for d > 1 and (p-1)/3 at d = 1,
    with no indeterminate form at d = 1.
    """
    d, p = params.d, params.p
    return (p - 1.0) * (2.0 * d * d + 1.0 - p * (d - 1.0) ** 2) / (d + 2.0) ** 2


def gamma_discriminant(params: Params) -> float:
    """Discriminant (2b)^2 - 4a of the quadratic gamma; equals
    (4d/(d+2)^2) (p-1) (2d - p(d-2)).  Nonnegative on 1 <= p <= 2* when
    d >= 3, and for every p >= 1 when d < 3."""
    a, b = ab_coefficients(params)
    return 4.0 * (b * b - a)


@dataclass(frozen=True)
class BetaRoots:
    """Roots of gamma(beta) = 0 and the quadratic's (scaled) denominator."""

    minus: float
    plus: float
    delta: float


def delta_of(params: Params) -> float:
    """delta(p, d) = d^2 (p^2-3p+3) - 2d (p^2-3) + (p-3)^2 = a (d+2)^2."""
    d, p = params.d, params.p
    return d * d * (p * p - 3.0 * p + 3.0) - 2.0 * d * (p * p - 3.0) + (p - 3.0) ** 2


def beta_roots(params: Params) -> BetaRoots:
    """Both roots of gamma(beta) = 0.

    For d >= 3 this is the displayed closed form with radicand
    d (d-2) (p-1) (2*-p); for d < 3 the equivalent (b +- sqrt(b^2-a))/a route
    is used (the critical exponent is infinite there and the reduced
    discriminant (p-1)(2d - p(d-2))d/(d+2)^2 stays nonnegative for p >= 1).
    When delta = 0 the equation degenerates to a linear one: the finite root
    is returned in ``minus`` and ``plus`` is the signed infinity it escapes to.
    """
    d, p = params.d, params.p
    a, b = ab_coefficients(params)
    delta = delta_of(params)
    if abs(delta) <= DELTA_ZERO_TOL * max(1.0, d**2 * p**2):
        if b == 0.0:
            raise DomainError("gamma is constant: no roots")
        return BetaRoots(minus=1.0 / (2.0 * b), plus=math.copysign(math.inf, b), delta=0.0)
    if d >= 3.0:
        rad = d * (d - 2.0) * (p - 1.0) * (params.two_star - p)
        if rad < -1e-13 * max(1.0, d**4):
            raise DomainError(f"negative radicand at d={d}, p={p}")
        root = math.sqrt(max(rad, 0.0))
        num = d * d - d * (p - 5.0) - 2.0 * p + 6.0
        return BetaRoots(
            minus=(num - (d + 2.0) * root) / delta,
            plus=(num + (d + 2.0) * root) / delta,
            delta=delta,
        )
    red = b * b - a
    if red < 0.0:
        raise DomainError(f"negative discriminant at d={d}, p={p}")
    root = math.sqrt(red)
    return BetaRoots(minus=(b - root) / a, plus=(b + root) / a, delta=delta)


def m_from_beta(params: Params, beta: float) -> float:
    """Diffusion exponent m = 1 + (2/p)(1/beta - 1); +inf at beta = 0."""
    if beta == 0.0:
        return math.inf
    if math.isinf(beta):
        return 1.0 - 2.0 / params.p
    return 1.0 + (2.0 / params.p) * (1.0 / beta - 1.0)


def beta_from_m(params: Params, m: float) -> float:
    """Inverse of m_from_beta; returns inf when 1 + p(m-1)/2 vanishes
    (to rounding), i.e. at m = 1 - 2/p."""
    denom = 1.0 + params.p * (m - 1.0) / 2.0
    if abs(denom) < 1e-12:
        return math.inf
    return 1.0 / denom


def kappa_from_beta(params: Params, beta: float) -> float:
    """kappa = beta (p-2) + 1, the exponent combination conserving the
    beta*p-th moment of the rescaled flow."""
    if math.isinf(beta):
        return math.inf if params.p > 2.0 else (-math.inf if params.p < 2.0 else 1.0)
    return beta * (params.p - 2.0) + 1.0


def counterexample_coefficient(params: Params, beta: float) -> float:
    """Quadratic-in-beta coefficient A(p, beta) whose positivity makes the
    heat flow increase the deficit at the power-law witness.

    The cross term alpha = (d-1) beta (p-1) / (d+2) has been eliminated.
    Vanishes at beta = B_+-(p, d)."""
    d, p = params.d, params.p
    if d < 3.0:
        raise DomainError("the counter-example coefficient needs d >= 3")
    lead = (
        (d - 1.0) ** 2 * p * p - (3.0 * d * d - 2.0 * d + 2.0) * p + d * d - 4.0 * d - 3.0
    ) / (d + 2.0) ** 2
    return lead * beta * beta + 2.0 * beta - 1.0


def counterexample_roots(params: Params) -> tuple[float, float]:
    """Roots B_-+ = (d+2)/(d+2 -+ (d-1) sqrt((p-1)(p-2#))) of A = 0
    (returned as (B_minus, B_plus)); real only for p >= 2#."""
    d, p = params.d, params.p
    if d < 3.0:
        raise DomainError("the counter-example roots need d >= 3")
    rad = (p - 1.0) * (p - params.two_sharp)
    if rad < -1e-13 * max(1.0, p * p):
        raise DomainError(f"B roots are complex for p={p} < 2#={params.two_sharp:.6g}")
    root = (d - 1.0) * math.sqrt(max(rad, 0.0))
    minus = math.inf if d + 2.0 - root == 0.0 else (d + 2.0) / (d + 2.0 - root)
    plus = (d + 2.0) / (d + 2.0 + root)
    return minus, plus


class FlowKind(enum.Enum):
    HEAT = "heat"
    NONLINEAR = "nonlinear"


@dataclass(frozen=True)
class FlowSpec:
    """Flow-family selector: linear heat flow, or the nonlinear diffusion with
    exponent m tied to beta by m = 1 + (2/p)(1/beta - 1) and
    kappa = beta (p-2) + 1.

    The d = 3, p = 6 family is represented with m = 2/3 and beta = inf (the
    pointwise rescaled form does not exist there; the density form does).
    """

    kind: FlowKind
    params: Params
    beta: float
    m: float
    kappa: float

    def __post_init__(self):
        p = self.params.p
        if self.kind is FlowKind.HEAT:
            if self.beta != 1.0 or self.m != 1.0 or self.kappa != p - 1.0:
                raise DomainError("heat flow requires beta = 1, m = 1, kappa = p - 1")
            return
        if math.isinf(self.beta):
            if abs(self.m - (1.0 - 2.0 / p)) > 1e-12:
                raise DomainError("infinite beta requires m = 1 - 2/p")
            return
        if self.beta == 0.0 or self.beta * p == 0.0:
            raise DomainError("beta and beta*p must be nonzero")
        if abs(self.m - m_from_beta(self.params, self.beta)) > 1e-12 * max(1.0, abs(self.m)):
            raise DomainError("m is inconsistent with beta")
        if abs(self.kappa - (self.beta * (p - 2.0) + 1.0)) > 1e-12 * max(1.0, abs(self.kappa)):
            raise DomainError("kappa is inconsistent with beta")

    @property
    def beta_is_infinite(self) -> bool:
        return math.isinf(self.beta)

    @classmethod
    def heat(cls, params: Params) -> "FlowSpec":
        return cls(FlowKind.HEAT, params, beta=1.0, m=1.0, kappa=params.p - 1.0)

    @classmethod
    def nonlinear(cls, params: Params, beta: float) -> "FlowSpec":
        if math.isinf(beta):
            return cls(FlowKind.NONLINEAR, params, beta=math.inf,
                       m=1.0 - 2.0 / params.p, kappa=math.inf)
        return cls(
            FlowKind.NONLINEAR,
            params,
            beta=beta,
            m=m_from_beta(params, beta),
            kappa=kappa_from_beta(params, beta),
        )

    @classmethod
    def nonlinear_from_m(cls, params: Params, m: float) -> "FlowSpec":
        return cls.nonlinear(params, beta_from_m(params, m))


@dataclass(frozen=True)
class RegionPoint:
    """Classification of a single (p, beta) point."""

    admissible: bool
    gamma: float
    A: float
    A_positive: bool
    m: float


def classify_region(params: Params, beta: float) -> RegionPoint:
    """Admissibility of (p, beta) for the nonlinear-flow dissipation.

    Interval logic: beta in [beta_-, beta_+] when delta > 0, outside
    (beta_+, beta_-) when delta < 0; ties at the endpoints are admissible
    (closed intervals).  The degenerate case delta = 0 is classified at
    p(1 - 1e-9), the stated one-sided limit.  The result coincides with the
    sign test gamma(beta) >= -tie_tol, which the test suite cross-checks.
    """
    d, p = params.d, params.p
    delta = delta_of(params)
    work = params
    if abs(delta) <= DELTA_ZERO_TOL * max(1.0, d**2 * p**2):
        work = Params(d, p * (1.0 - 1e-9))
        delta = delta_of(work)
    roots = beta_roots(work)
    if delta > 0.0:
        admissible = roots.minus - GAMMA_TIE_TOL <= beta <= roots.plus + GAMMA_TIE_TOL
    else:
        admissible = beta <= roots.plus + GAMMA_TIE_TOL or beta >= roots.minus - GAMMA_TIE_TOL
    gamma = gamma_of_beta(params, beta)
    # the tie tolerance on the root interval and the one on gamma agree to
    # rounding; prefer the gamma test near the boundary for a single story
    if not admissible and gamma >= -GAMMA_TIE_TOL:
        admissible = True
    try:
        a_val = counterexample_coefficient(params, beta)
    except DomainError:
        a_val = math.nan
    return RegionPoint(
        admissible=admissible,
        gamma=gamma,
        A=a_val,
        A_positive=bool(a_val > 0.0) if not math.isnan(a_val) else False,
        m=m_from_beta(params, beta),
    )


REGION_CSV_HEADER = "p,beta,m,gamma,admissible,A,A_positive"


def region_sweep(
    d: float,
    p_range: tuple[float, float],
    beta_range: tuple[float, float],
    n_p: int,
    n_beta: int,
) -> tuple[list[tuple], dict]:
    """Rectangular (p, beta) sweep of classify_region.

    Returns (rows, summary); each row matches REGION_CSV_HEADER.
    """
    import numpy as np

    p_lo, p_hi = p_range
    ts = two_star(d)
    if p_lo < 1.0 or (math.isfinite(ts) and p_hi > ts + 1e-12):
        raise DomainError(f"p range [{p_lo}, {p_hi}] outside [1, {ts:.6g}]")
    ps = np.linspace(p_lo, min(p_hi, ts) if math.isfinite(ts) else p_hi, n_p)
    betas = np.linspace(beta_range[0], beta_range[1], n_beta)
    rows = []
    n_admissible = 0
    for p in ps:
        params = Params(d, float(p))
        for beta in betas:
            pt = classify_region(params, float(beta))
            n_admissible += pt.admissible
            rows.append(
                (float(p), float(beta), pt.m, pt.gamma, int(pt.admissible), pt.A,
                 int(pt.A_positive))
            )
    summary = {
        "d": d,
        "p_min": float(ps[0]),
        "p_max": float(ps[-1]),
        "beta_min": float(betas[0]),
        "beta_max": float(betas[-1]),
        "n_p": int(n_p),
        "n_beta": int(n_beta),
        "n_admissible": int(n_admissible),
        "notes": [],
    }
    if d == 1.0:
        summary["notes"].append(
            "d = 1: delta changes sign at p = 2; admissibility here follows the "
            "closed-interval logic in beta for every p >= 1, which is the wider "
            "of the two published d = 1 conditions"
        )
    return rows, summary


def region_rows_to_csv(rows, path):
    """Write sweep rows with the canonical header."""
    def fmt(x):
        if isinstance(x, int):
            return str(x)
        return repr(float(x))

    with open(path, "w") as fh:
        fh.write(REGION_CSV_HEADER + "\n")
        for row in rows:
            fh.write(",".join(fmt(x) for x in row) + "\n")
