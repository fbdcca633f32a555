"""Entropy, Fisher-type information, deficit, quotient and the dissipation
integrals of the carre-du-champ computation.

Conventions.  With rho = u^p, the deficit stored in ``F`` is

    F[rho] = (1/d) int |u'|^2 nu  -  E_p[rho],

where E_p is the p-continuous entropy

    E_p[rho] = [ (int rho)^(2/p) - int rho^(2/p) ] / (p - 2),
    E_2[rho] = (1/2) int rho log(rho / int rho),

so F >= 0 is exactly the interpolation inequality and everything is
continuous across p = 2 (the p = 2 value is the p -> 2 limit; texts that
define the logarithmic entropy without the 1/2 differ from E_2 by a factor
of two and carry the compensating factor in the inequality).

``dF_dt_analytic`` in a DissipationReport is the time derivative of the
*unnormalized* deficit d*F (equivalently of
int |u'|^2 nu + d/(p-2) (||u||_2^2 - ||u||_p^2)) along the relevant flow:

    heat flow         : -2 [ J_ff - 2 c1 (p-1) J_fc + d/(d+2) (p-1) J_cc ]
    nonlinear (clock
    of the rescaled
    pointwise flow)   : -2 beta^2 [ J_ff - 2 c1 (k+b-1) J_fc
                                    + (k(b-1) + d/(d+2)(k+b-1)) J_cc ]

with c1 = (d-1)/(d+2), evaluated at u resp. w.  The numeric counterpart
produced by the flows module differentiates the same unnormalized deficit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .constants import Params, gamma_of_beta, gamma_one, kappa_from_beta
from .discretization import GridFn, derivative, second_derivative
from .errors import DomainError

#: |p - 2| below this routes to the logarithmic branch
P_LOG_BRANCH_TOL = 1e-9


def _weights(f: GridFn):
    return f.quad.weights


def entropy(rho: GridFn, p: float) -> float:
    """Entropy E_p[rho]; logarithmic branch within 1e-9 of p = 2."""
    rho.require_positive(what="density")
    if p < 1.0:
        raise DomainError(f"exponent must be >= 1, got {p}")
    w = _weights(rho)
    mass = float(np.sum(w * rho.values))
    if abs(p - 2.0) < P_LOG_BRANCH_TOL:
        return 0.5 * float(np.sum(w * rho.values * np.log(rho.values / mass)))
    return (mass ** (2.0 / p) - float(np.sum(w * rho.values ** (2.0 / p)))) / (p - 2.0)


def fisher(rho: GridFn, p: float) -> float:
    """int |(rho^(1/p))'|^2 nu against the measure."""
    rho.require_positive(what="density")
    u = GridFn.from_values(rho.quad, rho.values ** (1.0 / p))
    up = derivative(u, check=False)
    return float(np.sum(_weights(rho) * rho.quad.nu * up.values**2))


def deficit(rho: GridFn, p: float) -> float:
    """F[rho] = fisher/d - entropy; nonnegative exactly when the
    interpolation inequality holds."""
    return fisher(rho, p) / rho.quad.d - entropy(rho, p)


def quotient(u: GridFn, p: float) -> float:
    """Rayleigh-type quotient whose infimum over nonconstant functions is d.

    (p-2) ||u'||^2_nu / (||u||_p^2 - ||u||_2^2) for p != 2, with the
    entropy denominator at p = 2.  Raises for (numerically) constant u.
    """
    w = _weights(u)
    up = derivative(u)
    num = float(np.sum(w * u.quad.nu * up.values**2))
    sq = float(np.sum(w * u.values**2))
    if abs(p - 2.0) < P_LOG_BRANCH_TOL:
        u.require_positive(what="quotient input")
        den = float(np.sum(w * u.values**2 * np.log(u.values**2 / sq)))
        num *= 2.0
    else:
        den = float(np.sum(w * np.abs(u.values) ** p)) ** (2.0 / p) - sq
        num *= p - 2.0
    if abs(den) < 1e-14 * max(1.0, sq):
        raise ZeroDivisionError("quotient undefined: input is constant")
    return num / den


def cdc_triple(u: GridFn) -> tuple[float, float, float]:
    """The three nu^2-weighted integrals entering the dissipation identity:

    J_ff = int |u''|^2 nu^2,   J_fc = int u'' |u'|^2/u nu^2,
    J_cc = int |u'|^4 / u^2 nu^2.
    """
    u.require_positive(what="carre-du-champ input")
    q = u.quad
    up = derivative(u, check=False).values
    upp = second_derivative(u, check=False).values
    w2 = q.weights * q.nu**2
    j_ff = float(np.sum(w2 * upp**2))
    j_fc = float(np.sum(w2 * upp * up**2 / u.values))
    j_cc = float(np.sum(w2 * up**4 / u.values**2))
    return j_ff, j_fc, j_cc


def heat_bracket(u: GridFn, p: float) -> tuple[float, float]:
    """Heat-flow dissipation quadratic form in expanded and completed-square
    form (they agree identically; both are returned for cross-checking)."""
    d = u.quad.d
    j_ff, j_fc, j_cc = cdc_triple(u)
    c = (d - 1.0) / (d + 2.0) * (p - 1.0)
    expanded = j_ff - 2.0 * c * j_fc + d / (d + 2.0) * (p - 1.0) * j_cc
    square = _completed_square(u, c) + gamma_one(Params(d, p)) * j_cc
    return expanded, square


def nonlinear_bracket(w: GridFn, p: float, beta: float) -> tuple[float, float]:
    """Same quadratic form for the rescaled nonlinear flow; reduces to the
    heat bracket at beta = 1."""
    d = w.quad.d
    kappa = kappa_from_beta(Params(d, p), beta)
    j_ff, j_fc, j_cc = cdc_triple(w)
    c = (d - 1.0) / (d + 2.0) * (kappa + beta - 1.0)
    expanded = (
        j_ff
        - 2.0 * c * j_fc
        + (kappa * (beta - 1.0) + d / (d + 2.0) * (kappa + beta - 1.0)) * j_cc
    )
    square = _completed_square(w, c) + gamma_of_beta(Params(d, p), beta) * j_cc
    return expanded, square


def _completed_square(u: GridFn, c: float) -> float:
    q = u.quad
    up = derivative(u, check=False).values
    upp = second_derivative(u, check=False).values
    resid = upp - c * up**2 / u.values
    return float(np.sum(q.weights * q.nu**2 * resid**2))


@dataclass(frozen=True)
class DissipationReport:
    """Functional values and dissipation integrals at one state.

    ``dF_dt_numeric`` is NaN until a flow trajectory injects the central
    finite difference of the unnormalized deficit; ``Q_p`` is NaN for
    constant input (0/0).
    """

    E_p: float
    I_p: float
    F: float
    Q_p: float
    J_ff: float
    J_fc: float
    J_cc: float
    dF_dt_analytic: float
    dF_dt_numeric: float
    d: float
    p: float
    beta: float
    N: int

    def to_dict(self) -> dict:
        return {
            "E_p": self.E_p,
            "I_p": self.I_p,
            "F": self.F,
            "Q_p": self.Q_p,
            "J_ff": self.J_ff,
            "J_fc": self.J_fc,
            "J_cc": self.J_cc,
            "dF_dt_analytic": self.dF_dt_analytic,
            "dF_dt_numeric": self.dF_dt_numeric,
            "config": {"d": self.d, "p": self.p, "beta": self.beta, "N": self.N},
        }

    def with_numeric(self, value: float) -> "DissipationReport":
        return replace(self, dF_dt_numeric=value)


def _report_core(u: GridFn, p: float) -> tuple[float, float, float, float]:
    rho = GridFn.from_values(u.quad, u.values**p)
    e = entropy(rho, p)
    i = fisher(rho, p)
    f = i / u.quad.d - e
    try:
        q = quotient(u, p)
    except ZeroDivisionError:
        q = math.nan
    return e, i, f, q


def dissipation_heat(u: GridFn, p: float) -> DissipationReport:
    """Report at u for the heat flow acting on rho = u^p.

    dF_dt_analytic = -2 * (expanded bracket); the expanded and
    completed-square evaluations must agree to roundoff, which the
    verification suites assert.
    """
    u.require_positive(what="heat dissipation input")
    e, i, f, qv = _report_core(u, p)
    j_ff, j_fc, j_cc = cdc_triple(u)
    expanded, _ = heat_bracket(u, p)
    return DissipationReport(
        E_p=e, I_p=i, F=f, Q_p=qv,
        J_ff=j_ff, J_fc=j_fc, J_cc=j_cc,
        dF_dt_analytic=-2.0 * expanded,
        dF_dt_numeric=math.nan,
        d=u.quad.d, p=p, beta=1.0, N=u.quad.n,
    )


def dissipation_nonlinear(w: GridFn, p: float, beta: float) -> DissipationReport:
    """Report at w for the rescaled nonlinear flow (dissipation in the clock
    of that flow); rho = w^(beta p)."""
    w.require_positive(what="nonlinear dissipation input")
    if math.isinf(beta) or beta == 0.0:
        raise DomainError("nonlinear dissipation needs finite nonzero beta")
    rho = GridFn.from_values(w.quad, w.values ** (beta * p))
    e = entropy(rho, p)
    i = fisher(rho, p)
    f = i / w.quad.d - e
    u = GridFn.from_values(w.quad, w.values**beta)
    try:
        qv = quotient(u, p)
    except ZeroDivisionError:
        qv = math.nan
    j_ff, j_fc, j_cc = cdc_triple(w)
    expanded, _ = nonlinear_bracket(w, p, beta)
    return DissipationReport(
        E_p=e, I_p=i, F=f, Q_p=qv,
        J_ff=j_ff, J_fc=j_fc, J_cc=j_cc,
        dF_dt_analytic=-2.0 * beta * beta * expanded,
        dF_dt_numeric=math.nan,
        d=w.quad.d, p=p, beta=beta, N=w.quad.n,
    )
