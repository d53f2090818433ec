"""Two-time-scale step sizes and the parameter conditions of both theorems.

Step sizes decay as ``alpha_k = C_alpha / (1 + h + k)`` and
``beta_k = C_beta / (1 + h + k)``. Every decaying bound is checked at
``k = 0`` where the step sizes are largest.

Violations are returned as data (a ``RegimeReport``), never raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .objectives import CurvatureConstants

EQUALITY_RTOL = 1e-12


@dataclass(frozen=True)
class ScheduleParams:
    c_alpha: float
    c_beta: float
    h: float = 0.0

    def __post_init__(self):
        if self.c_alpha <= 0 or self.c_beta <= 0 or self.h < 0:
            raise ConfigurationError(
                f"schedule needs c_alpha > 0, c_beta > 0, h >= 0; got {self}")

    def alpha(self, k: int) -> float:
        return self.c_alpha / (1.0 + self.h + k)

    def beta(self, k: int) -> float:
        return self.c_beta / (1.0 + self.h + k)


def alpha(params: ScheduleParams, k: int) -> float:
    return params.alpha(k)


def beta(params: ScheduleParams, k: int) -> float:
    return params.beta(k)


@dataclass(frozen=True)
class Check:
    """One named inequality with both sides evaluated."""

    name: str
    lhs: float
    rhs: float
    relation: str  # "<=", ">=" or "=="
    ok: bool

    def as_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "relation": self.relation, "ok": self.ok}


def _check(name: str, lhs: float, relation: str, rhs: float) -> Check:
    if relation == "<=":
        ok = lhs <= rhs
    elif relation == ">=":
        ok = lhs >= rhs
    elif relation == "==":
        ok = math.isclose(lhs, rhs, rel_tol=EQUALITY_RTOL, abs_tol=0.0)
    else:
        raise ValueError(relation)
    return Check(name, float(lhs), float(rhs), relation, bool(ok))


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    checks: tuple[Check, ...] = field(default_factory=tuple)

    @property
    def violations(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    @property
    def satisfied(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {"regime": self.regime, "satisfied": self.satisfied,
                "checks": [c.as_dict() for c in self.checks]}


def validate_basic(params: ScheduleParams, curv: CurvatureConstants,
                   t_local: int) -> RegimeReport:
    if t_local < 1:
        raise ConfigurationError("t_local must be >= 1")
    b0 = params.beta(0)
    return RegimeReport("basic", (
        _check("C_beta <= C_alpha", params.c_beta, "<=", params.c_alpha),
        _check("alpha_0 <= 1", params.alpha(0), "<=", 1.0),
        _check("L*T*beta_0 <= 1", curv.lipschitz * t_local * b0, "<=", 1.0),
    ))


def validate_theorem_sc(params: ScheduleParams, curv: CurvatureConstants,
                        t_local: int) -> RegimeReport:
    mu, L, T = curv.mu, curv.lipschitz, t_local
    a0, b0 = params.alpha(0), params.beta(0)
    return RegimeReport("SC", (
        _check("alpha_k <= mu/(8^4 (L+1)^4 T)", a0, "<=", mu / (8**4 * (L + 1) ** 4 * T)),
        _check("beta_k <= mu/(12^4 L^2 T)", b0, "<=", mu / (12**4 * L**2 * T)),
        _check("beta_k/alpha_k <= mu/(14^4 (L+1)^4 T)", b0 / a0, "<=",
               mu / (14**4 * (L + 1) ** 4 * T)),
        _check("C_alpha >= 84^4 (L+1)^4/(6 mu^2)", params.c_alpha, ">=",
               84**4 * (L + 1) ** 4 / (6 * mu**2)),
        _check("C_beta = 72/(mu T)", params.c_beta, "==", 72 / (mu * T)),
        _check("h >= max{8^4 (L+1)^4 T C_alpha/mu, 72^4 L^2/(18 mu^2)}", params.h, ">=",
               max(8**4 * (L + 1) ** 4 * T * params.c_alpha / mu, 72**4 * L**2 / (18 * mu**2))),
    ))


def validate_theorem_pl(params: ScheduleParams, curv: CurvatureConstants,
                        t_local: int) -> RegimeReport:
    mu, L, T = curv.mu, curv.lipschitz, t_local
    a0, b0 = params.alpha(0), params.beta(0)
    return RegimeReport("PL", (
        _check("alpha_k <= mu^2/(6^4 (L+1)^3 T)", a0, "<=", mu**2 / (6**4 * (L + 1) ** 3 * T)),
        _check("beta_k <= mu^2/(12^4 L^3 T)", b0, "<=", mu**2 / (12**4 * L**3 * T)),
        _check("beta_k/alpha_k <= mu^2/(12^4 (L+1)^4 T^2)", b0 / a0, "<=",
               mu**2 / (12**4 * (L + 1) ** 4 * T**2)),
        _check("C_alpha >= 12^5 (L+1)^4 T/mu^3", params.c_alpha, ">=",
               12**5 * (L + 1) ** 4 * T / mu**3),
        _check("C_beta = 12/(mu T)", params.c_beta, "==", 12 / (mu * T)),
        _check("h >= max{6^4 (L+1)^3 T C_alpha/mu^2, 12^5 L^3/mu^3}", params.h, ">=",
               max(6**4 * (L + 1) ** 3 * T * params.c_alpha / mu**2, 12**5 * L**3 / mu**3)),
    ))


def validate_filter_condition(f: int, n: int, curv: CurvatureConstants) -> RegimeReport:
    if not 0 <= f < n:
        raise ConfigurationError(f"need 0 <= f < N, got f={f}, N={n}")
    return RegimeReport("filter", (
        _check("f/(N-f) <= mu/(3L)", f / (n - f), "<=", curv.mu / (3 * curv.lipschitz)),
    ))


def validate_theorem(regime: str, params: ScheduleParams, curv: CurvatureConstants,
                     t_local: int) -> RegimeReport:
    if regime == "SC":
        return validate_theorem_sc(params, curv, t_local)
    if regime == "PL":
        return validate_theorem_pl(params, curv, t_local)
    raise ConfigurationError(f"unknown regime {regime!r}")


def _minimal_params(regime: str, curv: CurvatureConstants, t_local: int,
                    c_alpha: float | None = None) -> ScheduleParams:
    mu, L, T = curv.mu, curv.lipschitz, t_local
    if regime == "SC":
        c_alpha = c_alpha or 84**4 * (L + 1) ** 4 / (6 * mu**2)
        c_beta = 72 / (mu * T)
        h = max(8**4 * (L + 1) ** 4 * T * c_alpha / mu, 72**4 * L**2 / (18 * mu**2))
    elif regime == "PL":
        c_alpha = c_alpha or 12**5 * (L + 1) ** 4 * T / mu**3
        c_beta = 12 / (mu * T)
        h = max(6**4 * (L + 1) ** 3 * T * c_alpha / mu**2, 12**5 * L**3 / mu**3)
    else:
        raise ConfigurationError(f"unknown regime {regime!r}")
    return ScheduleParams(c_alpha=c_alpha, c_beta=c_beta, h=h)


def theorem_params(regime: str, curv: CurvatureConstants, t_local: int) -> ScheduleParams:
    """Smallest (C_alpha, h) that satisfy the theorem, with C_beta fixed by it.

    Some conditions are tight at the minimum (the PL step ratio is exactly
    at its limit), so C_alpha is nudged up by a few ulps until rounding no
    longer flips a check.
    """
    params = _minimal_params(regime, curv, t_local)
    for _ in range(64):
        if validate_theorem(regime, params, curv, t_local).satisfied:
            return params
        params = _minimal_params(regime, curv, t_local, math.nextafter(params.c_alpha, math.inf))
    raise ConfigurationError(f"could not find valid {regime} parameters for {curv}")
