"""Existence condition, moment growth exponents and Hoelder exponents.

Everything here is closed-form algebra in the model coefficients.  The case
beta == 2 (wave) is handled as a separate branch, never as a limit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import DomainError
from .params import ModelParams


@dataclass(frozen=True)
class RegimeReport:
    exists: bool
    margin: float
    theta: float
    lambda_exp: Optional[float] = None
    p_exp: Optional[float] = None
    t_exp: Optional[float] = None
    rho: Optional[float] = None
    kappa: Optional[float] = None
    rho_capped: Optional[float] = None
    kappa_capped: Optional[float] = None
    time_holder_valid: Optional[bool] = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def margin_from(alpha: float, beta: float, gamma: float, H0: float, H: float) -> float:
    """Left minus right side of the existence inequality for raw coefficients.

    Accepts the boundary value H = 1/2 (white noise in space), which model
    parameters exclude, so that the classical reductions can be checked.
    """
    rhs = 3.0 - 4.0 * H
    if beta == 2.0:
        return alpha * min(1.0 + gamma, 2.0) - rhs
    inner = min(2.0 * gamma - 2.0 + 2.0 * H0,
                2.0 * gamma - 1.0 + beta * (1.0 - 2.0 * H) / alpha,
                0.0)
    return 2.0 * alpha + (alpha / beta) * inner - rhs


def existence_margin(p: ModelParams) -> float:
    """Left side minus right side of the existence inequality."""
    return margin_from(p.alpha, p.beta, p.gamma, p.H0, p.H)


def check_existence(p: ModelParams) -> tuple[bool, float]:
    """(exists, margin).  The inequality is strict, so margin == 0 means no."""
    m = existence_margin(p)
    return m > 0.0, m


def theta(p: ModelParams) -> float:
    return (2.0 * p.beta + 2.0 * p.gamma - 2.0 - p.beta * (2.0 - 2.0 * p.H) / p.alpha) / (2.0 * p.H0)


def _require_existence(p: ModelParams):
    ok, m = check_existence(p)
    if not ok:
        raise DomainError(f"existence condition fails (margin {m:.6g})")


def growth_exponents(p: ModelParams) -> tuple[float, float, float]:
    """Exponents of lambda, p and t in the moment bounds exp(C lam^. p^. t^.)."""
    _require_existence(p)
    th = theta(p)
    d = 2.0 * p.H0 * th + 1.0
    return 2.0 / d, 1.0 / d, 2.0 * p.H0 * (th + 1.0) / d


def holder_from(alpha: float, beta: float, gamma: float, H0: float, H: float) -> tuple[float, float, bool]:
    """(rho, kappa, time_holder_valid) for raw coefficients, H = 1/2 allowed."""
    rho = beta + gamma - 1.0 - beta * (1.0 - H) / alpha + H0
    if beta == 2.0:
        kappa = 0.5 * alpha * min(1.0 + gamma, 2.0) - 1.0 + H
        valid = alpha * gamma > 2.0 - 2.0 * H
    else:
        kappa = alpha - 1.0 + H + (alpha / beta) * min(gamma - 1.0 + H0, 0.0)
        valid = True
    return rho, kappa, valid


def holder_exponents(p: ModelParams) -> tuple[float, float, float, float, bool]:
    """(rho, kappa, min(rho, 1), min(kappa, 1), time_holder_valid)."""
    _require_existence(p)
    rho, kappa, valid = holder_from(p.alpha, p.beta, p.gamma, p.H0, p.H)
    return rho, kappa, min(rho, 1.0), min(kappa, 1.0), valid


def necessity_white_time(p: ModelParams) -> bool:
    """At H0 = 1/2 the existence condition is also necessary."""
    if p.H0 != 0.5:
        raise DomainError("necessity is only established for H0 = 1/2")
    return check_existence(p)[0]


def regime_report(p: ModelParams) -> RegimeReport:
    ok, m = check_existence(p)
    th = theta(p)
    if not ok:
        return RegimeReport(False, m, th)
    lam_e, p_e, t_e = growth_exponents(p)
    rho, kappa, rc, kc, valid = holder_exponents(p)
    return RegimeReport(True, m, th, lam_e, p_e, t_e, rho, kappa, rc, kc, valid)
