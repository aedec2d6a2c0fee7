import pytest

from fracspde import regimes
from fracspde.errors import DomainError
from fracspde.params import ModelParams


def test_worked_example():
    p = ModelParams(alpha=1.5, beta=0.9, gamma=0.4, H0=0.7, H=0.25)
    rep = regimes.regime_report(p)
    assert rep.exists
    assert rep.margin == pytest.approx(1.0, abs=1e-14)
    assert rep.theta == pytest.approx(-3 / 14, abs=1e-14)
    assert rep.lambda_exp == pytest.approx(20 / 7, abs=1e-13)
    assert rep.p_exp == pytest.approx(10 / 7, abs=1e-13)
    assert rep.t_exp == pytest.approx(11 / 7, abs=1e-13)


def test_boundary_is_strict():
    # heat at H0 + H = 3/4 exactly
    p = ModelParams(H0=0.5, H=0.25)
    ok, m = regimes.check_existence(p)
    assert m == 0.0 and not ok
    assert not regimes.regime_report(p).exists


def test_wave_branch():
    p = ModelParams(alpha=2.0, beta=2.0, H=0.3)
    assert regimes.existence_margin(p) == pytest.approx(2.0 - (3.0 - 1.2))
    rho, kappa, rc, kc, valid = regimes.holder_exponents(p)
    assert kappa == pytest.approx(0.3)
    assert not valid


def test_growth_exponents_need_existence():
    with pytest.raises(DomainError):
        regimes.growth_exponents(ModelParams(H0=0.5, H=0.1))


def test_heat_exponents():
    p = ModelParams(H0=0.5, H=0.4)
    th = regimes.theta(p)
    assert th == pytest.approx(p.H - 1.0)
    lam_e, p_e, t_e = regimes.growth_exponents(p)
    # 2 H0 theta + 1 = H for the heat case
    assert lam_e == pytest.approx(2 / p.H)
    assert p_e == pytest.approx(1 / p.H)
    assert t_e == pytest.approx(1.0)


def test_capped_holder():
    p = ModelParams(alpha=3.0, beta=0.5, gamma=1.0, H0=0.6, H=0.4)
    rep = regimes.regime_report(p)
    assert rep.rho_capped == min(rep.rho, 1.0)
    assert rep.kappa_capped == min(rep.kappa, 1.0)


def test_necessity_only_white():
    assert regimes.necessity_white_time(ModelParams(H=0.3))
    assert not regimes.necessity_white_time(ModelParams(H=0.2))
    with pytest.raises(DomainError):
        regimes.necessity_white_time(ModelParams(H0=0.7, H=0.2))


def test_white_space_reductions():
    assert regimes.margin_from(2.0, 1.0, 0.0, 0.5, 0.5) == pytest.approx(1.0)
    rho, kappa, _ = regimes.holder_from(2.0, 1.0, 0.0, 0.5, 0.5)
    assert rho == pytest.approx(0.25) and kappa == pytest.approx(0.5)
