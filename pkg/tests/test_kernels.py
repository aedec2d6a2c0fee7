import math

import numpy as np
import pytest

from fracspde import kernels
from fracspde.errors import DivergentIntegral, DomainError
from fracspde.params import ModelParams


def test_fourier_oracles():
    p = ModelParams(alpha=1.5, beta=0.7, H=0.3)
    assert kernels.fourier_Z(p, 0.5, 2.0) == pytest.approx(0.441572751815581709427062790722, rel=1e-12)
    p = ModelParams(alpha=1.2, beta=1.5, gamma=0.3, H=0.3)
    assert kernels.fourier_Y(p, 0.7, 1.4) == pytest.approx(0.692094187222369202351908125783, rel=1e-12)
    p = ModelParams(alpha=1.0, beta=1.5, H=0.3)
    assert kernels.fourier_Zstar(p, 1.0, 2.0) == pytest.approx(0.396629365318088084491612013362, rel=1e-12)


def test_fourier_vectorized():
    p = ModelParams(alpha=1.5, beta=0.7, H=0.3)
    xi = np.array([0.0, 0.5, 2.0, 9.0])
    v = kernels.fourier_Z(p, 0.5, xi)
    assert v.shape == xi.shape
    assert v[2] == pytest.approx(kernels.fourier_Z(p, 0.5, 2.0), rel=1e-12)
    assert v[0] == pytest.approx(1.0)


def test_heat_kernel_is_gaussian():
    p = ModelParams(H=0.3)
    xi = np.linspace(0.0, 5.0, 11)
    assert np.allclose(kernels.fourier_Y(p, 0.8, xi), np.exp(-0.4 * xi ** 2), rtol=1e-12)


def test_c_constant_oracle():
    p = ModelParams(alpha=1.5, beta=0.8, gamma=0.8, H=0.3)
    v = kernels.c_constant(p, 0.2, 0.8, 0.8).value
    assert v == pytest.approx(0.970211620414423330410264345119, rel=1e-10)


def test_time_increment_oracle():
    p = ModelParams(alpha=1.6, beta=1.5, gamma=0.2, H=0.3)
    v = kernels.time_increment_energy(p, 0.1, 0.5, 0.6, 0.4).value
    assert v == pytest.approx(0.112817173130497006774976312921, rel=1e-9)


def test_heat_increment_closed_form():
    # sqrt(pi) (1 - 2 sqrt(2/3) + sqrt(1/2)) for nu = 1, r = 0, s = 1, t = 2, a = 0
    v = kernels.time_increment_energy(ModelParams(H=0.3), 0.0, 1.0, 2.0, 0.0).value
    assert v == pytest.approx(math.sqrt(math.pi) * (1 - 2 * math.sqrt(2 / 3) + math.sqrt(0.5)), rel=1e-9)
    assert v == pytest.approx(0.13136297, rel=1e-7)


def test_heat_weighted_energy():
    # |xi|^a e^{-nu t xi^2} integrates to Gamma((a+1)/2) (nu t)^{-(a+1)/2}
    p = ModelParams(nu=2.0, H=0.3)
    for t, a in ((4.0, 0.0), (0.3, 0.6), (1.0, -0.7)):
        v = kernels.weighted_energy(p, t, a).value
        assert v == pytest.approx(math.gamma((a + 1) / 2) * (2.0 * t) ** (-(a + 1) / 2), rel=1e-9)
    assert kernels.weighted_energy(ModelParams(H=0.3), 4.0, 0.0).value == pytest.approx(0.886227, rel=1e-6)


def test_weighted_energy_divergence():
    p = ModelParams(alpha=1.0, beta=0.5, H=0.3)
    with pytest.raises(DivergentIntegral):
        kernels.weighted_energy(p, 1.0, kernels.energy_limit(p))
    with pytest.raises(DivergentIntegral):
        kernels.weighted_energy(p, 1.0, -1.0)


def test_cross_energy_symmetry():
    p = ModelParams(alpha=1.7, beta=1.3, gamma=0.1, H=0.35)
    a = 0.3
    v1 = kernels.cross_energy(p, 0.4, 1.1, a).value
    v2 = kernels.cross_energy(p, 1.1, 0.4, a).value
    assert v1 == v2
    w = kernels.weighted_energy(p, 0.7, a).value
    assert kernels.cross_energy(p, 0.7, 0.7, a).value == pytest.approx(w, rel=1e-10)


def test_increment_domain():
    p = ModelParams(H=0.3)
    with pytest.raises(DomainError):
        kernels.time_increment_energy(p, 0.5, 0.4, 1.0, 0.0)
    with pytest.raises(DomainError):
        kernels.time_increment_energy(p, 0.0, 0.4, 1.0, 0.5)
    assert kernels.time_increment_energy(p, 0.0, 1.0, 1.0, 0.0).value == 0.0


def test_j0():
    assert kernels.j0(ModelParams(beta=0.6, mu0=2.0, mu1=3.0, H=0.3), 5.0) == 2.0
    assert kernels.j0(ModelParams(beta=1.5, mu0=2.0, mu1=0.5, H=0.4), 2.0) == 3.0
