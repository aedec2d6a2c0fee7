"""Model coefficients of the fractional stochastic equation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .errors import DomainError


def spectral_constant(H: float) -> float:
    """c_H = Gamma(2H+1) sin(pi H) / (2 pi), density constant of the spatial noise."""
    return math.gamma(2.0 * H + 1.0) * math.sin(math.pi * H) / (2.0 * math.pi)


@dataclass(frozen=True)
class ModelParams:
    """Coefficients (alpha, beta, gamma, nu, lam, H0, H, mu0, mu1).

    ``lam`` is the noise intensity.  Zero is accepted so that the noiseless
    equation can be used as a reference case.
    """

    alpha: float = 2.0
    beta: float = 1.0
    gamma: float = 0.0
    nu: float = 1.0
    lam: float = 1.0
    H0: float = 0.5
    H: float = 0.3
    mu0: float = 1.0
    mu1: float = 0.0
    c_H: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for f in fields(self):
            if f.init:
                v = getattr(self, f.name)
                if not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise DomainError(f"{f.name} must be a finite number, got {v!r}")
                object.__setattr__(self, f.name, float(v))
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.beta <= 2:
            raise DomainError(f"beta must lie in (0, 2], got {self.beta}")
        if not self.gamma >= 0:
            raise DomainError(f"gamma must be nonnegative, got {self.gamma}")
        if not self.nu > 0:
            raise DomainError(f"nu must be positive, got {self.nu}")
        if not 0.5 <= self.H0 < 1:
            raise DomainError(f"H0 must lie in [1/2, 1), got {self.H0}")
        if not 0 < self.H < 0.5:
            raise DomainError(f"H must lie in (0, 1/2), got {self.H}")
        if not self.mu0 > 0:
            raise DomainError(f"mu0 must be positive, got {self.mu0}")
        if not self.mu1 >= 0:
            raise DomainError(f"mu1 must be nonnegative, got {self.mu1}")
        object.__setattr__(self, "c_H", spectral_constant(self.H))

    @property
    def is_wave(self) -> bool:
        """True exactly when beta == 2; treated as its own case, not a limit."""
        return self.beta == 2.0

    @property
    def ceil_beta(self) -> int:
        return 1 if self.beta <= 1.0 else 2

    @property
    def b_Y(self) -> float:
        """Second Mittag-Leffler parameter of the noise kernel, beta + gamma."""
        return self.beta + self.gamma

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.init}


PARAM_NAMES = tuple(f.name for f in fields(ModelParams) if f.init)
