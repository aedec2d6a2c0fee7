"""Adaptive piecewise Chebyshev interpolation of smooth 1-D functions."""
from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev


class PiecewiseChebyshev:
    """Interpolant of ``fun`` on [lo, hi] built by recursive bisection.

    ``fun`` takes a 1-D array of points and returns values.  A piece is
    accepted once its trailing Chebyshev coefficients fall below
    ``rtol`` times the largest coefficient magnitude seen on any piece,
    or once it is narrower than ``min_width``.
    """

    def __init__(self, fun, lo: float, hi: float, deg: int = 20, rtol: float = 1e-11,
                 min_width: float | None = None, max_pieces: int = 4000):
        self.deg = deg
        if min_width is None:
            min_width = 1e-8 * (hi - lo)
        x = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
        pieces = []
        stack = [(lo, hi)]
        scale = 0.0
        while stack:
            a, b = stack.pop()
            vals = np.asarray(fun(0.5 * (a + b) + 0.5 * (b - a) * x), dtype=float)
            c = chebyshev.chebfit(x, vals, deg)
            scale = max(scale, float(np.max(np.abs(vals))))
            tail = float(np.max(np.abs(c[-3:])))
            if tail <= rtol * scale or b - a < min_width or len(pieces) + len(stack) >= max_pieces:
                pieces.append((a, b, c))
            else:
                m = 0.5 * (a + b)
                stack.append((m, b))
                stack.append((a, m))
        pieces.sort(key=lambda p: p[0])
        self.edges = np.array([p[0] for p in pieces] + [pieces[-1][1]])
        self.coef = np.array([p[2] for p in pieces])
        self.lo, self.hi = lo, hi

    @property
    def n_pieces(self) -> int:
        return len(self.coef)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.coef) - 1)
        a = self.edges[idx]
        b = self.edges[idx + 1]
        u = (2.0 * x - a - b) / (b - a)
        b1 = np.zeros_like(x)
        b2 = np.zeros_like(x)
        for j in range(self.deg, 0, -1):
            b1, b2 = 2.0 * u * b1 - b2 + self.coef[idx, j], b1
        return u * b1 - b2 + self.coef[idx, 0]
