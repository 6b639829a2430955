"""Gauss rules on the reference triangle, intervals and time grids."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

# Dunavant rules: barycentric points, weights summing to 1 (scale by area).
_A4, _B4 = 0.44594849091596488632, 0.09157621350977074346
_W4a, _W4b = 0.22338158967801146570, 0.10995174365532186764
_A5, _B5 = 0.47014206410511508977, 0.10128650732345633880
_W5a, _W5b = 0.13239415278850618074, 0.12593918054482715260

_TRI_RULES = {
    1: ([(1 / 3, 1 / 3, 1 / 3)], [1.0]),
    2: ([(2 / 3, 1 / 6, 1 / 6), (1 / 6, 2 / 3, 1 / 6), (1 / 6, 1 / 6, 2 / 3)], [1 / 3] * 3),
    3: ([(1 / 3, 1 / 3, 1 / 3), (0.6, 0.2, 0.2), (0.2, 0.6, 0.2), (0.2, 0.2, 0.6)],
        [-27 / 48, 25 / 48, 25 / 48, 25 / 48]),
    4: ([(1 - 2 * _A4, _A4, _A4), (_A4, 1 - 2 * _A4, _A4), (_A4, _A4, 1 - 2 * _A4),
         (1 - 2 * _B4, _B4, _B4), (_B4, 1 - 2 * _B4, _B4), (_B4, _B4, 1 - 2 * _B4)],
        [_W4a] * 3 + [_W4b] * 3),
    5: ([(1 / 3, 1 / 3, 1 / 3),
         (1 - 2 * _A5, _A5, _A5), (_A5, 1 - 2 * _A5, _A5), (_A5, _A5, 1 - 2 * _A5),
         (1 - 2 * _B5, _B5, _B5), (_B5, 1 - 2 * _B5, _B5), (_B5, _B5, 1 - 2 * _B5)],
        [0.225] + [_W5a] * 3 + [_W5b] * 3),
}


def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points (q, 3) and weights (q,) exact for polynomials of ``degree``."""
    if degree not in _TRI_RULES:
        raise ValueError(f"triangle rules exist for degrees 1-5, got {degree}")
    pts, wts = _TRI_RULES[degree]
    return np.array(pts), np.array(wts)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss rule mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def interval_rule(a: float, b: float, n: int, panels: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Composite n-point Gauss rule on [a, b] with equal panels."""
    x, w = gauss_legendre(n)
    edges = np.linspace(a, b, panels + 1)
    lo, width = edges[:-1, None], np.diff(edges)[:, None]
    return (lo + width * x).ravel(), (width * w).ravel()


def time_rule(nodes: np.ndarray, n: int = 4, first_panels: int = 1):
    """Gauss points over every interval of a time grid.

    Returns (points, weights, interval) with interval[k] = n for points in
    (t^{n-1}, t^n); the first interval may use ``first_panels`` sub-panels.
    """
    pts, wts, idx = [], [], []
    for k in range(1, len(nodes)):
        t, w = interval_rule(nodes[k - 1], nodes[k], n, first_panels if k == 1 else 1)
        pts.append(t)
        wts.append(w)
        idx.append(np.full(len(t), k))
    return np.concatenate(pts), np.concatenate(wts), np.concatenate(idx)
