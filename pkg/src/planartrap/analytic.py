"""Closed-form electrostatics for the upper half plane.

Benchmarks for the grid solver: the Dirichlet problem above y = 0 with
piecewise-linear boundary data f(x) has the Poisson-kernel solution

    phi(x, y) = (1/pi) * Integral f(t) * y / ((x-t)^2 + y^2) dt,

which integrates in closed form per linear segment.  A strip at 1 V in a
grounded plane reduces to the familiar conformal-map result

    phi(x, y) = (1/pi) * [atan((x1-x)/y) - atan((x0-x)/y)].

These are half-plane results (side walls and lid at infinity); the grid
solver converges to them as the domain grows.
"""
from __future__ import annotations

import numpy as np


def segment_potential(x, y, t0: float, t1: float, v0: float, v1: float):
    """Potential of one boundary segment: f linear from v0 at t0 to v1 at t1."""
    phi, _, _ = _segment_terms(np.asarray(x, float), np.asarray(y, float), t0, t1, v0, v1)
    return phi


def segment_gradient(x, y, t0: float, t1: float, v0: float, v1: float):
    """(d phi/dx, d phi/dy) of one linear boundary segment."""
    _, gx, gy = _segment_terms(np.asarray(x, float), np.asarray(y, float), t0, t1, v0, v1)
    return gx, gy


def _segment_terms(x, y, t0, t1, v0, v1):
    if not t1 > t0:
        raise ValueError(f"segment needs t1 > t0, got [{t0}, {t1}]")
    s = (v1 - v0) / (t1 - t0)
    u0 = t0 - x
    u1 = t1 - x
    r0sq = u0 * u0 + y * y
    r1sq = u1 * u1 + y * y
    at = np.arctan2(u1, y) - np.arctan2(u0, y)
    lg = np.log(r1sq / r0sq)
    base = v0 + s * (x - t0)
    phi = (base * at + s * (y / 2) * lg) / np.pi
    gy = (base * (u0 / r0sq - u1 / r1sq) + s * (0.5 * lg + y * y / r1sq - y * y / r0sq)) / np.pi
    gx = (s * at + base * y * (1.0 / r0sq - 1.0 / r1sq) + s * y * (u0 / r0sq - u1 / r1sq)) / np.pi
    return phi, gx, gy


def piecewise_potential(knots, x, y):
    """Half-plane potential for boundary data interpolating ``knots``.

    knots: sequence of (t, value); data is 0 outside the knot span.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    phi = np.zeros(np.broadcast(x, y).shape)
    for (t0, v0), (t1, v1) in zip(knots[:-1], knots[1:]):
        if t1 <= t0 or (v0 == 0.0 and v1 == 0.0):
            continue
        phi = phi + _segment_terms(x, y, t0, t1, v0, v1)[0]
    return phi


def piecewise_gradient(knots, x, y):
    """(d phi/dx, d phi/dy) for the piecewise-linear boundary data ``knots``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    gx = np.zeros(np.broadcast(x, y).shape)
    gy = np.zeros_like(gx)
    for (t0, v0), (t1, v1) in zip(knots[:-1], knots[1:]):
        if t1 <= t0 or (v0 == 0.0 and v1 == 0.0):
            continue
        _, dgx, dgy = _segment_terms(x, y, t0, t1, v0, v1)
        gx = gx + dgx
        gy = gy + dgy
    return gx, gy


def strip_potential(x, y, half_width: float):
    """Strip [-w/2, w/2] at 1 V in a grounded plane (sharp edges)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return (np.arctan2(half_width - x, y) + np.arctan2(half_width + x, y)) / np.pi


def strip_gradient(x, y, half_width: float):
    """Gradient of ``strip_potential``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    up = half_width - x
    um = half_width + x
    rp = up * up + y * y
    rm = um * um + y * y
    gx = (y / rm - y / rp) / np.pi
    gy = (-up / rp - um / rm) / np.pi
    return gx, gy


def gapped_rf_knots(w_c: float, w_r: float, g: float, g_prime: float):
    """Boundary knots of the gapped-plane closure with the RF pair at 1 V.

    Center and outer strips grounded; the potential ramps linearly across
    the gaps.  Matches the grid solver's bottom boundary in the limit of an
    infinitely wide domain.
    """
    c1 = w_c / 2
    a = c1 + g
    b = a + w_r
    c2 = b + g_prime
    return [(-c2, 0.0), (-b, 1.0), (-a, 1.0), (-c1, 0.0),
            (c1, 0.0), (a, 1.0), (b, 1.0), (c2, 0.0)]
