"""Sphere integrals behind the star-graph second derivative.

For ``U(s1, s2) = exp(-beta/2 |s1 - s2|^2)`` and a unit vector ``e`` the star
decomposition needs

    P = int ( int d_e U ds2 )^2 ds1
    C = int U ds2                       (independent of s1)
    Q = int ( int d_e^2 U ds2 ) ds1

with ``d_e U = -beta (e.(s1 - s2)) U`` and
``d_e^2 U = (beta^2 (e.(s1 - s2))^2 - beta) U``.  Measures are the surface
(Lebesgue) measure; for N = 1 that is counting measure on ``{-1, +1}``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import UnsupportedN

DEFAULT_NODES = 128


def _gauss_legendre(nodes: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _n1(beta: float):
    q = math.exp(-2.0 * beta)
    P = 8.0 * beta**2 * q**2
    C = 1.0 + q
    Q = 2.0 * (-beta + (4.0 * beta**2 - beta) * q)
    return P, C, Q


def _n2(beta: float, nodes: int):
    ang, w = _gauss_legendre(nodes, 0.0, 2.0 * math.pi)
    a = ang[:, None]  # s1 angle, e = (1, 0)
    b = ang[None, :]  # s2 angle
    U = np.exp(-beta * (1.0 - np.cos(a - b)))
    de = np.cos(a) - np.cos(b)
    first = (-beta * de * U) @ w
    second = ((beta**2 * de**2 - beta) * U) @ w
    C = float((U @ w).mean())
    return float(w @ first**2), C, float(w @ second)


def _n3(beta: float, nodes: int):
    th, wt = _gauss_legendre(nodes, 0.0, math.pi)
    ph, wp = _gauss_legendre(nodes, 0.0, 2.0 * math.pi)
    # e is the z axis; s1 = (sin t1, 0, cos t1), s2 = (sin t2 cos p, sin t2 sin p, cos t2)
    st2, ct2 = np.sin(th)[:, None], np.cos(th)[:, None]
    cp = np.cos(ph)[None, :]
    area2 = (wt * np.sin(th))[:, None] * wp[None, :]
    first = np.empty(nodes)
    second = np.empty(nodes)
    Cs = np.empty(nodes)
    for k, t1 in enumerate(th):
        dot = math.sin(t1) * st2 * cp + math.cos(t1) * ct2
        U = np.exp(-beta * (1.0 - dot)) * area2
        de = math.cos(t1) - ct2
        first[k] = -beta * np.sum(de * U)
        second[k] = np.sum((beta**2 * de**2 - beta) * U)
        Cs[k] = U.sum()
    outer = 2.0 * math.pi * wt * np.sin(th)
    return float(outer @ first**2), float(Cs.mean()), float(outer @ second)


def star_integrals(beta: float, N: int, nodes: int = DEFAULT_NODES) -> tuple[float, float, float]:
    """Return ``(P, C, Q)``; exact sums for N = 1, Gauss-Legendre in polar angles for N = 2, 3."""
    if N == 1:
        return _n1(beta)
    if N == 2:
        return _n2(beta, nodes)
    if N == 3:
        return _n3(beta, nodes)
    raise UnsupportedN(f"star integrals are implemented for N in 1..3, got {N}")
