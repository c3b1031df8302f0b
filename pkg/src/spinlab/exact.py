"""Exact Ising (N = 1) computations by enumeration, and closed forms for trees,
parallel paths, stars and perfect binary trees.

Enumeration walks all ``2**n`` configurations in vectorised blocks and
accumulates weights in the log domain, so large ``beta`` does not underflow.
"""

from __future__ import annotations

import math

import numpy as np

from . import sphere
from .errors import InvalidDepth, InvalidParameter, TooLarge, WrongN
from .graphs import Graph

MAX_ENUM_VERTICES = 24
HALF = "half"  # site measure (delta_{-1} + delta_{+1}) / 2
UNIT = "unit"  # site measure delta_{-1} + delta_{+1}
_BLOCK = 1 << 15


def _check(g: Graph, N: int = 1) -> None:
    if N != 1:
        raise WrongN("exact enumeration is only available for N = 1")
    if g.n > MAX_ENUM_VERTICES:
        raise TooLarge(f"enumeration limited to {MAX_ENUM_VERTICES} vertices, graph has {g.n}")


def _site_log_weight(n: int, convention: str) -> float:
    if convention == UNIT:
        return 0.0
    if convention == HALF:
        return -n * math.log(2.0)
    raise InvalidParameter(f"unknown measure convention {convention!r}")


def _shift(g: Graph, h) -> np.ndarray:
    if h is None:
        return np.zeros(g.n)
    h = np.asarray(h, dtype=float).reshape(-1)
    if h.shape[0] != g.n or not np.all(np.isfinite(h)):
        raise InvalidParameter("shift field must hold one finite value per vertex")
    return h


def iter_configurations(n: int, block: int = _BLOCK):
    """Yield ``(B, n)`` float arrays of +/-1 spins covering ``{-1, 1}**n``.

    Configuration ``c`` sets vertex ``k`` to ``-1`` when bit ``k`` of ``c`` is set.
    """
    bits = np.arange(n, dtype=np.int64)
    total = 1 << n
    for start in range(0, total, block):
        idx = np.arange(start, min(start + block, total), dtype=np.int64)
        yield 1.0 - 2.0 * ((idx[:, None] >> bits) & 1)


def _enumerate(g: Graph, beta: float, h, convention: str, reducer):
    """Return ``(log Z, sum_sigma w(sigma) f(sigma) / Z)`` for a block reducer.

    ``reducer(spins, w)`` must return the weighted sum of its statistic over
    the block; weights ``w`` are rescaled by a running log-shift.
    """
    _check(g)
    if beta < 0:
        raise InvalidParameter("beta must be >= 0")
    h = _shift(g, h)
    a, b = g.edge_array[:, 0], g.edge_array[:, 1]
    shift = -np.inf
    z = 0.0
    acc = None
    for spins in iter_configurations(g.n):
        x = spins + h
        diff = x[:, a] - x[:, b]
        logw = -0.5 * beta * np.einsum("ij,ij->i", diff, diff)
        top = logw.max()
        if top > shift:
            scale = math.exp(shift - top) if np.isfinite(shift) else 0.0
            z *= scale
            if acc is not None:
                acc = acc * scale
            shift = top
        w = np.exp(logw - shift)
        z += w.sum()
        part = reducer(spins, w)
        acc = part if acc is None else acc + part
    log_z = shift + math.log(z) + _site_log_weight(g.n, convention)
    return log_z, acc / z


def exact_log_partition(g: Graph, beta: float, h=None, convention: str = UNIT) -> float:
    log_z, _ = _enumerate(g, beta, h, convention, lambda s, w: 0.0)
    return log_z


def exact_partition(g: Graph, beta: float, h=None, convention: str = UNIT) -> float:
    """Modified partition function ``Z*(h)`` of the Ising model on ``g``."""
    return math.exp(exact_log_partition(g, beta, h, convention))


def exact_correlation_matrix(g: Graph, beta: float, convention: str = UNIT) -> np.ndarray:
    """All two-point functions ``E[sigma_x sigma_y]`` as an ``n x n`` matrix."""
    _, m = _enumerate(g, beta, None, convention, lambda s, w: (s * w[:, None]).T @ s)
    return 0.5 * (m + m.T)


def exact_correlation(g: Graph, beta: float, x: int, y: int, convention: str = UNIT) -> float:
    if int(x) == int(y):
        g._index(x)
        return 1.0
    xi, yi = g._index(x), g._index(y)
    _, m = _enumerate(g, beta, None, convention, lambda s, w: w @ (s[:, xi] * s[:, yi]))
    return float(m)


def exact_k_matrix(g: Graph, beta: float) -> np.ndarray:
    """``K[x, y] = beta * E[(L sigma)_x (L sigma)_y]`` by enumeration."""
    L = g.laplacian

    def reducer(s, w):
        d = s @ L
        return (d * w[:, None]).T @ d

    _, m = _enumerate(g, beta, None, UNIT, reducer)
    return beta * 0.5 * (m + m.T)


def directional_second_derivative(g: Graph, beta: float, v, convention: str = UNIT) -> float:
    """``d^2/d eta^2 Z*(eta v)`` at ``eta = 0`` for a real direction ``v``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != g.n:
        raise InvalidParameter("direction must hold one value per vertex")
    Lv = g.laplacian @ v
    log_z, mean_sq = _enumerate(g, beta, None, convention, lambda s, w: w @ (s @ Lv) ** 2)
    form = beta * mean_sq - float(v @ Lv)
    return beta * math.exp(log_z) * form


# -- closed forms -------------------------------------------------------------


def edge_ratio(beta: float) -> float:
    """``(1 - exp(-2 beta)) / (1 + exp(-2 beta))``, i.e. ``tanh(beta)``."""
    return math.tanh(beta)


def tree_correlation_closed_form(beta: float, dist: int) -> float:
    if beta < 0 or dist < 0:
        raise InvalidParameter("beta and dist must be nonnegative")
    return edge_ratio(beta) ** int(dist)


def parallel_paths_correlation_closed_form(beta: float, l: int, d: int) -> float:
    """``E sigma_1 sigma_{ld+2}`` on ``parallel_paths(l, d)``."""
    if l < 1 or d < 1 or beta < 0:
        raise InvalidParameter("need l, d >= 1 and beta >= 0")
    a = edge_ratio(beta) ** (l + 1)
    if a >= 1.0:
        return 1.0
    # ((1+a)^d - (1-a)^d) / ((1+a)^d + (1-a)^d) without overflow
    return math.tanh(d * math.atanh(a))


def _leaf_bond(beta: float) -> tuple[float, float, float]:
    """``U(0), U'(0), U''(0)`` for ``U(eta) = exp(-beta eta^2/2) + exp(-beta (2-eta)^2/2)``."""
    q = math.exp(-2.0 * beta)
    return 1.0 + q, 2.0 * beta * q, -beta + (4.0 * beta**2 - beta) * q


def binary_tree_hessian_closed_form(beta: float, k: int) -> float:
    """Second derivative of ``Z*`` on ``perfect_binary_tree(k)`` along the leaf indicator,
    divided by ``2 Z*_{G'}(0) U(0)^(2(2^(k-2)-1))`` where ``G'`` is the tree minus its leaves.

    Positive means the leaf direction increases ``Z*`` (domination fails).
    """
    if k < 3:
        raise InvalidDepth("closed form needs depth k >= 3")
    if beta < 0:
        raise InvalidParameter("beta must be >= 0")
    u0, u1, u2 = _leaf_bond(beta)
    r2 = 2.0 * edge_ratio(beta) ** 2
    parents = 2 ** (k - 2)
    geometric = sum(r2**l for l in range(1, k - 1))
    # sum over unordered parent pairs of E sigma_i sigma_j is (parents/4) * geometric
    return parents * (u0 * u2 + u1**2) + parents * u1**2 * geometric


def binary_tree_threshold() -> float:
    """Smallest beta with ``2 tanh(beta)^2 > 1`` (the leaf sum diverges with depth)."""
    from scipy.optimize import brentq

    return brentq(lambda b: 2.0 * math.tanh(b) ** 2 - 1.0, 1e-3, 10.0, xtol=1e-15)


def star_hessian(beta: float, N: int, n0: int, nodes: int = sphere.DEFAULT_NODES) -> float:
    """``(n0-1) P + C Q`` from the star decomposition; positive means the centre
    direction increases ``Z*`` on ``star(n0)``."""
    if n0 < 2:
        raise InvalidParameter("star needs n0 >= 2")
    P, C, Q = sphere.star_integrals(beta, N, nodes)
    return (n0 - 1) * P + C * Q


def minimal_star_size(beta: float, N: int, nodes: int = sphere.DEFAULT_NODES) -> int:
    """Smallest ``n0 >= 2`` with ``star_hessian(beta, N, n0) > 0``."""
    if beta <= 0:
        raise InvalidParameter("beta must be positive")
    P, C, Q = sphere.star_integrals(beta, N, nodes)
    if P <= 0:
        raise InvalidParameter("degenerate star integrals")

    def value(n0):
        return (n0 - 1) * P + C * Q

    n0 = max(2, math.floor(-C * Q / P) + 2)
    while value(n0) <= 0:
        n0 += 1
    while n0 > 2 and value(n0 - 1) > 0:
        n0 -= 1
    return n0


__all__ = [
    "HALF",
    "UNIT",
    "MAX_ENUM_VERTICES",
    "binary_tree_hessian_closed_form",
    "binary_tree_threshold",
    "directional_second_derivative",
    "exact_correlation",
    "exact_correlation_matrix",
    "exact_k_matrix",
    "exact_log_partition",
    "exact_partition",
    "iter_configurations",
    "minimal_star_size",
    "parallel_paths_correlation_closed_form",
    "star_hessian",
    "tree_correlation_closed_form",
]
