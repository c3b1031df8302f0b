"""Markov chain Monte Carlo for the spin O(N) model on a finite graph.

Single-site updates in random order each sweep: heat bath for N = 1,
Metropolis with a Gaussian-perturb-and-renormalise proposal for N >= 2.
All randomness is drawn from a Philox stream keyed by ``(seed, replica)`` in
Python and handed to a compiled kernel, so a chain is bit-reproducible.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numba
import numpy as np

from . import stats
from .errors import InvalidParameter
from .graphs import Graph
from .rng import make_rng
from .stats import Estimate

TARGET_ACCEPTANCE = 0.5
_RANDOMS_PER_BLOCK = 1 << 21


@dataclass(frozen=True)
class ChainConfig:
    """Run parameters. ``sweeps`` counts burn-in; ``proposal_width=None`` means
    ``1/sqrt(1 + beta)``. Tuning (if enabled) happens during burn-in only."""

    sweeps: int = 20_000
    burn_in: int = 2_000
    thin: int = 1
    proposal_width: float | None = None
    root_pinned: bool = False
    seed: int = 0
    root: int = 1
    tune: bool = True

    def __post_init__(self):
        if self.sweeps < 1 or self.burn_in < 0 or self.burn_in >= self.sweeps:
            raise InvalidParameter("need 0 <= burn_in < sweeps")
        if self.thin < 1:
            raise InvalidParameter("thin must be >= 1")
        if self.proposal_width is not None and self.proposal_width <= 0:
            raise InvalidParameter("proposal_width must be positive")
        if self.seed is None:
            raise InvalidParameter("a seed is required")

    def width(self, beta: float) -> float:
        if self.proposal_width is not None:
            return self.proposal_width
        return 1.0 / math.sqrt(1.0 + beta)


@dataclass
class Chain:
    """Recorded post-burn-in states of one replica, shape ``(T, n, N)``."""

    graph: Graph
    N: int
    beta: float
    config: ChainConfig
    samples: np.ndarray
    acceptance: float
    width: float
    replica: int = 0

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.samples)

    def __len__(self) -> int:
        return self.samples.shape[0]


@dataclass
class KMatrixEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    batch_means: np.ndarray = field(repr=False)
    n_samples: int = 0


def uniform_sphere_point(N: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform point(s) on the unit sphere in R^N (N = 1 gives +/-1)."""
    if N < 1:
        raise InvalidParameter("N must be >= 1")
    shape = (N,) if size is None else (size, N)
    if N == 1:
        return rng.choice(np.array([-1.0, 1.0]), size=shape)
    x = rng.standard_normal(shape)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


@numba.njit(cache=True, nogil=True)
def _sweeps(state, indptr, indices, beta, width, order, noise, unif, pinned, thin,
            done, out, out_pos):  # pragma: no cover - compiled
    n, N = state.shape
    field_ = np.empty(N)
    prop = np.empty(N)
    accepted = 0
    attempts = 0
    for s in range(order.shape[0]):
        for k in range(n):
            i = order[s, k]
            if i == pinned:
                continue
            for c in range(N):
                field_[c] = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                for c in range(N):
                    field_[c] += state[j, c]
            attempts += 1
            if N == 1:
                x = 2.0 * beta * field_[0]
                if x >= 0.0:
                    up = 1.0 / (1.0 + math.exp(-x))
                else:
                    ex = math.exp(x)
                    up = ex / (1.0 + ex)
                state[i, 0] = 1.0 if unif[s, k] < up else -1.0
                accepted += 1
                continue
            norm = 0.0
            for c in range(N):
                prop[c] = state[i, c] + width * noise[s, k, c]
                norm += prop[c] * prop[c]
            norm = math.sqrt(norm)
            if norm == 0.0:
                continue
            dE = 0.0
            for c in range(N):
                prop[c] /= norm
                dE += (prop[c] - state[i, c]) * field_[c]
            dE *= beta
            if dE >= 0.0 or unif[s, k] < math.exp(dE):
                for c in range(N):
                    state[i, c] = prop[c]
                accepted += 1
        done += 1
        if out_pos >= 0 and done % thin == 0 and out_pos < out.shape[0]:
            out[out_pos, :, :] = state
            out_pos += 1
    return accepted, attempts, done, out_pos


class _Stepper:
    def __init__(self, g: Graph, N: int, beta: float, pinned: int, rng: np.random.Generator):
        self.indptr, self.indices = g.csr
        self.n, self.N, self.beta = g.n, N, float(beta)
        self.pinned = pinned
        self.rng = rng
        self.block = max(1, _RANDOMS_PER_BLOCK // (g.n * max(N, 1) + g.n))
        self.base = np.arange(g.n, dtype=np.int64)

    def run(self, state, sweeps, width, thin=1, out=None, out_pos=-1, done=0):
        acc = att = 0
        if out is None:
            out = np.empty((0, self.n, self.N))
        left = sweeps
        while left > 0:
            B = min(self.block, left)
            order = self.rng.permuted(np.broadcast_to(self.base, (B, self.n)), axis=1)
            if self.N == 1:
                noise = np.empty((0, 0, 0))
            else:
                noise = self.rng.standard_normal((B, self.n, self.N))
            unif = self.rng.random((B, self.n))
            a, t, done, out_pos = _sweeps(state, self.indptr, self.indices, self.beta, width,
                                          order, noise, unif, self.pinned, thin, done, out, out_pos)
            acc += a
            att += t
            left -= B
        return acc, att, done, out_pos


def initial_state(n: int, N: int) -> np.ndarray:
    """Ordered start: every spin at the north pole ``e_N``."""
    state = np.zeros((n, N))
    state[:, N - 1] = 1.0
    return state


def run_chain(g: Graph, N: int, beta: float, cfg: ChainConfig, replica: int = 0) -> Chain:
    """Sample ``mu_{G,N,beta}`` (or the rooted measure if ``cfg.root_pinned``)."""
    if N < 1:
        raise InvalidParameter("N must be >= 1")
    if beta < 0:
        raise InvalidParameter("beta must be >= 0")
    rng = make_rng(cfg.seed, replica)
    pinned = g._index(cfg.root) if cfg.root_pinned else -1
    stepper = _Stepper(g, N, beta, pinned, rng)
    state = initial_state(g.n, N)
    width = cfg.width(beta)

    left = cfg.burn_in
    chunk = 200
    while left > 0:
        step = min(chunk, left)
        acc, att, _, _ = stepper.run(state, step, width)
        left -= step
        if cfg.tune and N > 1 and att:
            rate = acc / att
            width = float(np.clip(width * math.exp(rate - TARGET_ACCEPTANCE), 1e-4, 4.0))

    measured = cfg.sweeps - cfg.burn_in
    out = np.empty((measured // cfg.thin, g.n, N))
    acc, att, _, filled = stepper.run(state, measured, width, thin=cfg.thin, out=out, out_pos=0)
    assert filled == out.shape[0]
    return Chain(g, N, float(beta), cfg, out, acc / att if att else 1.0, width, replica)


def run_replicas(g: Graph, N: int, beta: float, cfg: ChainConfig, replicas: int = 1,
                 threads: int = 1) -> list[Chain]:
    """Independent replicas on disjoint streams; output order is by replica index."""
    if replicas < 1:
        raise InvalidParameter("replicas must be >= 1")
    if threads <= 1 or replicas == 1:
        return [run_chain(g, N, beta, cfg, r) for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: run_chain(g, N, beta, cfg, r), range(replicas)))


# -- estimators --------------------------------------------------------------


def _chains(chain) -> Sequence[Chain]:
    chains = [chain] if isinstance(chain, Chain) else list(chain)
    if not chains or any(len(c) == 0 for c in chains):
        raise stats.InsufficientSamples("empty chain")
    return chains


def _pooled(chains: Sequence[Chain], series_fn, batches: int) -> Estimate:
    sets = [stats.batch_means(series_fn(c), batches) for c in chains]
    return stats.pooled(sets, sum(len(c) for c in chains))


def correlation_series(chain: Chain, x: int, y: int) -> np.ndarray:
    g = chain.graph
    xi, yi = g._index(x), g._index(y)
    return np.einsum("tc,tc->t", chain.samples[:, xi], chain.samples[:, yi])


def estimate_correlation(chain, x: int, y: int, batches: int = stats.DEFAULT_BATCHES) -> Estimate:
    """Batch-means estimate of ``E sigma_x . sigma_y``."""
    chains = _chains(chain)
    if int(x) == int(y):
        chains[0].graph._index(x)
        return Estimate(1.0, 0.0, sum(len(c) for c in chains))
    return _pooled(chains, lambda c: correlation_series(c, x, y), batches)


def estimate_rescaled_distance(chain, beta: float, x: int, y: int,
                               batches: int = stats.DEFAULT_BATCHES) -> Estimate:
    """Estimate of ``beta * E |sigma_x - sigma_y|^2 = 2 beta (1 - E sigma_x . sigma_y)``."""
    chains = _chains(chain)
    return _pooled(chains, lambda c: 2.0 * beta * (1.0 - correlation_series(c, x, y)), batches)


def estimate_k_matrix(chain, beta: float, batches: int = stats.DEFAULT_BATCHES) -> KMatrixEstimate:
    """``K[x, y] = beta E[D_x^1 D_y^1]`` with ``D = L sigma``.

    Uses the rotation-invariant form ``(beta/N) E[D_x . D_y]``, which has the
    same mean as the single-component expression and does not depend on the
    slowly-mixing global orientation (and stays valid for root-pinned chains).
    """
    chains = _chains(chain)
    g = chains[0].graph
    L = g.laplacian
    sets = []
    for c in chains:
        T = len(c)
        if T < stats.MIN_BATCHES:
            raise stats.InsufficientSamples(f"need at least {stats.MIN_BATCHES} samples")
        B = min(batches, T)
        size = T // B
        bm = np.empty((B, g.n, g.n))
        for b in range(B):
            D = np.einsum("xy,tyc->txc", L, c.samples[b * size:(b + 1) * size])
            bm[b] = np.einsum("txc,tyc->xy", D, D) / size
        sets.append(bm * (beta / c.N))
    allb = np.concatenate(sets)
    allb = 0.5 * (allb + allb.transpose(0, 2, 1))
    mean = allb.mean(axis=0)
    se = allb.std(axis=0, ddof=1) / math.sqrt(allb.shape[0])
    return KMatrixEstimate(mean, se, allb, sum(len(c) for c in chains))


# -- persistence ---------------------------------------------------------------

_MAGIC = b"SPINLAB1"
_HEADER = struct.Struct("<8sQQQ")  # magic, n, N, count: 32 bytes


def save_samples(chain: Chain, path: str | Path) -> None:
    """Little-endian float64 samples behind a 32-byte header."""
    T, n, N = chain.samples.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, n, N, T))
        fh.write(np.ascontiguousarray(chain.samples, dtype="<f8").tobytes())


def load_samples(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, n, N, T = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise InvalidParameter(f"{path}: not a spinlab sample file")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != n * N * T:
        raise InvalidParameter(f"{path}: truncated sample file")
    return data.reshape(T, n, N).astype(float)


def with_seed(cfg: ChainConfig, seed: int) -> ChainConfig:
    return replace(cfg, seed=seed)
