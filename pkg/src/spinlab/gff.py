"""Rooted Gaussian free field and its comparison with low-temperature spin samples."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.stats

from . import mc
from .errors import InvalidParameter, SolverFailure, WrongN
from .graphs import Graph, greens_function
from .rng import make_rng


@dataclass(frozen=True)
class GaussianField:
    graph: Graph
    root: int
    components: int
    covariance: np.ndarray  # n x n, zero row/column at the root
    samples: np.ndarray | None = None  # (count, n, components)


def gff_covariance(g: Graph, root: int = 1) -> np.ndarray:
    """Inverse of the root-deleted Laplacian, embedded as an ``n x n`` matrix with
    zero row and column at ``root`` (the pinned value)."""
    r = g._index(root)
    keep = np.delete(np.arange(g.n), r)
    Lr = g.laplacian[np.ix_(keep, keep)]
    try:
        cho = scipy.linalg.cho_factor(Lr)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure("pinned Laplacian is not positive definite") from exc
    inv = scipy.linalg.cho_solve(cho, np.eye(len(keep)))
    cov = np.zeros((g.n, g.n))
    cov[np.ix_(keep, keep)] = 0.5 * (inv + inv.T)
    return cov


def gff_sample(g: Graph, components: int, root: int = 1, count: int = 1000,
               seed: int = 0) -> GaussianField:
    """I.i.d. rooted fields via Cholesky of the pinned covariance."""
    if components < 1:
        raise InvalidParameter("components must be >= 1")
    cov = gff_covariance(g, root)
    r = g._index(root)
    keep = np.delete(np.arange(g.n), r)
    chol = np.linalg.cholesky(cov[np.ix_(keep, keep)])
    rng = make_rng(seed, 0x6FF)
    z = rng.standard_normal((count, components, len(keep)))
    out = np.zeros((count, g.n, components))
    out[:, keep, :] = np.einsum("ij,tcj->tic", chol, z)
    return GaussianField(g, int(root), components, cov, out)


def moment_target(g: Graph, N: int, x: int, y: int, root: int = 1) -> float:
    """``(N-1) E(gamma_x^1 - gamma_y^1)^2`` written through Green's functions sunk at ``root``.

    For ``x`` or ``y`` equal to ``root`` the corresponding terms vanish.
    """
    def ren(a):
        if a == root:
            return 0.0
        return greens_function(g, a, root).at_source / g.degree(a)

    if x == y:
        return 0.0
    cross = 0.0
    if root not in (x, y):
        cross = greens_function(g, x, root)[y] / g.degree(x)
    return (N - 1) * (ren(x) + ren(y) - 2.0 * cross)


@dataclass
class ConvergenceRow:
    beta: float
    moment_estimate: float
    moment_stderr: float
    moment_target: float
    ks_stat: float
    acceptance: float = float("nan")
    fourth_spin: float = float("nan")
    fourth_field: float = float("nan")

    @property
    def gap(self) -> float:
        return abs(self.moment_estimate - self.moment_target)


def default_gff_config(beta: float, seed: int, samples: int = 10_000, thin: int = 100) -> mc.ChainConfig:
    burn = 20 * thin + 2000
    return mc.ChainConfig(sweeps=burn + samples * thin, burn_in=burn, thin=thin,
                          root_pinned=True, seed=seed)


def wcon_report(g: Graph, N: int, betas, x: int, y: int, cfg: mc.ChainConfig | None = None,
                seed: int = 0, root: int = 1, fourth_moment: bool = False) -> list[ConvergenceRow]:
    """Rescaled distance and KS distance to the free field along a beta schedule.

    Each beta uses a root-pinned chain on its own stream ``(seed, index)``.  The KS
    statistic compares ``sqrt(beta) sigma^1`` at whichever of ``x, y`` is not the root
    with the first field component there.
    """
    if N < 2:
        raise WrongN("free-field comparison needs N >= 2")
    betas = [float(b) for b in betas]
    if any(b <= 0 for b in betas) or any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise InvalidParameter("beta schedule must be positive and increasing")
    target = moment_target(g, N, x, y, root)
    # the spin compared in law with the field; the root itself is pinned
    xi = g._index(y if x == root else x)
    rows = []
    for k, beta in enumerate(betas):
        c = cfg if cfg is not None else default_gff_config(beta, seed)
        c = replace(c, root_pinned=True, root=root, seed=(c.seed * 1_000_003 + k) % (1 << 63))
        chain = mc.run_chain(g, N, beta, c)
        est = mc.estimate_rescaled_distance(chain, beta, x, y)
        spins = math.sqrt(beta) * chain.samples[:, xi, 0]
        field = gff_sample(g, N - 1, root, count=len(chain), seed=c.seed)
        ks = scipy.stats.ks_2samp(spins, field.samples[:, xi, 0]).statistic
        rows.append(ConvergenceRow(beta, est.mean, est.stderr, target, float(ks), chain.acceptance))
        if fourth_moment:
            rows[-1].fourth_spin = float(np.mean(spins**4))
            rows[-1].fourth_field = float(np.mean(field.samples[:, xi, 0] ** 4))
    return rows


CSV_FIELDS = ["beta", "moment_estimate", "moment_stderr", "moment_target", "ks_stat"]


def rows_to_csv(rows: list[ConvergenceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow([repr(float(getattr(r, f))) for f in CSV_FIELDS])
    return buf.getvalue()


def gaps_shrink(rows: list[ConvergenceRow], slack: float = 4.0) -> bool:
    """Gap never grows by more than ``slack`` combined standard errors along the schedule."""
    for a, b in zip(rows, rows[1:]):
        if b.gap > a.gap + slack * math.hypot(a.moment_stderr, b.moment_stderr):
            return False
    return True
