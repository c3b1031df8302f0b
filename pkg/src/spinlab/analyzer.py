"""Second-order test of Gaussian domination and the correlation bound it implies.

Per spin component and for a real direction ``v`` on the vertices,

    Z_v''(0) / (beta Z*(0)) = v.K v - v.L v,   K[x, y] = beta E[(L s)_x (L s)_y],

so domination along every direction means ``M = K - L`` is negative
semidefinite on the complement of the constant vector (constants are always
in the kernel by translation invariance).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import exact, mc
from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    MissingVerdict,
    NonpositiveBeta,
    SameVertex,
)
from .graphs import Graph, renormalized_green

DOMINATED = "Dominated"
VIOLATED = "Violated"
INCONCLUSIVE = "Inconclusive"

EXACT_TOL = 1e-9
MC_Z = 4.0
MC_INFLATION = 2.0
DENSE_LIMIT = 500
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class HessianForm:
    beta: float
    K: np.ndarray
    L: np.ndarray
    M: np.ndarray
    K_stderr: np.ndarray | None = None
    K_batches: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def quadratic(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(v @ self.M @ v)


@dataclass
class GDReport:
    verdict: str
    lambda_max: float
    lambda_ci: float
    worst_direction: np.ndarray
    method: str
    beta: float
    N: int = 1
    graph_spec: str = ""
    seed: int | None = None

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "verdict": self.verdict,
            "lambda_max": float(self.lambda_max),
            "lambda_ci": float(self.lambda_ci),
            "method": self.method,
            "worst_direction": [float(x) for x in self.worst_direction],
            "beta": float(self.beta),
            "N": int(self.N),
            "graph_spec": self.graph_spec,
            "seed": self.seed,
        }


GD_REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "verdict", "lambda_max", "lambda_ci", "method",
                 "worst_direction", "beta", "graph_spec", "seed"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "verdict": {"enum": [DOMINATED, VIOLATED, INCONCLUSIVE]},
        "lambda_max": {"type": "number"},
        "lambda_ci": {"type": "number", "minimum": 0},
        "method": {"enum": ["exact", "monte_carlo"]},
        "worst_direction": {"type": "array", "items": {"type": "number"}},
        "beta": {"type": "number", "minimum": 0},
        "N": {"type": "integer", "minimum": 1},
        "graph_spec": {"type": "string"},
        "seed": {"type": ["integer", "null"]},
    },
}


def hessian_from_k(K, g: Graph, beta: float, K_stderr=None, K_batches=None) -> HessianForm:
    """``M = K - L``; ``K`` already carries its factor of ``beta``."""
    K = np.asarray(K, dtype=float)
    if K.shape != (g.n, g.n):
        raise DimensionMismatch(f"K has shape {K.shape}, graph has {g.n} vertices")
    K = 0.5 * (K + K.T)
    L = np.array(g.laplacian)
    return HessianForm(float(beta), K, L, K - L, K_stderr, K_batches)


def exact_hessian(g: Graph, beta: float) -> HessianForm:
    return hessian_from_k(exact.exact_k_matrix(g, beta), g, beta)


def mc_hessian(chain, beta: float) -> HessianForm:
    est = mc.estimate_k_matrix(chain, beta)
    return hessian_from_k(est.mean, mc._chains(chain)[0].graph, beta, est.stderr, est.batch_means)


def complement_basis(n: int) -> np.ndarray:
    """Orthonormal ``n x (n-1)`` basis of the vectors summing to zero."""
    return scipy.linalg.null_space(np.ones((1, n)))


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    # largest-magnitude entry positive, so reports are reproducible
    return -v if v[int(np.argmax(np.abs(v)))] < 0 else v


def _deflate(v: np.ndarray) -> np.ndarray:
    v = v - v.mean()
    return v / np.linalg.norm(v)


def power_iteration(M: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000,
                    seed: int = 0) -> tuple[float, np.ndarray]:
    """Largest eigenpair of symmetric ``M`` on the zero-sum subspace.

    Iterates ``M + c I`` with ``c`` a Gershgorin bound so the target eigenvalue
    is dominant; stops when the Rayleigh quotient changes by less than ``tol``.
    """
    n = M.shape[0]
    shift = float(np.abs(M).sum(axis=1).max())
    rng = np.random.default_rng(seed)
    v = _deflate(rng.standard_normal(n))
    lam = float(v @ M @ v)
    for _ in range(max_iter):
        w = _deflate(M @ v + shift * v)
        new = float(w @ M @ w)
        v = w
        if abs(new - lam) < tol:
            return new, _canonical_sign(v)
        lam = new
    raise ConvergenceFailure(f"power iteration did not converge in {max_iter} steps")


def extremal_eigenpair(form: HessianForm | np.ndarray, tol: float = 1e-10) -> tuple[float, np.ndarray]:
    """Largest eigenvalue of ``M`` restricted to vectors orthogonal to constants."""
    M = form.M if isinstance(form, HessianForm) else np.asarray(form, dtype=float)
    n = M.shape[0]
    if n == 1:
        return 0.0, np.zeros(1)
    if n > DENSE_LIMIT:
        return power_iteration(M, tol=tol)
    Q = complement_basis(n)
    A = Q.T @ M @ Q
    vals, vecs = np.linalg.eigh(0.5 * (A + A.T))
    v = Q @ vecs[:, -1]
    v = v - v.mean()
    return float(vals[-1]), _canonical_sign(v / np.linalg.norm(v))


def _quadratic_stderr(form: HessianForm, v: np.ndarray) -> float:
    if form.K_batches is not None:
        q = np.einsum("x,bxy,y->b", v, form.K_batches, v)
        return float(q.std(ddof=1) / math.sqrt(q.shape[0]))
    if form.K_stderr is not None:
        w = np.outer(v, v)
        return float(math.sqrt(np.sum((w * form.K_stderr) ** 2)))
    return 0.0


def gd_verdict(form: HessianForm, noise=None, graph_spec: str = "", N: int = 1,
               seed: int | None = None) -> GDReport:
    """Exact forms: Dominated iff ``lambda_max <= 1e-9``. Monte Carlo forms carry
    a confidence half-width and may come back Inconclusive."""
    lam, v = extremal_eigenpair(form)
    if noise is not None:
        form = HessianForm(form.beta, form.K, form.L, form.M, np.asarray(noise, float), None)
    noisy = form.K_batches is not None or (form.K_stderr is not None and np.any(form.K_stderr))
    if not noisy:
        verdict = DOMINATED if lam <= EXACT_TOL else VIOLATED
        return GDReport(verdict, lam, 0.0, v, "exact", form.beta, N, graph_spec, seed)
    ci = MC_INFLATION * MC_Z * _quadratic_stderr(form, v)
    if lam + ci < 0:
        verdict = DOMINATED
    elif lam - ci > 0:
        verdict = VIOLATED
    else:
        verdict = INCONCLUSIVE
    return GDReport(verdict, lam, ci, v, "monte_carlo", form.beta, N, graph_spec, seed)


def gde_lower_bound(g: Graph, beta: float, N: int, x: int, y: int) -> float:
    """``1 - N u_xy(x) / (2 beta d(x))``; meaningful only under domination."""
    if int(x) == int(y):
        raise SameVertex("x and y coincide")
    if beta <= 0:
        raise NonpositiveBeta("beta must be positive")
    return 1.0 - N * renormalized_green(g, x, y) / (2.0 * beta)


def high_temp_threshold(g: Graph) -> float:
    return 1.0 / (8.0 * g.m)


@dataclass
class AuditRow:
    x: int
    y: int
    correlation: float
    stderr: float
    bound: float
    passed: bool | None


def audit_gde(g: Graph, beta: float, N: int, report: GDReport | None,
              correlations="exact", chain=None) -> list[AuditRow]:
    """Check ``E s_x.s_y >= bound`` on every pair when the report says Dominated.

    ``correlations`` is ``"exact"`` (N = 1 enumeration) or ``"chain"`` (uses
    ``chain``); otherwise the bound values are listed with ``passed=None``.
    """
    if report is None:
        raise MissingVerdict("audit needs a GD report for this instance")
    if correlations == "exact":
        C = exact.exact_correlation_matrix(g, beta)
        se = np.zeros_like(C)
        tol = np.full_like(C, EXACT_TOL)
    else:
        if chain is None:
            raise MissingVerdict("chain correlations requested without a chain")
        C = np.eye(g.n)
        se = np.zeros((g.n, g.n))
        for x, y in itertools.combinations(range(1, g.n + 1), 2):
            est = mc.estimate_correlation(chain, x, y)
            C[x - 1, y - 1] = C[y - 1, x - 1] = est.mean
            se[x - 1, y - 1] = se[y - 1, x - 1] = est.stderr
        tol = MC_Z * se
    rows = []
    check = report.verdict == DOMINATED
    for x, y in itertools.permutations(range(1, g.n + 1), 2):
        bound = gde_lower_bound(g, beta, N, x, y)
        c = float(C[x - 1, y - 1])
        ok = bool(c >= bound - tol[x - 1, y - 1]) if check else None
        rows.append(AuditRow(x, y, c, float(se[x - 1, y - 1]), bound, ok))
    return rows


def scan_low_temperature(g: Graph, betas, verdict_fn) -> float | None:
    """First ``beta`` in ``betas`` with Dominated verdicts at ``beta`` and ``2 beta``."""
    for b in betas:
        if verdict_fn(g, b).verdict == DOMINATED and verdict_fn(g, 2 * b).verdict == DOMINATED:
            return float(b)
    return None


def exact_verdict(g: Graph, beta: float) -> GDReport:
    return gd_verdict(exact_hessian(g, beta), graph_spec=g.name, N=1)


def grid_scan_partition(g: Graph, beta: float, radius: float = 1.0, points: int = 21) -> np.ndarray:
    """``Z*(h)`` over a grid of shifts with ``h_1 = 0`` (N = 1, at most 3 vertices).

    Probes whether ``h = 0`` is a global maximum; no conclusion is drawn.
    """
    if g.n > 3:
        raise DimensionMismatch("grid scan limited to 3 vertices")
    axis = np.linspace(-radius, radius, points)
    grids = np.meshgrid(*([axis] * (g.n - 1)), indexing="ij")
    out = np.empty(grids[0].shape)
    for idx in np.ndindex(out.shape):
        h = np.concatenate([[0.0], [gr[idx] for gr in grids]])
        out[idx] = exact.exact_partition(g, beta, h)
    return out
