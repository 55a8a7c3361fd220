"""Comparison-graph spectrum, topology constants and error bounds."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, EmptyLikelihoodError, NumericalError, UndefinedBoundError
from .likelihood import Dataset, total_log_likelihood
from .model import Theta

DENSE_CAP = 2048
ZERO_EIG_REL = 1e-9


@dataclass(frozen=True)
class ComparisonLaplacian:
    matrix: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        """Off-diagonal pair weights A_{ii'}."""
        A = -self.matrix.copy()
        np.fill_diagonal(A, 0.0)
        return A

    @property
    def d(self) -> int:
        return self.matrix.shape[0]


def comparison_laplacian(dataset: Dataset, cap: int = DENSE_CAP) -> ComparisonLaplacian:
    """Weighted Laplacian where observation j adds p_j / (k_j (k_j - 1)) to each offered pair."""
    d = dataset.d
    if d > cap:
        raise ConfigError(f"d = {d} exceeds the dense eigendecomposition cap {cap}")
    L = np.zeros((d, d))
    for obs, p in zip(dataset.observations, dataset.p):
        kappa = obs.kappa
        if p == 0 or kappa < 2:
            continue
        w = p / (kappa * (kappa - 1))
        idx = np.array(sorted(obs.offer_set), dtype=np.int64)
        # sum over pairs of (e_i - e_i')(e_i - e_i')^T restricted to the offer set
        L[np.ix_(idx, idx)] -= w
        L[idx, idx] += w * kappa
    return ComparisonLaplacian(L)


def spectral_quantities(L: ComparisonLaplacian) -> tuple[float, float, np.ndarray]:
    """Rescaled spectral gap alpha, rescaled spectral radius beta, sorted eigenvalues."""
    try:
        eig = np.linalg.eigvalsh(L.matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition failed") from exc
    d = L.d
    trace = float(np.trace(L.matrix))
    if trace <= 0:
        return 0.0, 0.0, eig
    lam2 = eig[1]
    if lam2 <= ZERO_EIG_REL * eig[-1]:
        lam2 = 0.0
    alpha = lam2 * (d - 1) / trace
    beta = trace / (eig[-1] * (d - 1))
    return float(alpha), float(beta), eig


def _edge_shapes(dataset: Dataset) -> np.ndarray:
    """Rows (m, r, kappa) for every retained edge."""
    rows = [(e.m, e.r, obs.kappa) for obs in dataset.observations for e in dataset.retained(obs)]
    if not rows:
        raise EmptyLikelihoodError("no retained edges")
    return np.array(rows, dtype=float)


def topology_constants(dataset: Dataset, b: float) -> tuple[float, float, float, float]:
    """gamma1, gamma2, gamma3 and nu over the retained edges; gamma3 may be negative."""
    m, r, kappa = _edge_shapes(dataset).T
    gap = r - m
    gamma1 = float(np.min((gap / kappa) ** (2 * math.exp(2 * b) - 2)))
    gamma2 = float(np.min((gap / r) ** 2))
    gamma3 = float(1 - np.max(4 * math.exp(16 * b) / gamma1 * m**2 * r**2 * kappa**2 / gap**5))
    nu = float(np.max(m * kappa**2 / gap**2))
    return gamma1, gamma2, gamma3, nu


def eta(m: int, r: int) -> float:
    """Per-edge Fisher-information deficit for a top-set of size m out of r items."""
    total = 0.0
    for u in range(m):
        total += 1.0 / (r - u) + u * (m - u) / (m * (r - u) ** 2)
    for u in range(1, m):
        for v in range(u + 1, m):
            total += 2 * u / (m * (r - u)) * (m - v) / (r - v)
    return total


def cramer_rao_lower_bound(dataset: Dataset, L: ComparisonLaplacian) -> tuple[float, np.ndarray, float]:
    """Lower bound on E||theta_hat - theta*||^2 for centered unbiased estimators.

    Uses every edge regardless of ``dataset.M``. Returns the bound, the
    per-edge eta values and mu = max(m - eta).
    """
    edges = dataset.with_M(None).edges
    if not edges:
        raise EmptyLikelihoodError("no edges; the bound is undefined")
    m = np.array([e.m for e in edges], dtype=float)
    etas = np.array([eta(e.m, e.r) for e in edges])
    info = m - etas
    mu = float(info.max())
    d = dataset.d
    trace_term = (d - 1) ** 2 / float(info.sum())
    eig = np.linalg.eigvalsh(L.matrix)[1:]
    if np.any(eig <= ZERO_EIG_REL * max(eig[-1], 0.0)):
        spectral_term = math.inf
    else:
        spectral_term = float(np.sum(1.0 / eig)) / mu
    return max(trace_term, spectral_term), etas, mu


def theorem1_rhs(alpha: float, gamma1: float, gamma2: float, gamma3: float, b: float, d: int, N: float) -> float:
    """Upper bound on ||theta_hat - theta*|| / sqrt(d)."""
    return 40 * math.exp(7 * b) / (alpha * gamma1 * gamma2**1.5 * gamma3) * math.sqrt(d * math.log(d) / N)


def theorem1_bounds(
    dataset: Dataset,
    b: float,
    alpha: float,
    beta: float,
    gamma1: float,
    gamma2: float,
    gamma3: float,
    nu: float,
) -> tuple[float, bool]:
    """Error upper bound and whether the effective sample size condition holds."""
    if alpha <= 0:
        raise UndefinedBoundError("comparison graph is disconnected (alpha = 0)")
    M = max(e.m for e in dataset.edges)
    if M <= 3:
        gamma3 = 1.0
    elif gamma3 <= 0:
        raise UndefinedBoundError("gamma3 <= 0; the bound only replaces gamma3 by one when M <= 3")
    d = dataset.d
    N = dataset.effective_sample_size
    rhs = theorem1_rhs(alpha, gamma1, gamma2, gamma3, b, d, N)
    p = dataset.p
    needed = (
        2**14 * math.exp(20 * b) * nu**2 / ((alpha * gamma1 * gamma2 * gamma3) ** 2 * beta)
        * (p.max() / dataset.kappa.min()) * d * math.log(d)
    )
    return rhs, bool(N >= needed)


@dataclass(frozen=True)
class HessianCheck:
    max_curvature: float
    min_curvature: float
    value: float
    directions: int

    @property
    def concave(self) -> bool:
        return self.max_curvature <= 1e-6 * max(1.0, abs(self.value))


def random_tangent_directions(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.standard_normal((count, d))
    u -= u.mean(axis=1, keepdims=True)
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def second_difference(theta: np.ndarray, dataset: Dataset, u: np.ndarray, step: float = 1e-3) -> float:
    """Central second difference of the log-likelihood along ``u``."""
    f = lambda x: total_log_likelihood(x, dataset).value  # noqa: E731
    return (f(theta + step * u) - 2 * f(theta) + f(theta - step * u)) / step**2


def numerical_hessian_check(
    theta: Theta | np.ndarray,
    dataset: Dataset,
    num_directions: int = 20,
    rng: np.random.Generator | None = None,
    step: float = 1e-3,
) -> HessianCheck:
    """Estimate u'Hu along random sum-zero unit directions."""
    values = np.asarray(theta, dtype=float)
    rng = np.random.default_rng(0) if rng is None else rng
    curv = [second_difference(values, dataset, u, step) for u in random_tangent_directions(values.size, num_directions, rng)]
    value = total_log_likelihood(values, dataset).value
    return HessianCheck(float(max(curv)), float(min(curv)), value, num_directions)


@dataclass(frozen=True)
class DiagnosticsReport:
    laplacian_trace: float
    alpha: float
    beta: float
    gamma1: float
    gamma2: float
    gamma3: float
    nu: float
    effective_sample_size: int
    cramer_rao_bound: float
    eta_values: list[float]
    mu: float
    theorem1_rhs: float | None
    sample_size_condition_met: bool

    def to_json(self) -> str:
        out = {}
        for key, val in asdict(self).items():
            if isinstance(val, float) and not math.isfinite(val):
                val = None
            out[key] = val
        return json.dumps(out, sort_keys=False)


def diagnose(dataset: Dataset, b: float) -> DiagnosticsReport:
    """Assemble every diagnostic for ``dataset`` at dynamic range ``b``."""
    L = comparison_laplacian(dataset)
    alpha, beta, _ = spectral_quantities(L)
    gamma1, gamma2, gamma3, nu = topology_constants(dataset, b)
    crb, etas, mu = cramer_rao_lower_bound(dataset, comparison_laplacian(dataset.with_M(None)))
    try:
        rhs, cond = theorem1_bounds(dataset, b, alpha, beta, gamma1, gamma2, gamma3, nu)
    except UndefinedBoundError:
        rhs, cond = None, False
    return DiagnosticsReport(
        laplacian_trace=float(np.trace(L.matrix)),
        alpha=alpha,
        beta=beta,
        gamma1=gamma1,
        gamma2=gamma2,
        gamma3=gamma3,
        nu=nu,
        effective_sample_size=dataset.effective_sample_size,
        cramer_rao_bound=crb,
        eta_values=etas.tolist(),
        mu=mu,
        theorem1_rhs=rhs,
        sample_size_condition_met=cond,
    )
