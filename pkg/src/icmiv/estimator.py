"""Linear ICM estimation with kernel-constructed instruments.

The estimator solves theta = (E_n[h_i'X_i])^-1 E_n[h_i'Y_i] where the
constructed instrument row h_i = (1/(n-1)) sum_j k_ij X_j averages covariate
rows with kernel weights (Euclidean distances for the mmd kernel, the kernel
matrix entries otherwise). It is an exactly-identified IV regression no
matter how many instrument columns feed the kernel, so inference is the
familiar sandwich A^-1 B A^-1 with A = -E_n[h'X] and B = E_n[u^2 h'h].

Near-singularity of A is precisely the weak-identification regime, so all
solves go through a rank-revealing SVD and refuse once the condition number
carries no inferential content.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import erfc, sqrt
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import ndtri

from .data import Dataset
from .kernels import KernelMatrix, KernelSpec, kernel_matrix
from .mdd import gmdc

__all__ = [
    "COND_LIMIT",
    "IdentificationError",
    "InfeasibilityError",
    "InstrumentMatrix",
    "EstimateResult",
    "TTest",
    "IdentificationDiagnostics",
    "build_instruments",
    "estimate",
    "mmd_objective",
    "minimize_objective_oracle",
    "t_test",
    "identification_diagnostics",
    "tsls_estimate",
]

# Beyond this condition number a double-precision solve carries no
# inferential content; refuse rather than amplify noise.
COND_LIMIT = 1e12


class IdentificationError(RuntimeError):
    """E_n[h'X] is singular or numerically unusable.

    Carries the observed condition number and smallest singular value; this
    is the operational face of the ICM relevance condition failing.
    """

    def __init__(self, message: str, cond: float, min_singular: float):
        super().__init__(message)
        self.cond = cond
        self.min_singular = min_singular


class InfeasibilityError(ValueError):
    """An estimator's order condition fails on this dataset."""


@dataclass(frozen=True)
class InstrumentMatrix:
    """Constructed instruments, one row per observation."""

    H: np.ndarray
    kernel: KernelSpec


@dataclass(frozen=True)
class EstimateResult:
    """Coefficients, sandwich pieces, and per-coefficient inference inputs."""

    theta: np.ndarray
    A_hat: np.ndarray
    B_hat: np.ndarray
    vcov: np.ndarray
    se: np.ndarray
    residuals: np.ndarray
    kernel: KernelSpec | None
    cond_A: float


class TTest(NamedTuple):
    t: float
    pvalue: float
    reject: bool


def build_instruments(ds: Dataset, K: KernelMatrix) -> InstrumentMatrix:
    """h_i = (1/(n-1)) sum_j k_ij X_j with k the kernel weight matrix.

    For the mmd kernel the weights are the raw Euclidean distances; the
    global sign of k cancels in the IV ratio, so this choice only fixes the
    sign convention of A_hat.
    """
    if K.n != ds.n:
        raise ValueError(f"kernel matrix has {K.n} rows but dataset has {ds.n}")
    k = -K.values if K.spec.id == "mmd" else K.values
    H = (k @ ds.X) / (ds.n - 1)
    return InstrumentMatrix(H=H, kernel=K.spec)


class _IVSystem:
    """SVD-factored linear IV system G = E_n[h'X]; reusable for refits."""

    def __init__(self, X: np.ndarray, H: np.ndarray):
        n = X.shape[0]
        self.X = X
        self.H = H
        self.n = n
        self.G = H.T @ X / n
        U, s, Vt = np.linalg.svd(self.G)
        smin = float(s[-1])
        smax = float(s[0])
        cond = np.inf if smin == 0.0 else smax / smin
        if not np.isfinite(cond) or cond >= COND_LIMIT:
            raise IdentificationError(
                "E_n[h'X] is singular or ill-conditioned "
                f"(cond={cond:.3e}, smallest singular value={smin:.3e}); "
                "the instruments carry no identifying variation for some "
                "direction of the covariates",
                cond=cond,
                min_singular=smin,
            )
        self._U, self._s, self._Vt = U, s, Vt
        self.cond = cond

    def solve(self, b: np.ndarray) -> np.ndarray:
        """G^-1 b for a vector or a column-stacked batch."""
        return self._Vt.T @ ((self._U.T @ b).T / self._s).T

    def solve_t(self, b: np.ndarray) -> np.ndarray:
        """G^-T b."""
        return self._U @ ((self._Vt @ b).T / self._s).T

    def fit(self, y: np.ndarray) -> np.ndarray:
        return self.solve(self.H.T @ y / self.n)


def _finish_estimate(sys: _IVSystem, y: np.ndarray, kernel: KernelSpec | None) -> EstimateResult:
    theta = sys.fit(y)
    resid = y - sys.X @ theta
    A_hat = -sys.G
    B_hat = (sys.H * resid[:, None] ** 2).T @ sys.H / sys.n
    # A^-1 B A^-T / n; the sign of A cancels in the sandwich.
    vcov = sys.solve_t(sys.solve(B_hat).T).T / sys.n
    vcov = 0.5 * (vcov + vcov.T)
    se = np.sqrt(np.clip(np.diag(vcov), 0.0, None))
    return EstimateResult(
        theta=theta,
        A_hat=A_hat,
        B_hat=B_hat,
        vcov=vcov,
        se=se,
        residuals=resid,
        kernel=kernel,
        cond_A=sys.cond,
    )


def estimate(ds: Dataset, spec: KernelSpec) -> EstimateResult:
    """Kernel-weighted linear ICM estimate with sandwich covariance."""
    aux = np.column_stack([ds.y, ds.X]) if spec.id == "wmd" else None
    K = kernel_matrix(ds.Z, spec, aux=aux)
    H = build_instruments(ds, K).H
    return _finish_estimate(_IVSystem(ds.X, H), ds.y, spec)


def mmd_objective(ds: Dataset, theta: np.ndarray) -> float:
    """Q_n(theta) = -E_n[||Z_i - Z_j|| (y_i - X_i theta)(y_j - X_j theta)]."""
    u = ds.y - ds.X @ np.asarray(theta, dtype=np.float64)
    D = cdist(ds.Z, ds.Z)
    return -float(u @ (D @ u)) / (ds.n * ds.n)


def minimize_objective_oracle(ds: Dataset, step: float = 1.0) -> np.ndarray:
    """Solve the pairwise objective directly from function values; certifies
    the closed form without touching the instrument construction.

    Q_n is an exact quadratic in theta, so central differences have no
    truncation error and one finite-difference Newton step from the origin
    lands on the unique stationary point. That point is where the objective
    is minimized over every direction that perturbs the fitted values around
    their level: pure level shifts enter the distance form with positive
    sign, so along the intercept-like directions Q_n is concave and unbounded
    below, and a literal global minimum does not exist. The returned vector
    is verified stationary and a strict minimum along all mean-preserving
    coordinate directions. Restricted to small certification instances.
    """
    if ds.n > 200 or ds.p_x > 3:
        raise ValueError("oracle solver is restricted to n <= 200 and p_x <= 3")
    D = cdist(ds.Z, ds.Z)
    n2 = ds.n * ds.n

    def q(t: np.ndarray) -> float:
        u = ds.y - ds.X @ t
        return -float(u @ (D @ u)) / n2

    p = ds.p_x
    h = step
    x0 = np.zeros(p)
    q0 = q(x0)
    grad = np.empty(p)
    hess = np.empty((p, p))
    for k in range(p):
        ek = np.zeros(p)
        ek[k] = h
        qp, qm = q(x0 + ek), q(x0 - ek)
        grad[k] = (qp - qm) / (2.0 * h)
        hess[k, k] = (qp + qm - 2.0 * q0) / (h * h)
        for m in range(k):
            em = np.zeros(p)
            em[m] = h
            hess[k, m] = hess[m, k] = (
                q(x0 + ek + em) - q(x0 + ek - em) - q(x0 - ek + em) + q(x0 - ek - em)
            ) / (4.0 * h * h)
    if abs(np.linalg.det(hess)) < 1e-14 * max(1.0, float(np.abs(hess).max()) ** p):
        raise RuntimeError("oracle failed: objective curvature is numerically singular")
    theta = x0 - np.linalg.solve(hess, grad)
    scale = max(1.0, abs(q0))
    # Stationarity: symmetric probes agree to rounding.
    for k in range(p):
        ek = np.zeros(p)
        ek[k] = 0.01
        if abs(q(theta + ek) - q(theta - ek)) > 1e-8 * scale:
            raise RuntimeError("oracle failed: candidate is not a stationary point")
    # Minimality along mean-preserving directions: perturb a slope while
    # adjusting the intercept so the average fitted value stays put.
    xbar = ds.X.mean(axis=0)
    qt = q(theta)
    for k in range(1, p):
        w = np.zeros(p)
        w[k] = 0.01
        w[0] = -0.01 * xbar[k]
        if min(q(theta + w), q(theta - w)) < qt - 1e-10 * scale:
            raise RuntimeError("oracle failed: candidate is not a mean-preserving minimum")
    return theta


def t_test(res: EstimateResult, k: int, theta0: float, level: float = 0.05) -> TTest:
    """Two-sided asymptotic-normal t-test of theta_k = theta0.

    Rejection uses a strict inequality against the normal critical value, so
    |t| exactly at the boundary does not reject.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie strictly between 0 and 1")
    se = float(res.se[k])
    if se == 0.0:
        raise ValueError(f"standard error for coefficient {k} is zero; t-test is degenerate")
    t = (float(res.theta[k]) - theta0) / se
    pvalue = erfc(abs(t) / sqrt(2.0))
    crit = float(ndtri(1.0 - level / 2.0))
    return TTest(t=t, pvalue=pvalue, reject=abs(t) > crit)


@dataclass(frozen=True)
class IdentificationDiagnostics:
    """Strength report for the ICM relevance condition; never raises."""

    min_eig: float
    tau_star: np.ndarray
    gmdc_strength: float
    rank_h: int
    rank_z: int


def _numerical_rank(M: np.ndarray, rtol: float = 1e-8) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def identification_diagnostics(ds: Dataset, spec: KernelSpec) -> IdentificationDiagnostics:
    """Weakest-direction diagnostics of the kernel-weighted relevance matrix.

    Forms M = E_n[K_ij (X_i - Xbar)'(X_j - Xbar)] over the non-intercept
    covariates (for the mmd kernel K is the negative distance, making M
    positive semi-definite), and reports its smallest eigenvalue, the unit
    eigenvector tau* pointing at the least identified covariate combination,
    and the dependence strength of X tau* on Z. ``rank_h`` is the numerical
    rank of E_n[h'X]; ``rank_z`` is the rank of the conventional instrument
    cross-moment E_n[(1, Z)'X], whose shortfall relative to rank_h is exactly
    what nonlinear mean dependence buys.
    """
    if ds.p_x < 2:
        raise ValueError("diagnostics need at least one non-intercept covariate")
    aux = np.column_stack([ds.y, ds.X]) if spec.id == "wmd" else None
    K = kernel_matrix(ds.Z, spec, aux=aux)
    Xm = ds.X[:, 1:]
    Xc = Xm - Xm.mean(axis=0)
    n = ds.n
    M = Xc.T @ (K.values @ Xc) / (n * n)
    M = 0.5 * (M + M.T)
    eigvals, eigvecs = np.linalg.eigh(M)
    tau = eigvecs[:, 0]
    try:
        strength = gmdc(Xm @ tau, K)
    except ValueError:
        strength = 0.0
    H = build_instruments(ds, K).H
    G = H.T @ ds.X / n
    Zaug = np.column_stack([np.ones(n), ds.Z])
    R = Zaug.T @ ds.X / n
    return IdentificationDiagnostics(
        min_eig=float(eigvals[0]),
        tau_star=tau,
        gmdc_strength=float(strength),
        rank_h=_numerical_rank(G),
        rank_z=_numerical_rank(R),
    )


def tsls_estimate(ds: Dataset) -> EstimateResult:
    """Two-stage least squares with a heteroskedasticity-robust sandwich.

    The instrument block stacks the exogenous covariates (intercept included)
    with the Z columns that do not literally duplicate an X column. The order
    condition requires at least as many excluded instruments as endogenous
    covariates; without excluded instruments the estimator is infeasible, no
    matter how strong any nonlinear dependence may be.
    """
    endog = ds.endog_mask
    exog = ds.X[:, ~endog]
    dup = np.array(
        [
            any(np.array_equal(ds.Z[:, j], ds.X[:, k]) for k in range(ds.p_x))
            for j in range(ds.p_z)
        ]
    )
    Zex = ds.Z[:, ~dup]
    n_endog = int(endog.sum())
    if Zex.shape[1] < n_endog:
        raise InfeasibilityError(
            f"order condition fails: {Zex.shape[1]} excluded instrument(s) for "
            f"{n_endog} endogenous covariate(s)"
        )
    W = np.column_stack([exog, Zex])
    coef, *_ = np.linalg.lstsq(W, ds.X, rcond=None)
    Xhat = W @ coef
    return _finish_estimate(_IVSystem(ds.X, Xhat), ds.y, None)
