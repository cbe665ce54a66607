"""Wild-bootstrap specification test and the relevance (linear completeness) test.

The statistic is n times the distance-based dependence of residuals on the
instruments. Its null distribution is approximated by a full-refit wild
bootstrap: residuals are multiplied by mean-zero unit-variance weights,
pseudo-outcomes are rebuilt around the fitted values, the model is
re-estimated on each draw, and the statistic recomputed. Draws are indexed
and seeded independently, so results do not depend on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np
from scipy.spatial.distance import cdist

from .data import Dataset
from .estimator import _IVSystem, build_instruments, estimate
from .kernels import KernelSpec, kernel_matrix, wmd_lambda
from .rng import child_rng

__all__ = [
    "WEIGHT_SCHEMES",
    "BootTestResult",
    "wild_weights",
    "spec_test",
    "lc_test",
    "lc_interpretation",
]

WEIGHT_SCHEMES = ("mammen", "rademacher")

# Two-point Mammen distribution: mean 0, variance 1, third moment 1, so the
# bootstrap preserves residual skewness. Rademacher keeps the first two
# moments only.
_MAMMEN_LO = (1.0 - sqrt(5.0)) / 2.0
_MAMMEN_HI = (1.0 + sqrt(5.0)) / 2.0
_MAMMEN_P_LO = (sqrt(5.0) + 1.0) / (2.0 * sqrt(5.0))


def wild_weights(scheme: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n wild-bootstrap multipliers from the named scheme."""
    u = rng.random(n)
    if scheme == "mammen":
        return np.where(u < _MAMMEN_P_LO, _MAMMEN_LO, _MAMMEN_HI)
    if scheme == "rademacher":
        return np.where(u < 0.5, -1.0, 1.0)
    raise ValueError(f"unknown weight scheme {scheme!r}; expected one of {WEIGHT_SCHEMES}")


@dataclass(frozen=True)
class BootTestResult:
    """Observed statistic, bootstrap replicates, and the finite-B p-value.

    The p-value is (1 + #{b : boot_stats_b >= stat}) / (B + 1), so it lives
    in [1/(B+1), 1]. Draws whose refit failed are dropped with accounting
    (never resampled); the formula then uses the surviving count.
    """

    stat: float
    boot_stats: np.ndarray
    pvalue: float
    B: int
    seed: int
    weight_scheme: str
    failed_draws: int = 0


def _stat_from_dist(u: np.ndarray, D: np.ndarray) -> float:
    """n * mdd_sq(u, Z) computed from a precomputed distance matrix."""
    w = u - u.mean()
    return -float(w @ (D @ w)) / u.shape[0]


def _boot_stats_linear(ds, spec, est, D, B, seed, weights):
    """Batched wild bootstrap for kernels whose weights do not involve y."""
    aux = None  # spec.id != "wmd" here
    K = kernel_matrix(ds.Z, spec, aux=aux)
    H = build_instruments(ds, K).H
    sys = _IVSystem(ds.X, H)
    n = ds.n
    fitted = ds.y - est.residuals
    V = np.empty((n, B))
    for b in range(B):
        V[:, b] = wild_weights(weights, n, child_rng(seed, b))
    Ystar = fitted[:, None] + est.residuals[:, None] * V
    Theta = sys.solve(H.T @ Ystar / n)
    Ustar = Ystar - ds.X @ Theta
    Wc = Ustar - Ustar.mean(axis=0)
    return -np.einsum("ib,ib->b", Wc, D @ Wc) / n


def _boot_stats_wmd(ds, spec, est, D, B, seed, weights):
    """Per-draw refit for the wmd kernel, whose diagonal depends on y."""
    K = kernel_matrix(ds.Z, spec, aux=np.column_stack([ds.y, ds.X]))
    ktilde = K.values.copy()
    np.fill_diagonal(ktilde, 0.0)
    n = ds.n
    fitted = ds.y - est.residuals
    out = np.full(B, np.nan)
    for b in range(B):
        v = wild_weights(weights, n, child_rng(seed, b))
        ystar = fitted + est.residuals * v
        try:
            lam = wmd_lambda(np.column_stack([ystar, ds.X]), ktilde)
            kv = ktilde.copy()
            np.fill_diagonal(kv, -lam)
            Hb = (kv @ ds.X) / (n - 1)
            sysb = _IVSystem(ds.X, Hb)
            ustar = ystar - ds.X @ sysb.fit(ystar)
        except Exception:
            continue
        out[b] = _stat_from_dist(ustar, D)
    return out


def spec_test(
    ds: Dataset,
    spec: KernelSpec,
    B: int = 999,
    seed: int = 0,
    weights: str = "mammen",
) -> BootTestResult:
    """Wild-bootstrap test of the conditional moment restriction E[U|Z] = 0.

    Estimates the model, forms T = n * mdd_sq(residuals, Z), and compares it
    against B full-refit bootstrap replicates built from y* = X theta_hat +
    u_hat * v with v drawn from the chosen weight scheme. Small p-values are
    evidence the residual mean depends on the instruments.
    """
    if B < 99:
        raise ValueError("B must be at least 99")
    if weights not in WEIGHT_SCHEMES:
        raise ValueError(f"unknown weight scheme {weights!r}; expected one of {WEIGHT_SCHEMES}")
    est = estimate(ds, spec)
    D = cdist(ds.Z, ds.Z)
    stat = _stat_from_dist(est.residuals, D)
    if spec.id == "wmd":
        raw = _boot_stats_wmd(ds, spec, est, D, B, seed, weights)
    else:
        raw = _boot_stats_linear(ds, spec, est, D, B, seed, weights)
    ok = np.isfinite(raw)
    failed = int(B - ok.sum())
    if failed > 0.05 * B:
        raise RuntimeError(
            f"{failed} of {B} bootstrap refits failed; the null distribution "
            "cannot be approximated reliably on this dataset"
        )
    boot = raw[ok]
    pvalue = (1.0 + float(np.sum(boot >= stat))) / (boot.size + 1.0)
    return BootTestResult(
        stat=stat,
        boot_stats=boot,
        pvalue=pvalue,
        B=B,
        seed=seed,
        weight_scheme=weights,
        failed_draws=failed,
    )


def lc_test(
    ds: Dataset,
    endog: int,
    spec: KernelSpec,
    B: int = 999,
    seed: int = 0,
    weights: str = "mammen",
) -> BootTestResult:
    """Relevance test: is any combination of the other covariates able to
    absorb the designated endogenous covariate's mean given Z?

    Runs a linear ICM regression of the endogenous covariate on the remaining
    covariates (intercept kept) with the same instruments, then the wild
    bootstrap specification test on that auxiliary regression. REJECTING the
    null (small p-value) is evidence that identification HOLDS: no linear
    combination of the covariates is mean-independent of the instruments.
    Only a single endogenous covariate is supported; the reduction does not
    extend to several endogenous covariates in any obvious way.
    """
    if not 1 <= endog < ds.p_x:
        raise ValueError(f"endog index {endog} out of range (1..{ds.p_x - 1})")
    if int(ds.endog_mask.sum()) > 1:
        raise ValueError(
            "the relevance test supports exactly one endogenous covariate; "
            f"this dataset flags {int(ds.endog_mask.sum())}"
        )
    keep = [j for j in range(ds.p_x) if j != endog]
    aux = Dataset(
        y=ds.X[:, endog],
        X=ds.X[:, keep],
        Z=ds.Z,
        x_names=tuple(ds.x_names[j] for j in keep),
        z_names=ds.z_names,
        endog_mask=np.zeros(len(keep), dtype=bool),
    )
    return spec_test(aux, spec, B=B, seed=seed, weights=weights)


def lc_interpretation(pvalue: float, level: float = 0.05) -> str:
    """Reading of the relevance test outcome; rejection means identification."""
    if pvalue <= level:
        return (
            f"evidence of ICM identification at the {level:g} level: "
            "no linear combination of the covariates appears mean-independent "
            "of the instruments"
        )
    return f"no evidence of ICM identification at the {level:g} level"
