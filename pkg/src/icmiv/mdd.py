"""Sample mean-dependence measures and their correlation analogue.

``mdd_sq`` is the distance-based measure -E_n[||Z_i - Z_j|| Wc_i Wc_j] with W
centered at its sample mean; it is nonnegative for any sample because the
Euclidean distance is conditionally negative definite on zero-sum weights.
``gmdd_sq`` is the same V-statistic with an arbitrary kernel matrix in place
of the negative distance, and ``gmdc`` rescales it by the Cauchy-Schwarz
bound E_n[Wc^2] * sd(K) so that values across kernels live on a common [0, 1]
scale. All sums run over every ordered pair including i = j.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .kernels import KernelMatrix, KernelSpec

__all__ = ["mdd_sq", "gmdd_sq", "gmdc", "DependenceReport", "dependence_report"]


def _centered_weights(W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(W)):
        raise ValueError("W contains non-finite entries")
    return W - W.mean()


def _vstat_quadform(values: np.ndarray, w: np.ndarray) -> float:
    n = w.shape[0]
    return float(w @ (values @ w)) / (n * n)


def mdd_sq(W: np.ndarray, Z: np.ndarray) -> float:
    """-E_n[||Z_i - Z_j|| Wc_i Wc_j] over all n^2 ordered pairs.

    Centering W implements the zero-mean requirement of the measure; the
    diagonal pairs contribute nothing because the distance there is zero.
    """
    w = _centered_weights(W)
    n = w.shape[0]
    if n < 2:
        raise ValueError("need at least two observations")
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if Z.shape[0] != n:
        raise ValueError(f"W has {n} rows but Z has {Z.shape[0]}")
    if not np.all(np.isfinite(Z)):
        raise ValueError("Z contains non-finite entries")
    return -_vstat_quadform(cdist(Z, Z), w)


def _kernel_values(K) -> tuple[np.ndarray, KernelSpec | None]:
    if isinstance(K, KernelMatrix):
        return K.values, K.spec
    return np.asarray(K, dtype=np.float64), None


def gmdd_sq(W: np.ndarray, K: KernelMatrix) -> float:
    """Kernel-weighted dependence V-statistic E_n[Wc_i Wc_j K_ij].

    With the mmd kernel (negative distances) this equals ``mdd_sq``. For
    other kernels it is a covariance-type quantity, so small negative values
    can occur in finite samples when the kernel is not of negative type.
    """
    values, _ = _kernel_values(K)
    w = _centered_weights(W)
    if values.shape[0] != w.shape[0]:
        raise ValueError(
            f"kernel matrix is {values.shape[0]} x {values.shape[1]} "
            f"but W has {w.shape[0]} rows"
        )
    return _vstat_quadform(values, w)


def _kernel_sd_all_pairs(values: np.ndarray) -> float:
    return float(np.std(values))


def gmdc(W: np.ndarray, K: KernelMatrix) -> float:
    """Correlation-scale dependence: gmdd_sq / (E_n[Wc^2] * sd(K)).

    The denominator is the sample Cauchy-Schwarz bound over all ordered
    pairs, which certifies the raw ratio lies in [0, 1] up to rounding. The
    result is clipped to [0, 1] after checking the raw value is not
    materially negative.
    """
    values, _ = _kernel_values(K)
    w = _centered_weights(W)
    if values.shape[0] != w.shape[0]:
        raise ValueError("kernel matrix and W are not row-aligned")
    n = w.shape[0]
    w2 = float(np.mean(w**2))
    if w2 == 0.0:
        raise ValueError("W is constant; dependence scale is degenerate")
    off = values[~np.eye(n, dtype=bool)]
    if off.size and np.ptp(off) == 0.0:
        raise ValueError("kernel has constant off-diagonal entries; scale is degenerate")
    sd_k = _kernel_sd_all_pairs(values)
    raw = _vstat_quadform(values, w) / (w2 * sd_k)
    if raw < -1e-8:
        raise ValueError(f"dependence ratio is negative beyond tolerance ({raw:.3e})")
    return float(min(max(raw, 0.0), 1.0))


@dataclass(frozen=True)
class DependenceReport:
    """gmdd_sq and gmdc for one weight vector against one kernel."""

    gmdd_sq: float
    gmdc: float
    kernel: KernelSpec | None
    n: int


def dependence_report(W: np.ndarray, K: KernelMatrix) -> DependenceReport:
    values, spec = _kernel_values(K)
    return DependenceReport(
        gmdd_sq=gmdd_sq(W, K),
        gmdc=gmdc(W, K),
        kernel=spec,
        n=values.shape[0],
    )
