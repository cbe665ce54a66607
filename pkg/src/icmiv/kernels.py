"""Kernel matrices for linear ICM estimation and degeneracy diagnostics.

Five kernels are supported, identified by short lowercase ids:

``mmd``
    Negative Euclidean distance, -||Z_i - Z_j||. Unbounded, non-multiplicative,
    invariant (up to scale) under rigid motions of Z.
``iiv``
    Gaussian kernel on the Mahalanobis distance,
    exp(-0.5 (Z_i - Z_j) Vz^-1 (Z_i - Z_j)') with Vz the sample covariance of
    Z. Multiplicative; invariant under nonsingular affine maps of Z.
``dl``
    Empirical joint-survival kernel, (1/n) sum_l I(Z_i <= Z_l) I(Z_j <= Z_l)
    with the indicator taken coordinate-wise over all components.
``esc6``
    Average absolute complementary angle at sample vertices,
    c(p_z)/n * sum_l |pi - arccos(cos angle((Z_i - Z_l), (Z_j - Z_l)))| with
    c(p_z) = pi^(p_z/2 - 1) / Gamma(p_z/2 + 1). Exact ties get the angle pi
    (two points coincide) or 2 pi (all three coincide).
``wmd``
    Product-normal density of coordinate differences off the diagonal, and
    -lambda on the diagonal, where lambda is the smallest real eigenvalue of
    (E_n[Y*'Y*])^-1 E_n[Ktilde_ij Y_i*'Y_j*] for Y* = [y, X].

Multiplicative kernels collapse toward a constant as the instrument dimension
grows, which starves ICM identification of variation; ``kernel_sd_mc``
quantifies that collapse by Monte Carlo.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.spatial.distance import cdist

from .rng import child_rng

__all__ = [
    "KERNEL_IDS",
    "KernelSpec",
    "KernelMatrix",
    "KernelScalingError",
    "kernel_matrix",
    "wmd_lambda",
    "esc6_constant",
    "kernel_sd_mc",
    "kernel_sd_report",
]

KERNEL_IDS = ("mmd", "iiv", "dl", "esc6", "wmd")
_ALIASES = {"iiv_gauss": "iiv", "gauss": "iiv"}

# Reference-sample size used by kernel_sd_mc for the sample-dependent kernels.
_REF_SIZE = 512


class KernelScalingError(ValueError):
    """Raised when a kernel's data-driven scaling cannot be formed."""


@dataclass(frozen=True)
class KernelSpec:
    """Selects one ICM kernel; ``bandwidth`` only affects the wmd base density."""

    id: str
    bandwidth: float = 1.0

    def __post_init__(self):
        key = str(self.id).lower()
        key = _ALIASES.get(key, key)
        if key not in KERNEL_IDS:
            raise ValueError(f"unknown kernel id {self.id!r}; expected one of {KERNEL_IDS}")
        object.__setattr__(self, "id", key)
        if not (self.bandwidth > 0.0):
            raise ValueError("bandwidth must be positive")

    @property
    def data_dependent(self) -> bool:
        """dl, esc6, and wmd need the full sample; mmd and iiv are pairwise."""
        return self.id in ("dl", "esc6", "wmd")


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric n x n kernel evaluation plus the scaling used to build it."""

    values: np.ndarray
    spec: KernelSpec
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def esc6_constant(p_z: int) -> float:
    """Normalizing constant pi^(p_z/2 - 1) / Gamma(p_z/2 + 1)."""
    return pi ** (p_z / 2.0 - 1.0) / gamma(p_z / 2.0 + 1.0)


def _mmd_values(Z: np.ndarray) -> np.ndarray:
    return -cdist(Z, Z)


def _z_covariance(Z: np.ndarray) -> np.ndarray:
    V = np.cov(Z, rowvar=False, ddof=1)
    return np.atleast_2d(V)


def _iiv_values(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    V = _z_covariance(Z)
    try:
        L = cholesky(V, lower=True)
    except np.linalg.LinAlgError as exc:
        raise KernelScalingError(
            "sample covariance of Z is singular; drop collinear instrument columns"
        ) from exc
    # Whitened coordinates turn the Mahalanobis form into plain sq-distances.
    Y = solve_triangular(L, Z.T, lower=True).T
    sq = cdist(Y, Y, "sqeuclidean")
    return np.exp(-0.5 * sq), V


def _dl_values(Z: np.ndarray) -> np.ndarray:
    n = Z.shape[0]
    B = np.empty((n, n))
    # B[i, l] = 1 iff Z_i <= Z_l in every coordinate; blocked to bound memory.
    step = max(1, int(2.0e8 / max(1, n * Z.shape[1])))
    for i0 in range(0, n, step):
        B[i0 : i0 + step] = np.all(Z[i0 : i0 + step, None, :] <= Z[None, :, :], axis=2)
    return (B @ B.T) / n


def _esc6_values(Z: np.ndarray) -> np.ndarray:
    n = Z.shape[0]
    # Centering removes translation magnitude before the Gram expansion,
    # keeping the cancellation error relative to the data's own spread.
    Zc = Z - Z.mean(axis=0)
    G = Zc @ Zc.T
    g = np.ascontiguousarray(np.diag(G))
    total = np.zeros((n, n))
    buf = np.empty((n, n))
    den = np.empty((n, n))
    for l in range(n):
        col = G[:, l]
        nrm = np.sqrt(np.maximum(g - 2.0 * col + g[l], 0.0))
        same = np.all(Z == Z[l], axis=1)
        nrm[same] = 1.0
        nrm[nrm == 0.0] = 1.0
        # cos angle = ((Z_i-Z_l).(Z_j-Z_l)) / (||Z_i-Z_l|| ||Z_j-Z_l||),
        # numerator expanded through the centered Gram matrix.
        np.subtract(G, col[:, None], out=buf)
        buf -= col[None, :]
        buf += g[l]
        np.multiply(nrm[:, None], nrm[None, :], out=den)
        buf /= den
        np.clip(buf, -1.0, 1.0, out=buf)
        np.arccos(buf, out=buf)
        buf -= pi
        np.abs(buf, out=buf)
        if same.any():
            buf[same, :] = pi
            buf[:, same] = pi
            buf[np.ix_(same, same)] = 2.0 * pi
        total += buf
    return (esc6_constant(Z.shape[1]) / n) * total


def _wmd_base_density(Z: np.ndarray, bandwidth: float) -> np.ndarray:
    n, p_z = Z.shape
    sq = cdist(Z, Z, "sqeuclidean")
    scale = (2.0 * pi) ** (-p_z / 2.0) * bandwidth ** (-p_z)
    kt = scale * np.exp(-0.5 * sq / bandwidth**2)
    np.fill_diagonal(kt, 0.0)
    return kt


def wmd_lambda(aux: np.ndarray, ktilde: np.ndarray) -> float:
    """Smallest real eigenvalue of (E_n[Y*'Y*])^-1 E_n[Ktilde_ij Y_i*'Y_j*].

    ``aux`` stacks the outcome and covariates row-wise as Y* = [y, X]. The
    product matrix is generally non-symmetric; eigenvalues whose imaginary
    part exceeds 1e-8 * |real| + 1e-12 are treated as complex noise and
    excluded. Having no admissible real eigenvalue is reported as an error
    rather than silently patched.
    """
    aux = np.asarray(aux, dtype=np.float64)
    n = aux.shape[0]
    M = aux.T @ aux / n
    N = aux.T @ ktilde @ aux / (n * n)
    try:
        P = np.linalg.solve(M, N)
    except np.linalg.LinAlgError as exc:
        raise KernelScalingError("E_n[Y*'Y*] is singular; wmd scaling undefined") from exc
    ev = np.linalg.eigvals(P)
    admissible = np.abs(ev.imag) < 1e-8 * np.abs(ev.real) + 1e-12
    if not admissible.any():
        raise KernelScalingError(
            "no admissible real eigenvalue when solving for the wmd diagonal"
        )
    return float(ev.real[admissible].min())


def kernel_matrix(Z: np.ndarray, spec: KernelSpec, aux: np.ndarray | None = None) -> KernelMatrix:
    """Evaluate the selected kernel on every ordered pair of Z rows.

    ``aux`` supplies the [y, X] block required by the wmd kernel and is
    ignored otherwise. The returned matrix is exactly symmetric.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if Z.ndim != 2:
        raise ValueError("Z must be an n x p_z matrix")
    if not np.all(np.isfinite(Z)):
        raise ValueError("Z contains non-finite entries")
    meta: dict = {}
    if spec.id == "mmd":
        values = _mmd_values(Z)
    elif spec.id == "iiv":
        values, V = _iiv_values(Z)
        meta["v_z"] = V
    elif spec.id == "dl":
        values = _dl_values(Z)
    elif spec.id == "esc6":
        values = _esc6_values(Z)
        meta["constant"] = esc6_constant(Z.shape[1])
    elif spec.id == "wmd":
        if aux is None:
            raise ValueError("the wmd kernel requires aux=[y, X] alongside Z")
        aux = np.atleast_2d(np.asarray(aux, dtype=np.float64))
        if aux.shape[0] != Z.shape[0]:
            raise ValueError("aux must be row-aligned with Z")
        values = _wmd_base_density(Z, spec.bandwidth)
        lam = wmd_lambda(aux, values)
        np.fill_diagonal(values, -lam)
        meta["lambda"] = lam
        meta["bandwidth"] = spec.bandwidth
    else:  # pragma: no cover - KernelSpec already validated
        raise ValueError(f"unhandled kernel {spec.id!r}")
    values = 0.5 * (values + values.T)
    return KernelMatrix(values=values, spec=spec, meta=meta)


def _pair_values(spec: KernelSpec, p_z: int, draws: int, seed: int) -> np.ndarray:
    """Kernel evaluated on independent standard-normal pairs (Z, Z')."""
    rng = child_rng(seed, 0)
    A = rng.standard_normal((draws, p_z))
    B = rng.standard_normal((draws, p_z))
    if spec.id == "mmd":
        return -np.linalg.norm(A - B, axis=1)
    if spec.id == "iiv":
        V = _z_covariance(np.vstack([A, B]))
        L = cholesky(V, lower=True)
        W = solve_triangular(L, (A - B).T, lower=True).T
        return np.exp(-0.5 * np.einsum("ij,ij->i", W, W))
    if spec.id == "wmd":
        h = spec.bandwidth
        D = (A - B) / h
        scale = (2.0 * pi) ** (-p_z / 2.0) * h ** (-p_z)
        return scale * np.exp(-0.5 * np.einsum("ij,ij->i", D, D))
    # dl and esc6 depend on the sample; evaluate against a fixed reference
    # draw from the same N(0, I) design.
    R = child_rng(seed, 1).standard_normal((_REF_SIZE, p_z))
    if spec.id == "dl":
        out = np.empty(draws)
        step = max(1, int(2.0e8 / max(1, _REF_SIZE * p_z)))
        for i0 in range(0, draws, step):
            ia = np.all(A[i0 : i0 + step, None, :] <= R[None, :, :], axis=2)
            ib = np.all(B[i0 : i0 + step, None, :] <= R[None, :, :], axis=2)
            out[i0 : i0 + step] = np.mean(ia & ib, axis=1)
        return out
    if spec.id == "esc6":
        const = esc6_constant(p_z)
        out = np.empty(draws)
        step = max(1, int(4.0e7 / max(1, _REF_SIZE * p_z)))
        for i0 in range(0, draws, step):
            U = A[i0 : i0 + step, None, :] - R[None, :, :]
            V = B[i0 : i0 + step, None, :] - R[None, :, :]
            num = np.einsum("clp,clp->cl", U, V)
            den = np.sqrt(np.einsum("clp,clp->cl", U, U) * np.einsum("clp,clp->cl", V, V))
            C = np.clip(num / den, -1.0, 1.0)
            out[i0 : i0 + step] = const * np.mean(np.abs(pi - np.arccos(C)), axis=1)
        return out
    raise ValueError(f"unhandled kernel {spec.id!r}")  # pragma: no cover


def kernel_sd_mc(spec: KernelSpec, p_z: int, draws: int, seed: int) -> float:
    """Monte Carlo standard deviation of K(Z, Z') under Z ~ N(0, I_pz).

    This is the degeneracy diagnostic: multiplicative kernels (iiv, dl, wmd)
    have standard deviations that vanish rapidly in p_z, while the mmd and
    esc6 values stay on a stable scale.
    """
    if p_z < 1:
        raise ValueError("p_z must be at least 1")
    if draws < 1000:
        raise ValueError("need at least 1000 draws for a usable estimate")
    return float(np.std(_pair_values(spec, p_z, draws, seed), ddof=1))


def kernel_sd_report(spec: KernelSpec, p_z: int, draws: int, seed: int) -> tuple[float, float]:
    """Kernel sd estimate together with its own Monte Carlo standard error.

    The standard error uses the moment-based variance of the sample standard
    deviation, var(s^2) ~= (m4 - m2^2 (n-3)/(n-1)) / n mapped through the
    square root.
    """
    if p_z < 1:
        raise ValueError("p_z must be at least 1")
    if draws < 1000:
        raise ValueError("need at least 1000 draws for a usable estimate")
    vals = _pair_values(spec, p_z, draws, seed)
    sd = float(np.std(vals, ddof=1))
    centered = vals - vals.mean()
    m2 = float(np.mean(centered**2))
    m4 = float(np.mean(centered**4))
    var_s2 = max(m4 - m2 * m2 * (draws - 3) / (draws - 1), 0.0) / draws
    stderr = float(np.sqrt(var_s2) / (2.0 * sd)) if sd > 0 else 0.0
    return sd, stderr
