"""Dataset model: CSV ingestion, column roles, and validation.

A :class:`Dataset` bundles the outcome, the covariate matrix (always led by
an all-ones intercept column), and the instrument matrix. Instruments may
overlap the covariates, and the no-excluded-instrument case is first class:
Z can consist entirely of columns that also appear in X.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "ValidationError",
    "INTERCEPT_NAME",
    "load_csv",
    "save_csv",
    "standardize_instruments",
]

INTERCEPT_NAME = "const"


class ValidationError(ValueError):
    """Raised when data violate a documented sample invariant."""


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """Immutable estimation sample.

    Attributes
    ----------
    y : (n,) outcome vector.
    X : (n, p_x) covariate matrix; column 0 is identically 1 (intercept).
    Z : (n, p_z) instrument matrix; columns may coincide with columns of X.
    x_names, z_names : column labels, aligned with X and Z.
    endog_mask : (p_x,) boolean; True marks endogenous covariate columns.
        Always False on the intercept.
    """

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    x_names: tuple[str, ...]
    z_names: tuple[str, ...]
    endog_mask: np.ndarray

    def __post_init__(self):
        y = _readonly(np.asarray(self.y, dtype=np.float64).reshape(-1))
        X = _readonly(np.atleast_2d(np.asarray(self.X, dtype=np.float64)))
        Z = _readonly(np.atleast_2d(np.asarray(self.Z, dtype=np.float64)))
        mask = np.array(self.endog_mask, dtype=bool).reshape(-1)
        mask.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "x_names", tuple(self.x_names))
        object.__setattr__(self, "z_names", tuple(self.z_names))
        object.__setattr__(self, "endog_mask", mask)
        self._validate()

    def _validate(self) -> None:
        n = self.y.shape[0]
        if self.X.ndim != 2 or self.Z.ndim != 2:
            raise ValidationError("X and Z must be two-dimensional matrices")
        if self.X.shape[0] != n or self.Z.shape[0] != n:
            raise ValidationError(
                f"row mismatch: y has {n} rows, X has {self.X.shape[0]}, Z has {self.Z.shape[0]}"
            )
        p_x, p_z = self.X.shape[1], self.Z.shape[1]
        if p_z < 1:
            raise ValidationError("at least one instrument column is required")
        if n < 3 or n < p_x + 2:
            raise ValidationError(
                f"need n >= max(3, p_x + 2); got n={n}, p_x={p_x} "
                "(pairwise statistics need multiple distinct pairs)"
            )
        if not np.all(self.X[:, 0] == 1.0):
            raise ValidationError("X column 0 must be identically 1 (intercept)")
        for name, arr in (("y", self.y), ("X", self.X), ("Z", self.Z)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"non-finite entries in {name}")
        spread = np.max(self.Z, axis=0) - np.min(self.Z, axis=0)
        if np.any(spread == 0.0):
            j = int(np.argmin(spread))
            raise ValidationError(
                f"instrument column {self.z_names[j]!r} is constant; "
                "zero distance variation is degenerate"
            )
        if len(self.x_names) != p_x or len(self.z_names) != p_z:
            raise ValidationError("column label lists must match matrix widths")
        if self.endog_mask.shape[0] != p_x:
            raise ValidationError("endog_mask must have one flag per X column")
        if self.endog_mask[0]:
            raise ValidationError("the intercept column cannot be endogenous")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p_x(self) -> int:
        return self.X.shape[1]

    @property
    def p_z(self) -> int:
        return self.Z.shape[1]

    def replace_z(self, Z: np.ndarray) -> "Dataset":
        """New Dataset with the instrument matrix swapped; everything else kept."""
        return Dataset(self.y, self.X, Z, self.x_names, self.z_names, self.endog_mask)


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file, expected a header row") from None
        rows = [row for row in reader if row]
    return [h.strip() for h in header], rows


def load_csv(
    path,
    y_col: str,
    x_cols: list[str] | tuple[str, ...],
    z_cols: list[str] | tuple[str, ...],
    endog_cols: list[str] | tuple[str, ...] = (),
) -> Dataset:
    """Read a header CSV and assemble a validated Dataset.

    An intercept column is generated and prepended to the covariates, so
    ``x_cols`` lists only the substantive covariates (it may be empty).
    ``z_cols`` may overlap ``x_cols`` (included instruments), and no column
    needs to be an excluded instrument. ``endog_cols`` must be a subset of
    ``x_cols``.
    """
    header, rows = _read_table(path)
    index = {name: i for i, name in enumerate(header)}

    wanted = [y_col, *x_cols, *z_cols]
    for name in wanted:
        if name not in index:
            raise ValidationError(f"{path}: column {name!r} not found (header: {header})")
    for name in endog_cols:
        if name not in x_cols:
            raise ValidationError(
                f"endogenous column {name!r} must be listed among the covariates"
            )

    def column(name: str) -> np.ndarray:
        j = index[name]
        out = np.empty(len(rows))
        for i, row in enumerate(rows):
            cell = row[j].strip() if j < len(row) else ""
            try:
                out[i] = float(cell)
            except ValueError:
                raise ValidationError(
                    f"{path}: cannot parse {cell!r} as a number "
                    f"(column {name!r}, data row {i + 1})"
                ) from None
        return out

    n = len(rows)
    y = column(y_col)
    X = np.column_stack([np.ones(n)] + [column(c) for c in x_cols])
    Z = np.column_stack([column(c) for c in z_cols]) if z_cols else np.empty((n, 0))
    endog = set(endog_cols)
    mask = np.array([False] + [c in endog for c in x_cols])
    return Dataset(y, X, Z, (INTERCEPT_NAME, *x_cols), tuple(z_cols), mask)


def save_csv(ds: Dataset, path, y_col: str = "y") -> None:
    """Write a Dataset back to CSV with round-trip-exact float formatting.

    Emits one column per distinct variable: the outcome, the non-intercept
    covariates, and any instrument columns not already present among the
    covariates. Loading the result with the same column roles reproduces the
    Dataset values bit for bit.
    """
    x_only = list(ds.x_names[1:])
    z_extra = [name for name in ds.z_names if name not in ds.x_names]
    header = [y_col, *x_only, *z_extra]
    zpos = {name: j for j, name in enumerate(ds.z_names)}
    cols = [ds.y]
    cols += [ds.X[:, 1 + j] for j in range(len(x_only))]
    cols += [ds.Z[:, zpos[name]] for name in z_extra]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n):
            writer.writerow([repr(float(c[i])) for c in cols])


def standardize_instruments(ds: Dataset, method: str = "none") -> Dataset:
    """Optionally robustify instruments with a bounded one-to-one map.

    ``atan`` applies the element-wise arctangent to Z only, mapping every
    entry into (-pi/2, pi/2); y and X are untouched. ``none`` returns the
    dataset unchanged.
    """
    if method == "none":
        return ds
    if method == "atan":
        return ds.replace_z(np.arctan(ds.Z))
    raise ValueError(f"unknown standardization method {method!r}; use 'none' or 'atan'")
