"""Compositional data containers and transforms.

A composition is a vector of positive parts that sum to one. This module
validates raw vectors and matrices, bundles observations with group labels
and component names, caches the sufficient statistics every fitting routine
consumes, and provides the classical log-ratio transforms plus barycentric
coordinates for ternary plots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDataError,
    DimensionMismatchError,
    EmptyGroupError,
    InputError,
    NotNormalizedError,
    TooFewComponentsError,
    ZeroComponentError,
)

__all__ = [
    "Composition",
    "CompositionDataset",
    "SufficientStats",
    "validate",
    "clr",
    "alr",
    "sample_correlation",
    "ternary_coordinates",
]

DEFAULT_SUM_TOLERANCE = 1.0e-6


def _row_tag(index: int | None) -> str:
    return "" if index is None else f" (row {index})"


def validate(x, sum_tolerance: float = DEFAULT_SUM_TOLERANCE) -> np.ndarray:
    """Check a composition vector or matrix and return it exactly normalized.

    Entries must be finite and strictly positive, and each row must sum to one
    within ``sum_tolerance``. Rows are then rescaled so they sum to one at
    machine precision. Returns a fresh float array, 1-D in, 1-D out.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim not in (1, 2):
        raise InputError(f"expected a vector or matrix, got ndim={arr.ndim}")
    vector = arr.ndim == 1
    rows = arr[None, :] if vector else arr
    if rows.shape[-1] < 2:
        raise TooFewComponentsError(
            f"a composition needs at least 2 parts, got {rows.shape[-1]}"
        )
    if rows.shape[0] == 0:
        raise EmptyGroupError("no observations")

    finite = np.isfinite(rows)
    if not finite.all():
        bad = int(np.nonzero(~finite.all(axis=1))[0][0])
        raise InputError(f"non-finite entry{_row_tag(None if vector else bad)}")
    nonpos = rows <= 0.0
    if nonpos.any():
        bad = int(np.nonzero(nonpos.any(axis=1))[0][0])
        raise ZeroComponentError(
            "components must be strictly positive; zeros need explicit "
            f"replacement before analysis{_row_tag(None if vector else bad)}",
            row=None if vector else bad,
        )
    sums = rows.sum(axis=1)
    off = np.abs(sums - 1.0) > sum_tolerance
    if off.any():
        bad = int(np.nonzero(off)[0][0])
        raise NotNormalizedError(
            f"row sum {sums[bad]:.8g} differs from 1 by more than "
            f"{sum_tolerance:g}{_row_tag(None if vector else bad)}",
            row=None if vector else bad,
        )
    out = rows / sums[:, None]
    return out[0] if vector else out


@dataclass(frozen=True)
class Composition:
    """A single validated composition."""

    values: np.ndarray
    sum_tolerance: float = DEFAULT_SUM_TOLERANCE

    def __post_init__(self):
        vals = validate(self.values, self.sum_tolerance)
        if vals.ndim != 1:
            raise DimensionMismatchError("Composition wraps a single vector")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def n_components(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SufficientStats:
    """Per-group summaries that the Dirichlet likelihood depends on.

    mean_log carries the likelihood, mean and mean_sq feed moment-based
    initialization and degeneracy checks.
    """

    n: int
    mean_log: np.ndarray
    mean: np.ndarray
    mean_sq: np.ndarray

    def __post_init__(self):
        for name in ("mean_log", "mean", "mean_sq"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise DimensionMismatchError(f"{name} must be a vector")
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (self.mean_log.shape == self.mean.shape == self.mean_sq.shape):
            raise DimensionMismatchError("sufficient statistic shapes differ")
        if self.n < 1:
            raise EmptyGroupError("sufficient statistics need n >= 1")

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "SufficientStats":
        m = validate(matrix)
        if m.ndim == 1:
            m = m[None, :]
        return cls(
            n=m.shape[0],
            mean_log=np.log(m).mean(axis=0),
            mean=m.mean(axis=0),
            mean_sq=(m * m).mean(axis=0),
        )

    @property
    def n_components(self) -> int:
        return self.mean_log.shape[0]


@dataclass(frozen=True)
class CompositionDataset:
    """Observations with group labels and component names.

    matrix holds one composition per row (validated and renormalized),
    labels assigns each row to a group, components names the columns.
    """

    matrix: np.ndarray
    labels: tuple[str, ...]
    components: tuple[str, ...]
    sum_tolerance: float = field(default=DEFAULT_SUM_TOLERANCE, repr=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if mat.ndim == 1:
            mat = mat[None, :]
        mat = validate(mat, self.sum_tolerance)
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "labels", tuple(str(v) for v in self.labels))
        object.__setattr__(self, "components", tuple(str(c) for c in self.components))
        if len(self.labels) != mat.shape[0]:
            raise DimensionMismatchError(
                f"{len(self.labels)} labels for {mat.shape[0]} rows"
            )
        if len(self.components) != mat.shape[1]:
            raise DimensionMismatchError(
                f"{len(self.components)} component names for {mat.shape[1]} columns"
            )
        if len(set(self.components)) != len(self.components):
            raise InputError("component names must be unique")

    @classmethod
    def from_arrays(cls, matrix, labels, components=None, **kw) -> "CompositionDataset":
        mat = np.asarray(matrix, dtype=float)
        if mat.ndim == 1:
            mat = mat[None, :]
        if components is None:
            components = tuple(f"c{j + 1}" for j in range(mat.shape[1]))
        return cls(matrix=mat, labels=tuple(labels), components=tuple(components), **kw)

    @property
    def n_observations(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_components(self) -> int:
        return self.matrix.shape[1]

    @property
    def groups(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for lab in self.labels:
            seen.setdefault(lab, None)
        return tuple(seen)

    def group_matrix(self, label: str) -> np.ndarray:
        mask = np.array([lab == label for lab in self.labels])
        if not mask.any():
            raise EmptyGroupError(f"no observations with group label {label!r}")
        return self.matrix[mask]

    def group_stats(self, label: str) -> SufficientStats:
        return SufficientStats.from_matrix(self.group_matrix(label))

    def pooled_stats(self) -> SufficientStats:
        return SufficientStats.from_matrix(self.matrix)

    def component_index(self, name: str) -> int:
        try:
            return self.components.index(name)
        except ValueError:
            raise InputError(
                f"unknown component {name!r}; dataset has {self.components}"
            ) from None


def clr(x) -> np.ndarray:
    """Centered log-ratio transform: log x minus its rowwise mean."""
    arr = validate(x)
    logs = np.log(arr)
    return logs - logs.mean(axis=-1, keepdims=True)


def alr(x, ref: int = -1) -> np.ndarray:
    """Additive log-ratio transform against the ``ref`` component.

    Returns the K-1 log ratios log(x_j / x_ref) for j != ref, keeping the
    original component order.
    """
    arr = validate(x)
    k = arr.shape[-1]
    ref_idx = ref % k
    logs = np.log(arr)
    out = logs - logs[..., ref_idx : ref_idx + 1]
    keep = [j for j in range(k) if j != ref_idx]
    return out[..., keep]


def sample_correlation(data, pooled: bool = True) -> np.ndarray:
    """Pearson correlation matrix of component proportions.

    ``data`` is a CompositionDataset or a plain matrix. With ``pooled`` the
    groups' rows are concatenated as-is; otherwise each group is centered at
    its own mean first, so the correlations describe within-group variation.
    """
    if isinstance(data, CompositionDataset):
        matrix = data.matrix
        if pooled:
            centered = matrix - matrix.mean(axis=0)
        else:
            centered = np.empty_like(matrix)
            for lab in data.groups:
                mask = np.array([v == lab for v in data.labels])
                sub = matrix[mask]
                centered[mask] = sub - sub.mean(axis=0)
    else:
        matrix = validate(np.asarray(data, dtype=float))
        if matrix.ndim == 1:
            matrix = matrix[None, :]
        centered = matrix - matrix.mean(axis=0)

    if centered.shape[0] < 2:
        raise DegenerateDataError("correlation needs at least 2 observations")
    denom = np.sqrt((centered * centered).sum(axis=0))
    if np.any(denom <= 0.0):
        j = int(np.nonzero(denom <= 0.0)[0][0])
        raise DegenerateDataError(f"component {j} has zero variance")
    scaled = centered / denom
    corr = scaled.T @ scaled
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def ternary_coordinates(points) -> np.ndarray:
    """Map 3-part compositions to 2-D coordinates in the unit triangle.

    Vertices sit at (0,0), (1,0) and (0.5, sqrt(3)/2) for the first, second
    and third part respectively. Accepts a vector or matrix; rows are
    renormalized before mapping.
    """
    arr = validate(points)
    if arr.shape[-1] != 3:
        raise DimensionMismatchError(
            f"ternary coordinates need exactly 3 parts, got {arr.shape[-1]}"
        )
    b = np.atleast_2d(arr)
    xy = np.empty((b.shape[0], 2))
    xy[:, 0] = b[:, 1] + 0.5 * b[:, 2]
    xy[:, 1] = (np.sqrt(3.0) / 2.0) * b[:, 2]
    return xy[0] if arr.ndim == 1 else xy
