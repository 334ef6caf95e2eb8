"""Absorbing categorical fixed effects by alternating projections."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import pandas as pd

from ..errors import ConvergenceError, InputError


class Grouping:
    """Integer codes and level counts for one categorical label vector."""

    __slots__ = ("codes", "counts", "n_levels")

    def __init__(self, labels):
        codes, uniques = pd.factorize(np.asarray(labels), sort=False)
        if (codes < 0).any():
            raise InputError("fixed-effect labels contain missing values")
        self.codes = codes.astype(np.intp)
        self.n_levels = len(uniques)
        self.counts = np.bincount(self.codes, minlength=self.n_levels).astype(np.float64)

    def means(self, X: np.ndarray) -> np.ndarray:
        out = np.empty((self.n_levels, X.shape[1]))
        for j in range(X.shape[1]):
            out[:, j] = np.bincount(self.codes, weights=X[:, j], minlength=self.n_levels)
        out /= self.counts[:, None]
        return out

    def nested_in(self, other: "Grouping") -> bool:
        """True if every level of ``self`` sits inside a single level of ``other``."""
        pairs = pd.DataFrame({"a": self.codes, "b": other.codes}).drop_duplicates()
        return len(pairs) == self.n_levels


def as_groupings(fe_groups: Sequence) -> list[Grouping]:
    return [g if isinstance(g, Grouping) else Grouping(g) for g in fe_groups]


def within_transform(X, fe_groups: Sequence, tol: float = 1e-10, max_iter: int = 10000) -> np.ndarray:
    """Residualize the columns of ``X`` on the indicator spaces of ``fe_groups``.

    Each sweep subtracts group means for every grouping in turn; iteration
    stops once the largest absolute change in a sweep drops below ``tol``.
    A single grouping is exact after one pass.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` sweeps do not reach ``tol``; ``residual`` carries the
        last sweep's largest change.
    """
    X = np.array(X, dtype=np.float64)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    if not np.isfinite(X).all():
        raise InputError("within_transform needs finite input")
    groups = as_groupings(fe_groups)
    for g in groups:
        if len(g.codes) != X.shape[0]:
            raise InputError("fixed-effect label vector length does not match the data")
    if not groups or X.shape[1] == 0:
        return X[:, 0] if squeeze else X
    if len(groups) == 1:
        g = groups[0]
        X -= g.means(X)[g.codes]
        return X[:, 0] if squeeze else X

    def sweep(Z):
        change = 0.0
        for g in groups:
            m = g.means(Z)
            change = max(change, float(np.abs(m).max()))
            Z -= m[g.codes]
        return change

    # Irons-Tuck extrapolation after each pair of sweeps; convergence is judged on
    # plain sweeps only, so the stopping rule is unaffected.
    change = np.inf
    sweeps = 0
    while sweeps < max_iter:
        X0 = X.copy()
        change = sweep(X)
        sweeps += 1
        if change < tol:
            return X[:, 0] if squeeze else X
        X1 = X.copy()
        change = sweep(X)
        sweeps += 1
        if change < tol:
            return X[:, 0] if squeeze else X
        d1 = X1 - X0
        d2 = X - X1
        dd = d2 - d1
        denom = np.einsum("ij,ij->j", dd, dd)
        num = np.einsum("ij,ij->j", d2, dd)
        ok = denom > 0
        coef = np.where(ok, num / np.where(ok, denom, 1.0), 0.0)
        X -= d2 * coef
    raise ConvergenceError(
        f"alternating projections did not converge in {max_iter} sweeps (last change {change:.3e})",
        residual=change,
    )


def absorbed_dof(groups: Sequence[Grouping], clusters: Grouping | None = None) -> int:
    """Degrees of freedom used by the fixed effects, intercept included.

    Groupings nested within the clusters are skipped, since the cluster
    correction already accounts for them.
    """
    counted = [g for g in groups if clusters is None or not g.nested_in(clusters)]
    if not groups:
        return 0
    if not counted:
        return 1
    return sum(g.n_levels for g in counted) - (len(counted) - 1)
