"""OLS with absorbed fixed effects and cluster-robust (CR1) inference."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from ..errors import InferenceError, InputError, RankDeficientError
from ..panel import PanelDataset
from .fe import Grouping, absorbed_dof, as_groupings, within_transform
from .results import EstimateResult

# column-name -> frame column for the fixed effects a caller may request
FE_COLUMNS = {"unit": "unit_id", "period": "period", "age": "age_years"}
DEFAULT_FE = ("unit", "period")

_RANK_TOL = 1e-10


@dataclass
class DesignMatrix:
    """Regressors plus the fixed-effect label vectors to absorb."""

    names: list[str]
    X: np.ndarray
    fe_groups: list = field(default_factory=list)
    fe_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        if self.X.shape[1] != len(self.names):
            raise InputError("design column count does not match names")

    @classmethod
    def from_panel(
        cls, ds: PanelDataset, columns: dict[str, np.ndarray], fe: Sequence[str] = DEFAULT_FE
    ) -> "DesignMatrix":
        names = list(columns)
        X = np.column_stack([np.asarray(columns[n], dtype=np.float64) for n in names]) if names else np.empty((len(ds), 0))
        groups, fe_names = [], []
        for key in fe:
            if key not in FE_COLUMNS:
                raise InputError(f"unknown fixed effect {key!r}; choose from {sorted(FE_COLUMNS)}")
            groups.append(ds.frame[FE_COLUMNS[key]].to_numpy())
            fe_names.append(key)
        if not fe:
            X = np.column_stack([np.ones(len(ds)), X])
            names = ["const"] + names
        return cls(names, X, groups, fe_names)


def treatment_indicator(ds: PanelDataset) -> np.ndarray:
    f = ds.frame
    return (f["treated"].to_numpy() * f["post"].to_numpy()).astype(np.float64)


def fit(
    y: np.ndarray,
    design: DesignMatrix,
    clusters,
    *,
    spec: str = "ols",
    tol: float = 1e-10,
) -> EstimateResult:
    """Within-transform, drop collinear columns, solve by QR, attach CR1 covariance.

    Columns that vanish after absorbing the fixed effects, or that are
    linearly dependent on earlier columns, are dropped with a warning and
    listed in ``diagnostics['dropped']``. If nothing estimable is left the
    call raises :class:`RankDeficientError`.
    """
    groups = as_groupings(design.fe_groups)
    stacked = np.column_stack([np.asarray(y, dtype=np.float64), design.X])
    stacked = within_transform(stacked, groups, tol=tol)
    y_t, X_t = stacked[:, 0], stacked[:, 1:]

    keep, dropped = _independent_columns(X_t, design.X, design.names)
    if not keep:
        raise RankDeficientError(dropped)
    if dropped:
        warnings.warn(f"dropping collinear column(s): {', '.join(dropped)}", stacklevel=3)
    X_k = X_t[:, keep]
    names = [design.names[j] for j in keep]

    Q, R = np.linalg.qr(X_k)
    beta = scipy.linalg.solve_triangular(R, Q.T @ y_t)
    resid = y_t - X_k @ beta

    cl = clusters if isinstance(clusters, Grouping) else Grouping(clusters)
    result = EstimateResult(
        spec=spec,
        names=names,
        params=beta,
        vcov=np.full((len(names), len(names)), np.nan),
        nobs=len(y_t),
        cluster_count=cl.n_levels,
        diagnostics={"dropped": dropped, "fixed_effects": list(design.fe_names)},
        design=X_k,
        resid=resid,
        dof_absorbed=absorbed_dof(groups, cl),
    )
    result.vcov = cluster_robust_vcov(result, cl)
    return result


def _independent_columns(X_t, X_raw, names):
    keep, dropped = [], []
    if X_t.shape[1] == 0:
        return keep, dropped
    scale = np.maximum(np.linalg.norm(X_raw, axis=0), 1.0)
    live = [j for j in range(X_t.shape[1]) if np.linalg.norm(X_t[:, j]) > _RANK_TOL * scale[j] * 1e2]
    dropped = [names[j] for j in range(X_t.shape[1]) if j not in live]
    if not live:
        return keep, dropped
    sub = X_t[:, live] / np.linalg.norm(X_t[:, live], axis=0)
    _, R, piv = scipy.linalg.qr(sub, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int((diag > 1e-9 * diag[0]).sum())
    good = sorted(live[p] for p in piv[:rank])
    dropped += [names[live[p]] for p in piv[rank:]]
    return good, [n for n in names if n in set(dropped)]


def cluster_robust_vcov(result: EstimateResult, cluster_ids) -> np.ndarray:
    """CR1 sandwich covariance.

    ``(X'X)^-1 (sum_g X_g' u_g u_g' X_g) (X'X)^-1 * G/(G-1) * (N-1)/(N-K)``
    where ``K`` counts the regressors plus absorbed fixed-effect levels that
    are not nested in the clusters.
    """
    if result.design is None or result.resid is None:
        raise InferenceError("result does not carry its design and residuals")
    cl = cluster_ids if isinstance(cluster_ids, Grouping) else Grouping(cluster_ids)
    G = cl.n_levels
    if G < 2:
        raise InferenceError("cluster-robust covariance needs at least two clusters")
    X, u = result.design, result.resid
    n, k = X.shape
    scores = cl.means(X * u[:, None]) * cl.counts[:, None]
    meat = scores.T @ scores
    R = np.linalg.qr(X, mode="r")
    R_inv = scipy.linalg.solve_triangular(R, np.eye(k))
    bread = R_inv @ R_inv.T
    k_total = k + result.dof_absorbed
    if n - k_total <= 0:
        raise InferenceError("no residual degrees of freedom")
    factor = G / (G - 1) * (n - 1) / (n - k_total)
    V = factor * bread @ meat @ bread
    return 0.5 * (V + V.T)


def twfe_ols(
    ds: PanelDataset,
    regressors: Optional[DesignMatrix] = None,
    *,
    fe: Sequence[str] = DEFAULT_FE,
    cluster: str = "cluster_id",
) -> EstimateResult:
    """Regress ``log(outcome + 1)`` on the regressors with absorbed fixed effects.

    Without ``regressors`` the design is the single treatment indicator
    ``D = treated * post``. ``fe=()`` gives pooled OLS with an intercept.
    """
    if regressors is None:
        regressors = DesignMatrix.from_panel(ds, {"D": treatment_indicator(ds)}, fe=fe)
    return fit(ds.log_outcome(), regressors, ds.frame[cluster].to_numpy(), spec="twfe_ols")
