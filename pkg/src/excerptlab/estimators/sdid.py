"""Synthetic difference-in-differences with fixed-weight jackknife standard errors."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import _kernels
from ..errors import ConvergenceError, InputError
from ..panel import PanelDataset
from .results import EstimateResult


@dataclass
class SdidWeights:
    unit_weights: np.ndarray
    time_weights: np.ndarray
    zeta: float
    control_units: list[str]
    pre_periods: list[int]
    unit_gap: float = 0.0
    time_gap: float = 0.0
    unit_iterations: int = 0
    time_iterations: int = 0


def wide_outcomes(ds: PanelDataset) -> tuple[np.ndarray, list[str], list[int], np.ndarray]:
    """Balanced ``units x periods`` matrix of ``log(outcome + 1)`` plus the treated mask."""
    f = ds.frame
    if f.groupby("unit_id")["period"].nunique().min() != len(ds.periods):
        raise InputError("synthetic DiD needs a balanced panel")
    wide = f.assign(y=ds.log_outcome()).pivot(index="unit_id", columns="period", values="y")
    treated = f.groupby("unit_id")["treated"].first().reindex(wide.index).to_numpy() == 1
    return wide.to_numpy(), list(wide.index), [int(p) for p in wide.columns], treated


def simplex_weights(
    xt: np.ndarray,
    target: np.ndarray,
    eta: float,
    *,
    intercept: bool = True,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    record: bool = False,
):
    """Minimize ``||xt.T @ w + c - target||^2 + eta ||w||^2`` over simplex ``w`` and free ``c``.

    Returns ``(w, gap, iterations, trace)``; raises :class:`ConvergenceError`
    with the remaining duality gap if ``max_iter`` is exhausted.
    """
    xt = np.asarray(xt, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if intercept:
        xt = xt - xt.mean(axis=1, keepdims=True)
        target = target - target.mean()
    n = xt.shape[0]
    w0 = np.full(n, 1.0 / n)
    w, _, iters, trace = _kernels.simplex_lsq(xt, target, float(eta), w0, tol, max_iter, record)
    resid = xt.T @ w - target
    grad = 2.0 * (xt @ resid + eta * w)
    gap = float(grad @ w - grad.min())
    f0_resid = xt.T @ w0 - target
    threshold = tol * max(float(f0_resid @ f0_resid + eta * (w0 @ w0)), 1.0)
    if iters >= max_iter and gap > threshold:
        raise ConvergenceError(
            f"Frank-Wolfe did not converge in {max_iter} iterations (duality gap {gap:.3e})", residual=gap
        )
    return w, gap, iters, trace


def synthetic_did(
    ds: PanelDataset,
    *,
    zeta: Optional[float] = None,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    jackknife: bool = True,
) -> tuple[EstimateResult, SdidWeights]:
    """Synthetic DiD estimate of the average effect on treated units after the policy.

    Unit weights match the pre-policy treated average path up to a constant,
    with ridge penalty ``zeta**2 * T_pre``; by default
    ``zeta = (N_treated * T_post) ** 0.25 * sd(control first differences before the policy)``.
    Time weights match the post-policy control average up to a constant.
    Standard errors come from the leave-one-unit-out jackknife holding the
    weights fixed (unit weights renormalized).
    """
    Y, units, periods, treated = wide_outcomes(ds)
    pre = np.array([p < ds.policy_period for p in periods])
    n_tr, n_co = int(treated.sum()), int((~treated).sum())
    t_pre, t_post = int(pre.sum()), int((~pre).sum())
    if n_co < 2 or t_pre < 2:
        raise InputError("synthetic DiD needs at least two control units and two pre-periods")
    if n_tr == 0 or t_post == 0:
        raise InputError("synthetic DiD needs treated units and post-policy periods")

    Y_co, Y_tr = Y[~treated], Y[treated]
    co_pre, co_post = Y_co[:, pre], Y_co[:, ~pre].mean(axis=1)
    tr_pre_mean = Y_tr[:, pre].mean(axis=0)
    if zeta is None:
        sigma = float(np.std(np.diff(co_pre, axis=1), ddof=1))
        zeta = (n_tr * t_post) ** 0.25 * sigma

    omega, u_gap, u_it, _ = simplex_weights(co_pre, tr_pre_mean, zeta**2 * t_pre, tol=tol, max_iter=max_iter)
    lam, t_gap, t_it, _ = simplex_weights(co_pre.T, co_post, 0.0, tol=tol, max_iter=max_iter)

    # a_i: post mean minus lambda-weighted pre path, per unit
    a = Y[:, ~pre].mean(axis=1) - Y[:, pre] @ lam
    a_tr, a_co = a[treated], a[~treated]
    tau = float(a_tr.mean() - omega @ a_co)

    var = np.nan
    if jackknife:
        var = _jackknife_variance(a_tr, a_co, omega)

    weights = SdidWeights(
        unit_weights=omega,
        time_weights=lam,
        zeta=float(zeta),
        control_units=[u for u, t in zip(units, treated) if not t],
        pre_periods=[p for p, is_pre in zip(periods, pre) if is_pre],
        unit_gap=u_gap,
        time_gap=t_gap,
        unit_iterations=u_it,
        time_iterations=t_it,
    )
    result = EstimateResult(
        spec="synthetic_did",
        names=["sdid"],
        params=np.array([tau]),
        vcov=np.array([[var]]),
        nobs=Y.size,
        cluster_count=len(units),
        diagnostics={"zeta": float(zeta), "se_method": "jackknife", "n_treated": n_tr, "n_control": n_co},
    )
    return result, weights


def _jackknife_variance(a_tr: np.ndarray, a_co: np.ndarray, omega: np.ndarray) -> float:
    n_tr = len(a_tr)
    base_tr = a_tr.mean()
    base_co = float(omega @ a_co)
    reps = []
    if n_tr > 1:
        reps.append((n_tr * base_tr - a_tr) / (n_tr - 1) - base_co)
    else:
        warnings.warn("jackknife skips treated units: only one treated unit", stacklevel=3)
    keep = omega < 1.0 - 1e-12
    reps.append(base_tr - (base_co - omega[keep] * a_co[keep]) / (1.0 - omega[keep]))
    reps = np.concatenate(reps)
    n = len(reps)
    if n < 2:
        return np.nan
    return float((n - 1) / n * np.sum((reps - reps.mean()) ** 2))
