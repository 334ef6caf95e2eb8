"""Difference-in-differences designs built on :func:`fit`."""

from __future__ import annotations

import warnings
from typing import Literal, Sequence

import numpy as np

from ..errors import InputError
from ..panel import PanelDataset
from .fe import Grouping
from .ols import DEFAULT_FE, DesignMatrix, fit, treatment_indicator
from .results import EstimateResult


def event_time(ds: PanelDataset) -> np.ndarray:
    return ds.frame["period"].to_numpy() - ds.policy_period


def event_study(
    ds: PanelDataset,
    k_min: int = -9,
    k_max: int = 8,
    reference_k: int = -1,
    *,
    fe: Sequence[str] = DEFAULT_FE,
    cluster: str = "cluster_id",
) -> EstimateResult:
    """Leads and lags of treatment relative to the policy period.

    Coefficient ``k=j`` is the treated-control gap ``j`` periods after the
    policy period, measured relative to the gap at ``reference_k``. Event
    times beyond the window are pooled into the end bins.
    """
    if not k_min <= reference_k <= k_max:
        raise InputError(f"reference_k={reference_k} outside [{k_min}, {k_max}]")
    rel = event_time(ds)
    present = set(np.unique(rel).tolist())
    if k_min not in present or k_max not in present:
        raise InputError(f"event window [{k_min}, {k_max}] not covered by panel periods")
    binned = np.clip(rel, k_min, k_max)
    treated = ds.frame["treated"].to_numpy()
    units = ds.frame["unit_id"].to_numpy()

    columns, bins, counts = {}, [], {}
    for k in range(k_min, k_max + 1):
        in_bin = (binned == k) & (treated == 1)
        counts[str(k)] = int(len(np.unique(units[in_bin])))
        if k == reference_k:
            continue
        name = f"k={k}"
        columns[name] = in_bin.astype(np.float64)
        bins.append((k, name))
    design = DesignMatrix.from_panel(ds, columns, fe=fe)
    result = fit(ds.log_outcome(), design, ds.frame[cluster].to_numpy(), spec="event_study")
    result.reference_label = f"k={reference_k}"
    result.diagnostics.update(bins=bins, n_treated_in_bin=counts, window=[k_min, k_max])
    return result


def dose_response(
    ds: PanelDataset,
    reference_decile: int = 1,
    *,
    fe: Sequence[str] = DEFAULT_FE,
    cluster: str = "cluster_id",
    n_bins: int = 10,
) -> EstimateResult:
    """Effect of each measurement decile relative to ``reference_decile``.

    Every observation contributes the decile of the excerpt it was exposed
    to; observations without a decile count as the reference. Deciles that
    never vary within units (for example never reached by a treated
    excerpt) cannot be identified; they are listed under
    ``diagnostics['unidentified']`` and their effect is zero by construction.
    """
    dose = ds.frame["dose_decile"].to_numpy()
    if np.isnan(dose).all():
        raise InputError("dose_decile column is empty")
    if not 1 <= reference_decile <= n_bins:
        raise InputError(f"reference decile {reference_decile} outside 1..{n_bins}")
    treated_post = treatment_indicator(ds) == 1
    units = ds.frame["unit_id"].to_numpy()

    columns, bins, counts = {}, [], {}
    for k in range(1, n_bins + 1):
        hit = dose == k
        counts[str(k)] = int(len(np.unique(units[hit & treated_post])))
        if k == reference_decile:
            continue
        if hit.any():
            columns[f"decile_{k}"] = hit.astype(np.float64)
        bins.append((k, f"decile_{k}"))
    if not columns:
        raise InputError("no decile other than the reference is observed")
    design = DesignMatrix.from_panel(ds, columns, fe=fe)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = fit(ds.log_outcome(), design, ds.frame[cluster].to_numpy(), spec="dose_response")
    unidentified = [name for _, name in bins if name not in result.coef]
    result.reference_label = f"decile_{reference_decile}"
    result.diagnostics.update(
        bins=bins,
        n_treated_in_bin=counts,
        unidentified=unidentified,
        missing_dose=int(np.isnan(dose).sum()),
    )
    return result


def interaction_did(
    ds: PanelDataset,
    moderator: Literal["popular_unit", "popular_artist"] = "popular_unit",
    *,
    fe: Sequence[str] = DEFAULT_FE,
    cluster: str = "cluster_id",
    strict: bool = True,
) -> EstimateResult:
    """Treatment effect with a 0/1 moderator: columns ``D``, ``D_x_M`` and ``Post_x_M``.

    ``D_x_M`` is the difference in effects between moderator levels. With
    ``strict=False`` a moderator lacking one level among treated units is
    tolerated and the fit reduces to the plain two-way model.
    """
    if moderator not in ("popular_unit", "popular_artist"):
        raise InputError(f"unknown moderator {moderator!r}")
    f = ds.frame
    m = f[moderator].to_numpy().astype(np.float64)
    levels = np.unique(m[f["treated"].to_numpy() == 1])
    if len(levels) < 2 and strict:
        raise InputError(f"moderator {moderator} takes a single value among treated units")
    d = treatment_indicator(ds)
    post = f["post"].to_numpy().astype(np.float64)
    columns = {"D": d, "D_x_M": d * m, "Post_x_M": post * m}
    design = DesignMatrix.from_panel(ds, columns, fe=fe)
    with warnings.catch_warnings():
        if not strict:
            warnings.simplefilter("ignore")
        result = fit(ds.log_outcome(), design, f[cluster].to_numpy(), spec=f"interaction_did[{moderator}]")
    result.diagnostics["moderator"] = moderator
    return result


def did_m(ds: PanelDataset, *, cluster: str = "cluster_id") -> EstimateResult:
    """Switch-period heterogeneity-robust DiD for a single adoption date.

    Mean change in ``log(outcome + 1)`` from the period before the policy to
    the policy period among treated units, minus the same change among
    controls. Units observed in only one of the two periods are skipped.
    The standard error comes from the estimator's influence function summed
    within clusters (delta method).
    """
    f = ds.frame
    before = ds.policy_period - 1
    if before not in ds.periods:
        raise InputError("did_m needs the period immediately before the policy period")
    y = ds.log_outcome()
    periods = f["period"].to_numpy()
    at, pre = periods == ds.policy_period, periods == before
    units = f["unit_id"].to_numpy()
    u_at = dict(zip(units[at], y[at]))
    u_pre = dict(zip(units[pre], y[pre]))
    treated_of = dict(zip(units, f["treated"].to_numpy()))
    cluster_of = dict(zip(units, f[cluster].to_numpy()))
    both = [u for u in u_at if u in u_pre]
    delta = np.array([u_at[u] - u_pre[u] for u in both])
    tr = np.array([treated_of[u] == 1 for u in both])
    n_tr, n_co = int(tr.sum()), int((~tr).sum())
    if n_tr == 0 or n_co == 0:
        raise InputError("did_m needs treated and control units observed around the switch")
    m_tr, m_co = delta[tr].mean(), delta[~tr].mean()
    est = m_tr - m_co
    psi = np.where(tr, (delta - m_tr) / n_tr, -(delta - m_co) / n_co)
    cl = Grouping(np.array([cluster_of[u] for u in both]))
    G = cl.n_levels
    per_cluster = np.bincount(cl.codes, weights=psi, minlength=G)
    var = G / (G - 1) * float(per_cluster @ per_cluster) if G > 1 else np.nan
    return EstimateResult(
        spec="did_m",
        names=["did_m"],
        params=np.array([est]),
        vcov=np.array([[var]]),
        nobs=2 * len(both),
        cluster_count=G,
        diagnostics={"switchers": n_tr, "stayers": n_co, "switch_period": ds.policy_period},
    )
