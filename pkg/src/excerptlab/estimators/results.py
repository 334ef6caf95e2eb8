from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

Z95 = 1.96


@dataclass
class EstimateResult:
    """Point estimates, covariance and bookkeeping from one estimator run.

    ``names`` orders the rows/columns of ``vcov``. ``design`` and ``resid``
    are the (within-transformed) regressors and residuals, kept so the
    covariance can be recomputed under another clustering.
    """

    spec: str
    names: list[str]
    params: np.ndarray
    vcov: np.ndarray
    nobs: int
    cluster_count: int
    reference_label: Optional[str] = None
    diagnostics: dict[str, Any] = field(default_factory=dict)
    design: Optional[np.ndarray] = field(default=None, repr=False)
    resid: Optional[np.ndarray] = field(default=None, repr=False)
    dof_absorbed: int = 0

    @property
    def coef(self) -> dict[str, float]:
        return {n: float(b) for n, b in zip(self.names, self.params)}

    @property
    def se(self) -> dict[str, float]:
        return {n: float(math.sqrt(max(v, 0.0))) for n, v in zip(self.names, np.diag(self.vcov))}

    def ci95(self, name: str) -> tuple[float, float]:
        est, se = self.coef[name], self.se[name]
        return est - Z95 * se, est + Z95 * se

    def __getitem__(self, name: str) -> float:
        return self.coef[name]

    def to_dict(self) -> dict[str, Any]:
        coef = {}
        for n in self.names:
            lo, hi = self.ci95(n)
            coef[n] = {"est": self.coef[n], "se": self.se[n], "ci95": [lo, hi]}
        return {
            "spec": self.spec,
            "coef": coef,
            "nobs": self.nobs,
            "clusters": self.cluster_count,
            "reference": self.reference_label,
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def emit_event_study_table(result: EstimateResult) -> str:
    """Plot-ready CSV ``k,estimate,lo95,hi95,n_treated_in_bin`` for event-study or dose-response results.

    The reference bin is left out. Bins flagged as unidentified (no treated
    variation) are written with a zero estimate and a degenerate interval.
    """
    bins = result.diagnostics.get("bins")
    if bins is None:
        raise ValueError(f"result of {result.spec!r} carries no bin metadata")
    counts = result.diagnostics.get("n_treated_in_bin", {})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "estimate", "lo95", "hi95", "n_treated_in_bin"])
    coef, se = result.coef, result.se
    for k, name in bins:
        if name in coef:
            est, s = coef[name], se[name]
            row = [k, repr(est), repr(est - Z95 * s), repr(est + Z95 * s)]
        else:
            row = [k, "0.0", "0.0", "0.0"]
        w.writerow(row + [counts.get(str(k), 0)])
    return buf.getvalue()
