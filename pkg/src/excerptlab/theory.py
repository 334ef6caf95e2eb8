"""Closed-form excerpt demand model and panel simulators used as estimator oracles."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import InputError
from .panel import PanelDataset


@dataclass(frozen=True)
class DemandParams:
    """Consumer prior ``p``, excerpt informativeness ``theta`` and listening threshold ``tau``."""

    p: float
    theta: float
    tau: float

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise InputError(f"prior p={self.p} must lie in (0, 1)")
        if not 0 < self.theta <= 1:
            raise InputError(f"informativeness theta={self.theta} must lie in (0, 1]")
        if not 0 < self.tau < 1:
            raise InputError(f"threshold tau={self.tau} must lie in (0, 1)")

    @property
    def upper(self) -> float:
        return self.theta + (1 - self.theta) * self.p

    @property
    def interior(self) -> bool:
        return self.p < self.tau < self.upper


def demand(params: DemandParams) -> float:
    """Share of consumers whose perceived match value clears the threshold.

    The perceived value is ``(1 - theta) p + theta m`` with ``m ~ U(0, 1)``;
    outside ``[(1 - theta) p, theta + (1 - theta) p]`` demand is clamped to
    1 (threshold below every perceived value) or 0 (above every one).
    """
    p, theta, tau = params.p, params.theta, params.tau
    if tau >= params.upper:
        return 0.0
    if tau <= (1 - theta) * p:
        return 1.0
    return 1.0 - (tau - (1 - theta) * p) / theta


def demand_comparative_statics(params: DemandParams) -> tuple[float, float]:
    """``(dD/dtheta, d2D/dtheta dp) = ((tau - p) / theta**2, -1 / theta**2)`` in the interior regime."""
    if not params.interior:
        raise InputError("comparative statics are defined only for p < tau < theta + (1 - theta) p")
    t2 = params.theta**2
    return (params.tau - params.p) / t2, -1.0 / t2


def demand_monte_carlo(params: DemandParams, draws: int = 1_000_000, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    m = rng.random(draws)
    perceived = (1 - params.theta) * params.p + params.theta * m
    return float(np.mean(perceived > params.tau))


# --- taste depreciation ----------------------------------------------------


def depreciation_sales(t, amplitude: float, rate: float = 0.5):
    return amplitude * np.exp(-rate * np.asarray(t, dtype=np.float64))


def simulate_depreciation(
    horizon: int = 24,
    policy_period: Optional[int] = None,
    a_treated: float = 20.0,
    a_control: float = 10.0,
    rate: float = 0.5,
) -> PanelDataset:
    """Two recordings released together whose sales decay as ``A exp(-rate t)``.

    The treated recording starts at ``a_treated``, the control at
    ``a_control``; the pseudo policy (with no effect) sits mid-horizon.
    Outcomes are sales levels, so ``ds.log_outcome()`` gives ``log(sales + 1)``.
    """
    if horizon < 2:
        raise InputError("horizon must cover at least two periods")
    if policy_period is None:
        policy_period = horizon // 2
    t = np.arange(horizon)
    rows = []
    for unit, amp, treated in (("treated", a_treated, 1), ("control", a_control, 0)):
        sales = depreciation_sales(t, amp, rate)
        for period, s in zip(t, sales):
            rows.append(
                {
                    "unit_id": unit,
                    "period": int(period),
                    "outcome": float(s),
                    "treated": treated,
                    "post": int(period >= policy_period),
                    "age_years": int(period // 12),
                }
            )
    return PanelDataset(pd.DataFrame(rows), policy_period)


# --- planted-effect panels --------------------------------------------------

_MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns ``(next_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def replication_seeds(master_seed: int, n: int) -> list[int]:
    """Independent per-replication seeds: successive splitmix64 outputs from ``master_seed``."""
    state = master_seed & _MASK64
    out = []
    for _ in range(n):
        state, z = splitmix64(state)
        out.append(z)
    return out


@dataclass
class SimPanelSpec:
    n_treated: int = 1000
    n_control: int = 1000
    periods: int = 18
    policy_period: int = 9
    unit_fe_sd: float = 0.5
    period_fe_sd: float = 0.1
    noise_sd: float = 0.1
    beta_true: Union[float, Sequence[float]] = 0.054
    decay_rate: Optional[float] = None
    seed: int = 0
    intercept: float = 5.0
    noise_ar1: float = 0.0
    beta_popular: Optional[float] = None
    effect_fe_loading: float = 0.0
    selection_shift: float = 0.0
    decay_start: float = 0.0
    units_per_artist: int = 4
    pre_deciles: Sequence[int] = (1,)
    post_deciles: Sequence[int] = tuple(range(1, 11))

    def __post_init__(self):
        if self.n_treated < 1 or self.n_control < 1:
            raise InputError("need at least one treated and one control unit")
        if not 0 < self.policy_period < self.periods:
            raise InputError("policy period must be interior to the panel")
        if min(self.unit_fe_sd, self.period_fe_sd, self.noise_sd) < 0:
            raise InputError("standard deviations must be nonnegative")
        if not -1 < self.noise_ar1 < 1:
            raise InputError("AR(1) coefficient must lie in (-1, 1)")
        if not np.isscalar(self.beta_true):
            self.beta_true = tuple(float(b) for b in self.beta_true)
            if len(self.beta_true) != 10:
                raise InputError("per-decile beta_true needs 10 entries")

    @property
    def dose_mode(self) -> bool:
        return not np.isscalar(self.beta_true)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("beta_true", "pre_deciles", "post_deciles"):
            if not np.isscalar(d[k]):
                d[k] = list(d[k])
        return d


def simulate_panel(spec: SimPanelSpec) -> tuple[PanelDataset, dict]:
    """Draw a balanced panel with a known treatment effect.

    ``log(outcome + 1) = intercept + unit FE + period FE + effect + noise``
    with Gaussian (optionally AR(1)) noise. A scalar ``beta_true`` gives a
    constant effect on treated units from the policy period on; ten values
    give per-decile effects indexed by each observation's ``dose_decile``.
    With ``decay_rate`` the outcome is instead the level
    ``exp(intercept + unit FE + effect + noise - decay_rate * (t + decay_start))``,
    i.e. sales that depreciate over time.
    """
    rng = np.random.default_rng(spec.seed)
    n_tr, n = spec.n_treated, spec.n_treated + spec.n_control
    T, P = spec.periods, spec.policy_period
    treated = np.r_[np.ones(n_tr, dtype=np.int64), np.zeros(n - n_tr, dtype=np.int64)]

    unit_fe = rng.normal(0.0, spec.unit_fe_sd, n) + spec.selection_shift * treated
    period_fe = rng.normal(0.0, spec.period_fe_sd, T)
    release_offset = rng.integers(0, 120, n)

    popular = (unit_fe >= np.median(unit_fe)).astype(np.int64)
    n_artists = max(1, math.ceil(n / spec.units_per_artist))
    artist = rng.permutation(np.arange(n) % n_artists)
    artist_mean = pd.Series(unit_fe).groupby(artist).transform("mean").to_numpy()
    artist_level = pd.Series(unit_fe).groupby(artist).mean()
    popular_artist = (artist_mean >= np.median(artist_level.to_numpy())).astype(np.int64)

    post = (np.arange(T) >= P).astype(np.int64)
    D = treated[:, None] * post[None, :]

    if spec.dose_mode:
        beta = np.asarray(spec.beta_true)
        pre_dec = rng.choice(np.asarray(spec.pre_deciles), n)
        post_dec = np.where(treated == 1, rng.choice(np.asarray(spec.post_deciles), n), pre_dec)
        deciles = np.where(post[None, :] == 1, post_dec[:, None], pre_dec[:, None])
        effect = beta[deciles - 1]
        unit_effect = beta[post_dec - 1] - beta[pre_dec - 1]
    else:
        beta_i = np.full(n, float(spec.beta_true))
        if spec.beta_popular is not None:
            beta_i = np.where(popular == 1, spec.beta_popular, beta_i)
        beta_i = beta_i + spec.effect_fe_loading * (unit_fe - unit_fe.mean())
        effect = D * beta_i[:, None]
        deciles = None
        unit_effect = beta_i

    z = rng.normal(0.0, 1.0, (n, T))
    if spec.noise_ar1:
        rho = spec.noise_ar1
        e = np.empty_like(z)
        e[:, 0] = z[:, 0]
        scale = math.sqrt(1 - rho**2)
        for t in range(1, T):
            e[:, t] = rho * e[:, t - 1] + scale * z[:, t]
        z = e
    noise = spec.noise_sd * z

    if spec.decay_rate is None:
        log_y = spec.intercept + unit_fe[:, None] + period_fe[None, :] + effect + noise
        outcome = np.expm1(log_y)
        if (outcome < 0).any():
            raise InputError("simulated log(outcome + 1) went negative; raise the intercept")
    else:
        t = np.arange(T) + spec.decay_start
        log_level = spec.intercept + unit_fe[:, None] + effect + noise - spec.decay_rate * t[None, :]
        outcome = np.exp(log_level)

    width = len(str(n - 1))
    unit_ids = np.array([f"u{i:0{width}d}" for i in range(n)])
    age = (np.arange(T)[None, :] + release_offset[:, None]) // 12
    frame = pd.DataFrame(
        {
            "unit_id": np.repeat(unit_ids, T),
            "period": np.tile(np.arange(T), n),
            "outcome": outcome.ravel(),
            "treated": np.repeat(treated, T),
            "post": np.tile(post, n),
            "age_years": age.ravel(),
            "cluster_id": np.repeat(unit_ids, T),
            "popular_unit": np.repeat(popular, T),
            "popular_artist": np.repeat(popular_artist, T),
            "dose_decile": deciles.ravel().astype(np.float64) if deciles is not None else np.nan,
        }
    )
    ds = PanelDataset(frame, P)

    switch_att = float(unit_effect[treated == 1].mean())
    truth = {
        "spec": spec.to_dict(),
        "beta_true": spec.beta_true if not spec.dose_mode else list(spec.beta_true),
        "att": switch_att,
        "intercept": spec.intercept,
        "unit_fe": unit_fe.tolist(),
        "period_fe": period_fe.tolist(),
        "unit_effects": unit_effect.tolist(),
    }
    if spec.dose_mode:
        truth["decile_effects_vs_1"] = (np.asarray(spec.beta_true) - spec.beta_true[0]).tolist()
    return ds, truth
