"""Acceptance criteria, one test (or group of tests) per criterion.

Each test carries ``@pytest.mark.criterion(n, label)``; the conftest prints
one PASS/FAIL line per criterion at the end of the run. Tolerances and
runtime budgets are fixed here.
"""

import math
import time

import numpy as np
import pytest

from excerptlab.align import brute_force_xcorr, cross_correlate, normalized_xcorr
from excerptlab.audio import AudioClip
from excerptlab.estimators import did_m, dose_response, event_study, synthetic_did, twfe_ols
from excerptlab.repetition import encoded_length, lzw_decode, lzw_encode, rle_decode_binary, rle_encode_binary, rle_encode_pedagogical
from excerptlab.theory import (
    DemandParams,
    SimPanelSpec,
    demand,
    demand_comparative_statics,
    demand_monte_carlo,
    replication_seeds,
    simulate_depreciation,
    simulate_panel,
)
from excerptlab.unpredictability import N_STREAMS, ARModel, TokenizedClip, log_perplexity, train_ar_model

from oracles import dense_ols

criterion = pytest.mark.criterion


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0

    def check(self):
        assert self.elapsed < self.seconds, f"took {self.elapsed:.3f} s, budget {self.seconds} s"


# 1 -------------------------------------------------------------------------


@criterion(1, "compression worked examples")
def test_c1_pedagogical_rle():
    rle_encode_pedagogical(b"warm-up")
    with Budget(1e-3) as b:
        first = rle_encode_pedagogical("aaaaabbbbb")
        second = rle_encode_pedagogical("aabbabbaba")
    assert first == b"5a5b"
    assert second == b"2a2ba2baba"
    b.check()


# 2 -------------------------------------------------------------------------


def fuzz_corpus(n=10_000, seed=2):
    rng = np.random.default_rng(seed)
    cases = [b"", b"\x00", b"\xff"]
    while len(cases) < n:
        kind = len(cases) % 4
        if kind == 0:
            cases.append(rng.integers(0, 256, int(rng.integers(0, 2000)), dtype=np.uint8).tobytes())
        elif kind == 1:
            unit = rng.integers(0, 256, int(rng.integers(1, 16)), dtype=np.uint8).tobytes()
            cases.append(unit * int(rng.integers(1, 400)))
        elif kind == 2:
            cases.append(rng.integers(0, 3, int(rng.integers(0, 3000)), dtype=np.uint8).tobytes())
        else:
            cases.append(bytes([int(rng.integers(0, 256))]) * int(rng.integers(1, 1000)))
    return cases


@criterion(2, "codec losslessness")
def test_c2_fuzz_roundtrip():
    with Budget(30) as b:
        cases = fuzz_corpus()
        failures = 0
        for data in cases:
            failures += rle_decode_binary(rle_encode_binary(data)) != data
            failures += lzw_decode(lzw_encode(data)) != data
    assert len(cases) == 10_000
    assert failures == 0
    b.check()


# 3 -------------------------------------------------------------------------


@criterion(3, "repetition monotonicity")
def test_c3_lzw_period_sweep():
    n = 1 << 14
    rng = np.random.default_rng(3)
    correct = total = 0
    with Budget(10) as b:
        for _ in range(10):
            lengths = []
            for p in (n, n // 2, n // 4, n // 8):
                base = rng.uniform(-0.5, 0.5, p)
                lengths.append(encoded_length(AudioClip(np.tile(base, n // p), 8000)).payload_bytes)
            for a, c in zip(lengths, lengths[1:]):
                total += 1
                correct += c <= a
    assert correct == total == 30
    b.check()


# 4 -------------------------------------------------------------------------

BETA = 0.054


@pytest.fixture(scope="module")
def recovery_runs():
    t0 = time.perf_counter()
    rows = []
    for seed in replication_seeds(4, 500):
        ds, _ = simulate_panel(SimPanelSpec(n_treated=1000, n_control=1000, periods=18, policy_period=9, noise_sd=0.1, beta_true=BETA, seed=seed))
        sd, _ = synthetic_did(ds, jackknife=False)
        rows.append((twfe_ols(ds)["D"], did_m(ds)["did_m"], sd["sdid"]))
    return np.array(rows), time.perf_counter() - t0


@criterion(4, "estimator recovery: twfe_ols per run and mean")
def test_c4_twfe(recovery_runs):
    est, elapsed = recovery_runs
    assert elapsed < 300
    assert np.abs(est[:, 0] - BETA).max() < 0.01
    assert abs(est[:, 0].mean() - BETA) < 0.002


@criterion(4, "estimator recovery: did_m mean")
def test_c4_did_m_mean(recovery_runs):
    est, _ = recovery_runs
    assert abs(est[:, 1].mean() - BETA) < 0.002


@criterion(4, "estimator recovery: did_m per run")
def test_c4_did_m_per_run(recovery_runs):
    est, _ = recovery_runs
    worst = np.abs(est[:, 1] - BETA)
    assert worst.max() < 0.01, f"{int((worst >= 0.01).sum())} of 500 runs off by >= 0.01 (max {worst.max():.4f})"


@criterion(4, "estimator recovery: synthetic_did per run and mean")
def test_c4_sdid(recovery_runs):
    est, _ = recovery_runs
    assert np.abs(est[:, 2] - BETA).max() < 0.01
    assert abs(est[:, 2].mean() - BETA) < 0.002


# 5 -------------------------------------------------------------------------


@criterion(5, "Frisch-Waugh equivalence")
def test_c5_absorbed_vs_dense():
    with Budget(30) as b:
        worst = 0.0
        for seed in replication_seeds(5, 20):
            ds, _ = simulate_panel(SimPanelSpec(n_treated=25, n_control=25, seed=seed))
            res = twfe_ols(ds, fe=("unit", "period", "age"))
            f = ds.frame
            labels = [f["unit_id"].to_numpy(), f["period"].to_numpy(), f["age_years"].to_numpy()]
            beta, _, _ = dense_ols(ds.log_outcome(), f.eval("treated*post").to_numpy(float), labels)
            worst = max(worst, abs(res["D"] - beta[0]))
    assert worst < 1e-8
    b.check()


# 6 -------------------------------------------------------------------------


@criterion(6, "event-study null and planted step")
def test_c6_event_study():
    with Budget(180) as b:
        clean = 0
        post_means = []
        for seed in replication_seeds(6, 200):
            spec = dict(n_treated=1000, n_control=1000, noise_sd=0.1, seed=seed)
            ds, _ = simulate_panel(SimPanelSpec(beta_true=0.0, **spec))
            res = event_study(ds)
            clean += all(abs(res.coef[n]) < 3 * res.se[n] for n in res.names)
            ds, _ = simulate_panel(SimPanelSpec(beta_true=0.05, **spec))
            res = event_study(ds)
            post_means.append(np.mean([res[f"k={k}"] for k in range(0, 9)]))
    post_means = np.array(post_means)
    within = float(np.mean(np.abs(post_means - 0.05) < 0.01))
    print(f"null clean {clean}/200; planted post mean {post_means.mean():.4f}, single runs within 0.01: {within:.3f}")
    assert clean / 200 >= 0.95, f"null clean in {clean}/200 replications"
    assert abs(post_means.mean() - 0.05) < 0.01
    b.check()


# 7 -------------------------------------------------------------------------


@criterion(7, "clustered-SE coverage under AR(1) noise")
def test_c7_coverage():
    with Budget(300) as b:
        covered = 0
        for seed in replication_seeds(7, 500):
            ds, _ = simulate_panel(SimPanelSpec(n_treated=1000, n_control=1000, noise_ar1=0.5, beta_true=BETA, seed=seed))
            lo, hi = twfe_ols(ds).ci95("D")
            covered += lo <= BETA <= hi
    rate = covered / 500
    assert 0.93 <= rate <= 0.97, f"coverage {rate:.3f}"
    b.check()


# 8 -------------------------------------------------------------------------


@criterion(8, "dose-response recovery")
def test_c8_dose_response():
    with Budget(180) as b:
        betas = np.linspace(0.0, 0.06, 10)
        ds, truth = simulate_panel(SimPanelSpec(n_treated=1000, n_control=1000, beta_true=betas, noise_sd=0.05, seed=8))
        res = dose_response(ds)
        err = max(abs(res[f"decile_{k}"] - truth["decile_effects_vs_1"][k - 1]) for k in range(2, 11))
    assert not res.diagnostics["unidentified"]
    assert err < 0.01
    b.check()


# 9 -------------------------------------------------------------------------


@criterion(9, "demand model and comparative statics")
def test_c9_demand():
    with Budget(60) as b:
        prm = DemandParams(0.5, 0.5, 0.6)
        assert demand(prm) == pytest.approx(0.3, abs=1e-15)
        assert abs(demand_monte_carlo(prm, 10**6, seed=9) - 0.3) < 2e-3

        h1, h2 = 1e-5, 1e-4  # mixed partials need the larger step to stay clear of rounding
        worst1 = worst2 = 0.0
        for p in np.linspace(0.05, 0.45, 20):
            for theta in np.linspace(0.5, 0.95, 20):
                for frac in np.linspace(0.05, 0.95, 20):
                    tau = p + frac * theta * (1 - p)
                    d = lambda pp, th: demand(DemandParams(pp, th, tau))
                    d1, d2 = demand_comparative_statics(DemandParams(p, theta, tau))
                    fd1 = (d(p, theta + h1) - d(p, theta - h1)) / (2 * h1)
                    fd2 = (d(p + h2, theta + h2) - d(p + h2, theta - h2) - d(p - h2, theta + h2) + d(p - h2, theta - h2)) / (4 * h2 * h2)
                    worst1 = max(worst1, abs(d1 - fd1))
                    worst2 = max(worst2, abs(d2 - fd2))
                    assert d1 > 0 and d2 < 0
    assert worst1 < 1e-6, worst1
    assert worst2 < 1e-6, worst2
    b.check()


# 10 ------------------------------------------------------------------------


@criterion(10, "taste-depreciation mechanism")
def test_c10_depreciation():
    with Budget(1) as b:
        ds = simulate_depreciation()
        f = ds.frame.assign(y=ds.log_outcome())
        sales = f.pivot(index="period", columns="unit_id", values="outcome")
        logs = f.pivot(index="period", columns="unit_id", values="y")
        t = np.arange(len(sales))
        exact_t = np.all(sales["treated"].to_numpy() == 20 * np.exp(-t / 2))
        exact_c = np.all(sales["control"].to_numpy() == 10 * np.exp(-t / 2))
        gap = (logs["treated"] - logs["control"]).to_numpy()
    b.check()
    assert exact_t and exact_c
    assert abs(gap[0] - 0.6466) < 5e-5
    assert np.all(np.diff(gap) < 0)
    assert gap[12] < 0.02, f"log-gap at t=12 is {gap[12]:.5f}"


# 11 ------------------------------------------------------------------------


@criterion(11, "perplexity identities")
def test_c11_perplexity():
    rng = np.random.default_rng(11)
    with Budget(60) as b:
        tk = TokenizedClip(rng.integers(0, 64, (N_STREAMS, 100)), 64)
        uniform = log_perplexity(tk, ARModel.uniform(64)).log_perplexity
        assert abs(uniform - 100 * math.log(64)) < 1e-9

        model = train_ar_model([TokenizedClip(rng.integers(0, 64, (N_STREAMS, 2000)), 64)], n=3, alpha=0.1)
        long = TokenizedClip(rng.integers(0, 64, (N_STREAMS, 500)), 64)
        scores = [log_perplexity(TokenizedClip(long.streams[:, :m], 64), model).log_perplexity for m in range(0, 501, 10)]
        assert all(b2 >= a2 for a2, b2 in zip(scores, scores[1:]))

        ordered = 0
        for trial in range(10):
            period = int(rng.integers(3, 12))
            offsets = rng.integers(0, 64, N_STREAMS)
            base = np.arange(1500) % period
            structured = TokenizedClip((base[None, :] * 5 + offsets[:, None]) % 64, 64)
            m = train_ar_model([structured], n=3, alpha=0.1)
            random = TokenizedClip(rng.integers(0, 64, structured.streams.shape), 64)
            ordered += log_perplexity(random, m).log_perplexity > log_perplexity(structured, m).log_perplexity
    assert ordered == 10
    b.check()


# 12 ------------------------------------------------------------------------


@criterion(12, "alignment")
def test_c12_alignment():
    sr = 8000
    rng = np.random.default_rng(12)
    with Budget(60) as b:
        exact = 0
        for _ in range(50):
            rec = rng.uniform(-0.5, 0.5, 20 * sr)
            start = int(rng.integers(0, 15 * sr))
            length = int(rng.integers(sr // 2, 5 * sr))
            res = cross_correlate(AudioClip(rec[start : start + length], sr), AudioClip(rec, sr))
            exact += res.offset_samples == start and res.offset_s == start / sr
        assert exact == 50

        rec = rng.uniform(-0.5, 0.5, 70 * sr)
        ex = rng.uniform(-0.5, 0.5, 5 * sr)
        rec[10 * sr : 15 * sr] = ex
        rec[50 * sr : 55 * sr] = ex
        assert cross_correlate(AudioClip(ex, sr), AudioClip(rec, sr)).offset_s == 10.0

        for _ in range(5):
            rec = rng.uniform(-1, 1, 2 * sr)
            m = int(rng.integers(sr // 4, sr))
            ex = rng.uniform(-1, 1, m)
            fast, slow = normalized_xcorr(ex, rec), brute_force_xcorr(ex, rec)
            assert np.abs(fast - slow).max() < 1e-6
            assert int(np.argmax(fast)) == int(np.argmax(slow))
    b.check()
