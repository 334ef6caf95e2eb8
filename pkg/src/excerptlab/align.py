"""Locate an excerpt inside its source recording by normalized cross-correlation."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import signal

from .audio import AudioClip
from .errors import DegenerateSignalError, InputError

TIE_RTOL = 1e-9


@dataclass(frozen=True)
class AlignmentResult:
    offset_s: float
    offset_samples: int
    peak_corr: float
    runner_up_corr: float

    def to_dict(self) -> dict:
        return asdict(self)


def normalized_xcorr(excerpt: np.ndarray, recording: np.ndarray) -> np.ndarray:
    """Pearson correlation between ``excerpt`` and every same-length window of ``recording``.

    Entry ``k`` compares the excerpt with ``recording[k:k + len(excerpt)]``.
    Windows with zero variance score 0.
    """
    e = np.asarray(excerpt, dtype=np.float64)
    r = np.asarray(recording, dtype=np.float64)
    m = e.size
    e0 = e - e.mean()
    e_norm = np.sqrt(e0 @ e0)
    if e_norm == 0.0:
        raise DegenerateSignalError("excerpt has no variation to correlate")
    num = signal.correlate(r, e0, mode="valid", method="fft")
    # window sums via cumulative sums of the recording and its square
    c1 = np.concatenate(([0.0], np.cumsum(r)))
    c2 = np.concatenate(([0.0], np.cumsum(r * r)))
    s1 = c1[m:] - c1[:-m]
    s2 = c2[m:] - c2[:-m]
    var = np.maximum(s2 - s1 * s1 / m, 0.0)
    w_norm = np.sqrt(var)
    floor = 1e-12 * max(float(np.max(w_norm)), 1e-300)
    out = np.zeros_like(num)
    ok = w_norm > floor
    out[ok] = num[ok] / (e_norm * w_norm[ok])
    return np.clip(out, -1.0, 1.0)


def earliest_peak(corr: np.ndarray, rtol: float = TIE_RTOL) -> int:
    best = float(np.max(corr))
    return int(np.flatnonzero(corr >= best - rtol * abs(best))[0])


def cross_correlate(excerpt: AudioClip, recording: AudioClip) -> AlignmentResult:
    """Offset of ``excerpt`` within ``recording`` at the earliest global correlation maximum.

    ``runner_up_corr`` is the best correlation at lags at least half an
    excerpt away from the chosen peak (``-1`` if no such lag exists).
    """
    if excerpt.sample_rate_hz != recording.sample_rate_hz:
        raise InputError("excerpt and recording sample rates differ")
    if len(excerpt) > len(recording):
        raise InputError("excerpt is longer than the recording")
    corr = normalized_xcorr(excerpt.samples, recording.samples)
    lag = earliest_peak(corr)
    sep = max(1, len(excerpt) // 2)
    lags = np.arange(corr.size)
    away = np.abs(lags - lag) >= sep
    runner = float(corr[away].max()) if away.any() else -1.0
    return AlignmentResult(
        offset_s=lag / recording.sample_rate_hz,
        offset_samples=lag,
        peak_corr=float(corr[lag]),
        runner_up_corr=runner,
    )


def brute_force_xcorr(excerpt: np.ndarray, recording: np.ndarray) -> np.ndarray:
    """O(N*M) reference for :func:`normalized_xcorr`."""
    e = np.asarray(excerpt, dtype=np.float64)
    r = np.asarray(recording, dtype=np.float64)
    m = e.size
    e0 = e - e.mean()
    out = np.zeros(r.size - m + 1)
    for k in range(out.size):
        w = r[k : k + m]
        w0 = w - w.mean()
        d = np.sqrt((e0 @ e0) * (w0 @ w0))
        out[k] = (e0 @ w0) / d if d > 0 else 0.0
    return out
