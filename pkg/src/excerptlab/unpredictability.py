"""Log-perplexity of excerpts under a token-level autoregressive model.

Audio is turned into four parallel token streams (one residual codebook
each) over 0.02 s frames; an add-alpha n-gram model per stream scores each
frame, and the four per-stream probabilities are averaged before taking logs.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .audio import DEFAULT_HOP_S, AudioClip, frame
from .errors import DataError, InputError, TrainingError
from .repetition import pearson_r

N_STREAMS = 4
BAND_EDGES_HZ = (250.0, 500.0, 1000.0, 2000.0, 4000.0)
MIN_CORPUS_S = 60.0
KMEANS_MAX_ITER = 50
KMEANS_RTOL = 1e-6
_LOG_FLOOR = 1e-10
MODEL_HEADER = b"XLAB-ARM v1\n"


# --- features and quantizer ---------------------------------------------------


def band_log_energies(clip: AudioClip, hop_s: float = DEFAULT_HOP_S) -> np.ndarray:
    """``(n_frames, 4)`` log mean power in the octave bands 250-500-1000-2000-4000 Hz."""
    if clip.sample_rate_hz / 2 < BAND_EDGES_HZ[-1]:
        raise InputError(f"sample rate {clip.sample_rate_hz} Hz cannot resolve the {BAND_EDGES_HZ[-1]:.0f} Hz band edge")
    frames = frame(clip, hop_s).frames
    n = frames.shape[1]
    spec = np.abs(np.fft.rfft(frames * np.hanning(n), axis=1)) ** 2 / n
    freqs = np.fft.rfftfreq(n, 1.0 / clip.sample_rate_hz)
    feats = np.empty((frames.shape[0], N_STREAMS))
    for b in range(N_STREAMS):
        sel = (freqs >= BAND_EDGES_HZ[b]) & (freqs < BAND_EDGES_HZ[b + 1])
        feats[:, b] = np.log(spec[:, sel].mean(axis=1) + _LOG_FLOOR)
    return feats


def nearest(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the closest centroid per point; ties go to the lowest index."""
    out = np.empty(points.shape[0], dtype=np.int64)
    step = 8192
    for i in range(0, points.shape[0], step):
        block = points[i : i + step]
        d = ((block[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        out[i : i + step] = np.argmin(d, axis=1)
    return out


def kmeans(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Lloyd's algorithm from a k-means++ start.

    Stops after ``KMEANS_MAX_ITER`` updates or when inertia changes by less
    than ``KMEANS_RTOL`` relative. Empty clusters keep their old centroid.
    """
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centroids[j] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))

    prev = np.inf
    for _ in range(KMEANS_MAX_ITER):
        labels = nearest(points, centroids)
        inertia = float(((points - centroids[labels]) ** 2).sum())
        if np.isfinite(prev) and abs(prev - inertia) <= KMEANS_RTOL * max(prev, 1e-300):
            break
        prev = inertia
        counts = np.bincount(labels, minlength=k)
        for dim in range(points.shape[1]):
            sums = np.bincount(labels, weights=points[:, dim], minlength=k)
            centroids[:, dim] = np.where(counts > 0, sums / np.maximum(counts, 1), centroids[:, dim])
    return centroids


@dataclass(frozen=True)
class Quantizer:
    """Four residual codebooks over per-frame band log-energies."""

    codebooks: np.ndarray  # (4, V, 4)
    sample_rate_hz: int
    seed: int
    hop_s: float = DEFAULT_HOP_S

    @property
    def vocab_size(self) -> int:
        return self.codebooks.shape[1]

    def encode_features(self, feats: np.ndarray) -> np.ndarray:
        resid = np.array(feats, dtype=np.float64)
        streams = np.empty((N_STREAMS, resid.shape[0]), dtype=np.int64)
        for s in range(N_STREAMS):
            idx = nearest(resid, self.codebooks[s])
            streams[s] = idx
            resid -= self.codebooks[s][idx]
        return streams


def train_quantizer(corpus: Sequence[AudioClip], V: int = 64, seed: int = 0) -> Quantizer:
    """Fit the four residual codebooks by k-means on the pooled corpus frames.

    Codebook ``s`` is trained on what codebooks ``0..s-1`` leave unexplained.
    The result is a pure function of ``(corpus, V, seed)``.
    """
    if V < 1:
        raise InputError("vocabulary size must be positive")
    if not corpus:
        raise TrainingError("training corpus is empty")
    rates = {c.sample_rate_hz for c in corpus}
    if len(rates) != 1:
        raise TrainingError("training clips must share one sample rate")
    total = sum(c.duration_s for c in corpus)
    if total < MIN_CORPUS_S:
        raise TrainingError(f"training corpus holds {total:.1f} s of audio; at least {MIN_CORPUS_S:.0f} s needed")
    if all(not np.any(c.samples) for c in corpus):
        raise TrainingError("training corpus is entirely silent")
    feats = np.concatenate([band_log_energies(c) for c in corpus])
    rng = np.random.default_rng(seed)
    books = np.empty((N_STREAMS, V, feats.shape[1]))
    resid = feats.copy()
    for s in range(N_STREAMS):
        books[s] = kmeans(resid, V, rng)
        resid -= books[s][nearest(resid, books[s])]
    books.setflags(write=False)
    return Quantizer(books, rates.pop(), int(seed))


@dataclass(frozen=True)
class TokenizedClip:
    streams: np.ndarray  # (4, n_frames) ints in 0..V-1
    vocab_size: int
    hop_s: float = DEFAULT_HOP_S
    unit_id: Optional[str] = None

    def __post_init__(self):
        s = np.asarray(self.streams, dtype=np.int64)
        if s.ndim != 2 or s.shape[0] != N_STREAMS:
            raise InputError(f"token streams must have shape ({N_STREAMS}, n)")
        if s.size and (s.min() < 0 or s.max() >= self.vocab_size):
            raise InputError("token outside the vocabulary")
        object.__setattr__(self, "streams", s)

    def __len__(self) -> int:
        return self.streams.shape[1]


def tokenize(clip: AudioClip, q: Quantizer, unit_id: Optional[str] = None) -> TokenizedClip:
    if clip.sample_rate_hz != q.sample_rate_hz:
        raise InputError(f"clip sample rate {clip.sample_rate_hz} Hz differs from the quantizer's {q.sample_rate_hz} Hz")
    return TokenizedClip(q.encode_features(band_log_energies(clip, q.hop_s)), q.vocab_size, q.hop_s, unit_id)


# --- n-gram model ---------------------------------------------------------------


def context_ids(tokens: np.ndarray, n: int, V: int) -> np.ndarray:
    """Integer id of the ``n`` tokens preceding each position, BOS-padded.

    Tokens are digits in base ``V + 1`` with ``V`` standing for BOS.
    """
    padded = np.concatenate([np.full(n, V, dtype=np.int64), np.asarray(tokens, dtype=np.int64)])
    ids = np.zeros(len(tokens), dtype=np.int64)
    for j in range(n):
        ids = ids * (V + 1) + padded[j : j + len(tokens)]
    return ids


@dataclass
class StreamCounts:
    contexts: np.ndarray  # sorted unique context ids
    counts: np.ndarray  # (n_contexts, V)

    def lookup(self, ctx: np.ndarray) -> np.ndarray:
        """Count rows for ``ctx`` (zeros for unseen contexts)."""
        V = self.counts.shape[1]
        out = np.zeros((len(ctx), V))
        if self.contexts.size == 0:
            return out
        pos = np.searchsorted(self.contexts, ctx)
        pos_c = np.minimum(pos, self.contexts.size - 1)
        hit = self.contexts[pos_c] == ctx
        out[hit] = self.counts[pos_c[hit]]
        return out


@dataclass
class ARModel:
    """Per-stream order-``n`` count model with add-``alpha`` smoothing.

    ``P(s | context) = (count(context, s) + alpha) / (count(context) + alpha V)``;
    an unseen context therefore gets the uniform ``1 / V``.
    """

    vocab_size: int
    order: int
    alpha: float
    streams: list[StreamCounts] = field(default_factory=list)

    def __post_init__(self):
        if self.order < 1:
            raise InputError("context order n must be at least 1")
        if not self.alpha > 0:
            raise InputError("smoothing alpha must be positive")
        if self.vocab_size < 1:
            raise InputError("vocabulary size must be positive")
        if not self.streams:
            empty = StreamCounts(np.empty(0, dtype=np.int64), np.empty((0, self.vocab_size)))
            self.streams = [empty] * N_STREAMS

    @classmethod
    def uniform(cls, vocab_size: int, order: int = 1, alpha: float = 1.0) -> "ARModel":
        return cls(vocab_size, order, alpha)

    def conditional(self, stream: int, ctx: np.ndarray) -> np.ndarray:
        """``(len(ctx), V)`` conditional distributions for the given context ids."""
        c = self.streams[stream].lookup(np.atleast_1d(np.asarray(ctx, dtype=np.int64)))
        return (c + self.alpha) / (c.sum(axis=1, keepdims=True) + self.alpha * self.vocab_size)

    def token_log_probs(self, clip: TokenizedClip) -> np.ndarray:
        """``(4, n)`` log-probability of each observed token given its stream's history."""
        if clip.vocab_size != self.vocab_size:
            raise InputError(f"clip vocabulary {clip.vocab_size} does not match model vocabulary {self.vocab_size}")
        out = np.empty(clip.streams.shape)
        for s in range(N_STREAMS):
            tok = clip.streams[s]
            ctx = context_ids(tok, self.order, self.vocab_size)
            c = self.streams[s].lookup(ctx)
            num = c[np.arange(len(tok)), tok] + self.alpha
            den = c.sum(axis=1) + self.alpha * self.vocab_size
            out[s] = np.log(num) - np.log(den)
        return out


def train_ar_model(corpus: Iterable[TokenizedClip], n: int = 3, alpha: float = 0.1) -> ARModel:
    corpus = list(corpus)
    if n < 1:
        raise InputError("context order n must be at least 1")
    if not alpha > 0:
        raise InputError("smoothing alpha must be positive")
    if not corpus:
        raise InputError("token corpus is empty")
    V = corpus[0].vocab_size
    if any(c.vocab_size != V for c in corpus):
        raise InputError("token corpus mixes vocabulary sizes")
    streams = []
    for s in range(N_STREAMS):
        ctx = np.concatenate([context_ids(c.streams[s], n, V) for c in corpus])
        tok = np.concatenate([c.streams[s] for c in corpus])
        uniq, inv = np.unique(ctx, return_inverse=True)
        counts = np.zeros((uniq.size, V))
        np.add.at(counts, (inv, tok), 1.0)
        streams.append(StreamCounts(uniq, counts))
    return ARModel(V, n, float(alpha), streams)


# --- scoring --------------------------------------------------------------------


@dataclass(frozen=True)
class PerplexityReport:
    unit_id: Optional[str]
    log_perplexity: float
    tokens_scored: int
    per_token_mean: float
    decile: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "unit_id": self.unit_id,
            "log_perplexity": self.log_perplexity,
            "tokens_scored": self.tokens_scored,
            "per_token_mean": self.per_token_mean,
            "decile": self.decile,
        }


def step_log_losses(clip: TokenizedClip, model: ARModel) -> np.ndarray:
    """``-log`` of the stream-averaged probability at every frame, computed in the log domain."""
    lp = model.token_log_probs(clip)
    avg = logsumexp(lp, axis=0) - np.log(N_STREAMS)
    return np.maximum(-avg, 0.0)


def log_perplexity(clip: TokenizedClip, model: ARModel, unit_id: Optional[str] = None) -> PerplexityReport:
    """Negative log-probability (nats) of the clip's frame sequence.

    At each frame the four per-stream conditionals are averaged into one
    probability; the report sums ``-log`` of those averages.
    """
    losses = step_log_losses(clip, model)
    total = float(np.sum(losses))
    n = int(losses.size)
    return PerplexityReport(
        unit_id if unit_id is not None else clip.unit_id,
        total,
        n,
        total / n if n else 0.0,
    )


def perplexity_repetition_correlation(perp: Mapping[str, float], enc: Mapping[str, float]) -> float:
    """Pearson r between log-perplexity and encoded length over units present in both maps."""
    common = sorted(set(perp) & set(enc))
    return pearson_r([perp[u] for u in common], [enc[u] for u in common])


# --- persistence ------------------------------------------------------------------


def save_model(path: str | os.PathLike, model: ARModel, quantizer: Optional[Quantizer] = None) -> None:
    Path(path).write_bytes(model_bytes(model, quantizer))


def model_bytes(model: ARModel, quantizer: Optional[Quantizer] = None) -> bytes:
    arrays = {
        "meta": np.array([model.vocab_size, model.order], dtype=np.int64),
        "alpha": np.array([model.alpha]),
    }
    for s, st in enumerate(model.streams):
        arrays[f"ctx{s}"] = st.contexts
        arrays[f"cnt{s}"] = st.counts
    if quantizer is not None:
        arrays["codebooks"] = np.asarray(quantizer.codebooks)
        arrays["qmeta"] = np.array([quantizer.sample_rate_hz, quantizer.seed], dtype=np.int64)
        arrays["qhop"] = np.array([quantizer.hop_s])
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    return MODEL_HEADER + buf.getvalue()


def load_model(path: str | os.PathLike) -> tuple[ARModel, Optional[Quantizer]]:
    return parse_model(Path(path).read_bytes())


def parse_model(data: bytes) -> tuple[ARModel, Optional[Quantizer]]:
    if not data.startswith(MODEL_HEADER):
        raise DataError("not an XLAB-ARM v1 model file")
    with np.load(io.BytesIO(data[len(MODEL_HEADER) :]), allow_pickle=False) as z:
        V, n = (int(x) for x in z["meta"])
        streams = [StreamCounts(z[f"ctx{s}"], z[f"cnt{s}"]) for s in range(N_STREAMS)]
        model = ARModel(V, n, float(z["alpha"][0]), streams)
        q = None
        if "codebooks" in z.files:
            rate, seed = (int(x) for x in z["qmeta"])
            q = Quantizer(z["codebooks"], rate, seed, float(z["qhop"][0]))
    return model, q
