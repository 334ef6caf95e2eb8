"""Compression-based repetition measure: encoded length of an excerpt under a lossless codec."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from . import _kernels
from .audio import AudioClip, to_pcm16
from .errors import CodecError, InputError, UndefinedCorrelationError

PREVIEW_LENGTHS_S = (30.0, 90.0)
_DIGITS = frozenset(b"0123456789")


# --- codecs ----------------------------------------------------------------


def rle_encode_pedagogical(text: bytes) -> bytes:
    """Textbook run-length code: runs of 2..9 become ``<digit><symbol>``, singletons stay bare.

    Longer runs are cut into chunks of at most nine, e.g. twelve ``a`` give
    ``9a3a``. The alphabet must exclude ASCII digits; use
    :func:`rle_encode_binary` for arbitrary bytes.
    """
    text = _as_bytes(text)
    if any(b in _DIGITS for b in text):
        raise InputError("pedagogical RLE cannot encode ASCII digits; use rle_encode_binary")
    out = bytearray()
    i, n = 0, len(text)
    while i < n:
        sym = text[i]
        j = i
        while j < n and text[j] == sym:
            j += 1
        run = j - i
        while run > 0:
            chunk = min(run, 9)
            if chunk > 1:
                out.append(ord("0") + chunk)
            out.append(sym)
            run -= chunk
        i = j
    return bytes(out)


def rle_decode_pedagogical(code: bytes) -> bytes:
    code = _as_bytes(code)
    out = bytearray()
    i, n = 0, len(code)
    while i < n:
        b = code[i]
        if b in _DIGITS:
            count = b - ord("0")
            if count < 2 or i + 1 >= n or code[i + 1] in _DIGITS:
                raise CodecError(f"malformed pedagogical RLE at byte {i}")
            out.extend(bytes([code[i + 1]]) * count)
            i += 2
        else:
            out.append(b)
            i += 1
    return bytes(out)


def rle_encode_binary(data: bytes) -> bytes:
    """``(count, value)`` byte pairs with counts in 1..255; any byte alphabet."""
    return _kernels.rle_binary_encode(_as_bytes(data))


def rle_decode_binary(code: bytes) -> bytes:
    try:
        return _kernels.rle_binary_decode(_as_bytes(code))
    except ValueError as exc:
        raise CodecError(str(exc)) from exc


def lzw_encode(data: bytes) -> bytes:
    """LZW over a 256-entry byte dictionary, codes packed MSB-first.

    Code widths grow from 9 to 16 bits as the dictionary fills; once it
    holds 65536 entries it is frozen. The final byte is zero padded.
    """
    return _kernels.lzw_encode(_as_bytes(data))


def lzw_decode(code: bytes) -> bytes:
    try:
        return _kernels.lzw_decode(_as_bytes(code))
    except ValueError as exc:
        raise CodecError(str(exc)) from exc


def _as_bytes(x) -> bytes:
    if isinstance(x, str):
        return x.encode("latin-1")
    return bytes(x)


@dataclass(frozen=True)
class Codec:
    name: str
    encode: Callable[[bytes], bytes]
    decode: Callable[[bytes], bytes]


LZW = Codec("lzw", lzw_encode, lzw_decode)
RLE_BINARY = Codec("rle", rle_encode_binary, rle_decode_binary)
RLE_PEDAGOGICAL = Codec("rle-text", rle_encode_pedagogical, rle_decode_pedagogical)
CODECS = {c.name: c for c in (LZW, RLE_BINARY)}


def get_codec(name: str) -> Codec:
    try:
        return CODECS[name]
    except KeyError:
        raise InputError(f"unknown codec {name!r}; choose from {sorted(CODECS)}") from None


# --- encoded length ---------------------------------------------------------


@dataclass(frozen=True)
class EncodedLengthReport:
    codec: str
    payload_bytes: int
    duration_s: float
    normalized: float
    decile: Optional[int] = None
    unit_id: Optional[str] = None

    def with_decile(self, decile: int) -> "EncodedLengthReport":
        return EncodedLengthReport(**{**asdict(self), "decile": int(decile)})

    def to_dict(self) -> dict:
        return asdict(self)


def serialize_pcm16(clip: AudioClip) -> bytes:
    """Little-endian 16-bit PCM bytes of the clip: the codec input."""
    return to_pcm16(clip.samples).tobytes()


def encoded_length(
    clip: AudioClip, codec: Codec = LZW, *, unit_id: Optional[str] = None, verify: bool = True
) -> EncodedLengthReport:
    """Payload size ``H(M)`` of the clip under ``codec``, also per second of audio.

    With ``verify`` the payload is decoded again and compared with the input;
    a mismatch raises :class:`CodecError`.
    """
    raw = serialize_pcm16(clip)
    payload = codec.encode(raw)
    if verify and codec.decode(payload) != raw:
        raise CodecError(f"codec {codec.name!r} does not round-trip this clip")
    h = len(payload)
    return EncodedLengthReport(codec.name, h, clip.duration_s, h / clip.duration_s, unit_id=unit_id)


def is_standard_preview(duration_s: float, lengths: Sequence[float] = PREVIEW_LENGTHS_S, tol_s: float = 0.5) -> bool:
    """True when a clip lasts 30 or 90 seconds (within ``tol_s``)."""
    return any(abs(duration_s - L) <= tol_s for L in lengths)


def filter_previews(reports: Iterable[EncodedLengthReport], **kw) -> list[EncodedLengthReport]:
    return [r for r in reports if is_standard_preview(r.duration_s, **kw)]


# --- binning and correlation -----------------------------------------------


def decile_bin(values, n_bins: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Empirical quantile bins; returns ``(boundaries, labels)`` with labels 1..n_bins.

    The ``n_bins - 1`` inner boundaries are sample values (inverse-CDF
    quantiles), and a value equal to a boundary falls in the lower bin, so
    labels depend only on the ranks of the values.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise InputError("decile_bin needs at least one value")
    if n_bins < 1:
        raise InputError("n_bins must be positive")
    if not np.isfinite(v).all():
        raise InputError("decile_bin needs finite values")
    probs = np.arange(1, n_bins) / n_bins
    bounds = np.quantile(v, probs, method="inverted_cdf") if n_bins > 1 else np.empty(0)
    if bounds.size and np.unique(bounds).size < bounds.size:
        warnings.warn("decile boundaries are degenerate: too few distinct values", RuntimeWarning, stacklevel=2)
    labels = np.searchsorted(bounds, v, side="left") + 1
    return bounds, labels.astype(np.int64)


def pearson_r(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError("correlation needs two equal-length vectors")
    if x.size < 3:
        raise InputError("correlation needs at least three paired observations")
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = xc @ xc, yc @ yc
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("correlation is undefined: a vector has zero variance")
    return float(np.clip((xc @ yc) / np.sqrt(sxx * syy), -1.0, 1.0))


def repetition_sales_correlation(reports: Iterable[EncodedLengthReport], sales: Mapping[str, float]) -> float:
    """Pearson r between duration-normalized encoded length and sales over matched units."""
    pairs = [(r.normalized, sales[r.unit_id]) for r in reports if r.unit_id is not None and r.unit_id in sales]
    if not pairs:
        raise InputError("no report matches a unit in the sales map")
    x, y = zip(*pairs)
    return pearson_r(x, y)
