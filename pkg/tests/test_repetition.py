import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from excerptlab.audio import AudioClip
from excerptlab.errors import CodecError, InputError, UndefinedCorrelationError
from excerptlab.repetition import (
    LZW,
    RLE_BINARY,
    Codec,
    EncodedLengthReport,
    decile_bin,
    encoded_length,
    filter_previews,
    get_codec,
    is_standard_preview,
    lzw_decode,
    lzw_encode,
    pearson_r,
    repetition_sales_correlation,
    rle_decode_binary,
    rle_decode_pedagogical,
    rle_encode_binary,
    rle_encode_pedagogical,
)

SR = 8000


class TestPedagogicalRle:
    @pytest.mark.parametrize(
        "text,code", [(b"aaaaabbbbb", b"5a5b"), (b"aabbabbaba", b"2a2ba2baba"), (b"a" * 12, b"9a3a"), (b"", b""), (b"a" * 9, b"9a"), (b"a" * 10, b"9aa")]
    )
    def test_examples(self, text, code):
        assert rle_encode_pedagogical(text) == code
        assert rle_decode_pedagogical(code) == text

    def test_accepts_str(self):
        assert rle_encode_pedagogical("aaaaabbbbb") == b"5a5b"

    def test_digits_rejected(self):
        with pytest.raises(InputError, match="rle_encode_binary"):
            rle_encode_pedagogical(b"aa11")

    @given(st.text(alphabet="abcxyz -", max_size=200))
    def test_roundtrip(self, text):
        data = text.encode()
        assert rle_decode_pedagogical(rle_encode_pedagogical(data)) == data

    @pytest.mark.parametrize("bad", [b"5", b"1a", b"55a"])
    def test_malformed_decode(self, bad):
        with pytest.raises(CodecError):
            rle_decode_pedagogical(bad)


class TestBinaryCodecs:
    def test_rle_examples(self):
        assert len(rle_encode_binary(bytes(255))) == 2
        assert len(rle_encode_binary(bytes([0, 1] * 100))) == 400

    def test_rle_malformed(self):
        with pytest.raises(CodecError):
            rle_decode_binary(b"\x00\x01")

    def test_lzw_empty(self):
        assert lzw_encode(b"") == b"" and lzw_decode(b"") == b""

    def test_lzw_malformed(self):
        with pytest.raises(CodecError):
            lzw_decode(b"\xff\xff\xff")

    def test_periodic_beats_random(self):
        rng = np.random.default_rng(0)
        periodic = len(lzw_encode(b"ab" * 500))
        for _ in range(100):
            assert periodic < len(lzw_encode(rng.integers(0, 256, 1000, dtype=np.uint8).tobytes()))

    @pytest.mark.parametrize("codec", [LZW, RLE_BINARY], ids=lambda c: c.name)
    @given(data=st.one_of(st.binary(max_size=3000), st.binary(min_size=1, max_size=8).map(lambda b: b * 300)))
    def test_lossless(self, codec, data):
        assert codec.decode(codec.encode(data)) == data

    def test_get_codec(self):
        assert get_codec("lzw") is LZW
        with pytest.raises(InputError):
            get_codec("aac")


class TestEncodedLength:
    def test_silence_vs_noise(self):
        rng = np.random.default_rng(1)
        silence = encoded_length(AudioClip(np.zeros(30 * SR), SR))
        noisy = encoded_length(AudioClip(rng.uniform(-1, 1, 30 * SR), SR))
        assert silence.payload_bytes < 0.05 * noisy.payload_bytes
        assert noisy.normalized == noisy.payload_bytes / 30.0

    def test_self_concatenation_exploited(self):
        rng = np.random.default_rng(2)
        base = rng.uniform(-0.2, 0.2, 30 * SR)
        one = encoded_length(AudioClip(base, SR)).payload_bytes
        two = encoded_length(AudioClip(np.r_[base, base], SR)).payload_bytes
        assert two < 2 * one

    def test_deterministic(self):
        clip = AudioClip(np.sin(np.arange(SR) / 7) * 0.5, SR)
        assert encoded_length(clip) == encoded_length(clip)

    def test_roundtrip_failure_is_codec_error(self):
        broken = Codec("broken", lambda b: b[:-1], lambda b: b)
        with pytest.raises(CodecError):
            encoded_length(AudioClip(np.full(100, 0.1), SR), broken)


class TestDecileBin:
    def test_one_to_hundred(self):
        _, labels = decile_bin(np.arange(1, 101))
        for k in range(1, 11):
            assert set(np.arange(1, 101)[labels == k]) == set(range(10 * k - 9, 10 * k + 1))

    def test_boundary_goes_low(self):
        b, labels = decile_bin(np.arange(1, 101))
        assert b[0] == 10 and labels[9] == 1

    def test_all_equal_warns(self):
        with pytest.warns(RuntimeWarning, match="degenerate"):
            _, labels = decile_bin([3.0] * 20)
        assert (labels == 1).all()

    def test_empty(self):
        with pytest.raises(InputError):
            decile_bin([])

    @given(st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=200), st.randoms())
    def test_invariances(self, values, rnd):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            v = np.asarray(values, dtype=float)
            _, base = decile_bin(v)
            _, mono = decile_bin(np.arcsinh(v) * 3 + 1)
            order = list(range(len(v)))
            rnd.shuffle(order)
            _, perm = decile_bin(v[order])
            _, scaled = decile_bin(v * 2.5)
        np.testing.assert_array_equal(base, mono)
        np.testing.assert_array_equal(base[order], perm)
        np.testing.assert_array_equal(base, scaled)
        assert base.min() >= 1 and base.max() <= 10

    def test_matches_sort_and_slice(self, rng):
        v = rng.permutation(1000).astype(float)
        _, labels = decile_bin(v)
        order = np.argsort(v)
        np.testing.assert_array_equal(labels[order], np.repeat(np.arange(1, 11), 100))


class TestCorrelation:
    def reports(self, xs):
        return [EncodedLengthReport("lzw", int(x), 1.0, float(x), unit_id=f"u{i}") for i, x in enumerate(xs)]

    def test_perfect(self):
        xs = [1.0, 2.0, 5.0, 7.0]
        sales = {f"u{i}": x for i, x in enumerate(xs)}
        assert repetition_sales_correlation(self.reports(xs), sales) == pytest.approx(1.0)
        sales = {k: -v for k, v in sales.items()}
        assert repetition_sales_correlation(self.reports(xs), sales) == pytest.approx(-1.0)

    def test_independent(self, rng):
        assert abs(pearson_r(rng.normal(size=10**4), rng.normal(size=10**4))) < 0.05

    def test_zero_variance(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson_r([1, 1, 1], [1, 2, 3])

    def test_too_few(self):
        with pytest.raises(InputError):
            pearson_r([1, 2], [1, 2])


def test_preview_filter():
    assert is_standard_preview(30.0) and is_standard_preview(90.2) and not is_standard_preview(60.0)
    reps = [EncodedLengthReport("lzw", 1, d, 1 / d) for d in (30.0, 45.0, 90.0)]
    assert [r.duration_s for r in filter_previews(reps)] == [30.0, 90.0]
