import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from excerptlab.audio import AudioClip, frame, load_wav, parse_wav, to_pcm16, wav_bytes, write_wav
from excerptlab.errors import InputError, MalformedHeaderError, TruncatedDataError, UnsupportedFormatError


def riff(fmt_fields, payload, extra_chunks=b""):
    fmt = struct.pack("<HHIIHH", *fmt_fields)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + extra_chunks + b"data" + struct.pack("<I", len(payload)) + payload
    return b"RIFF" + struct.pack("<I", len(body)) + body


def test_sine_file(tmp_path):
    t = np.arange(44100) / 44100
    clip = AudioClip(0.8 * np.sin(2 * np.pi * 440 * t), 44100)
    write_wav(tmp_path / "a.wav", clip)
    back = load_wav(tmp_path / "a.wav")
    assert len(back) == 44100 and np.abs(back.samples).max() <= 1.0


def test_most_negative_sample_is_minus_one():
    clip = parse_wav(riff((1, 1, 8000, 16000, 2, 16), struct.pack("<h", -32768)))
    assert clip.samples[0] == -1.0


def test_stereo_downmix_cancels():
    frames = struct.pack("<hh", 16384, -16384) * 10
    clip = parse_wav(riff((1, 2, 8000, 32000, 4, 16), frames))
    assert len(clip) == 10 and not clip.samples.any()


def test_8_and_24_bit():
    c8 = parse_wav(riff((1, 1, 8000, 8000, 1, 8), bytes([0, 128, 255])))
    np.testing.assert_array_equal(c8.samples, [-1.0, 0.0, 127 / 128])
    raw = b"".join(v.to_bytes(3, "little", signed=True) for v in (-(1 << 23), 0, (1 << 23) - 1))
    c24 = parse_wav(riff((1, 1, 8000, 24000, 3, 24), raw))
    np.testing.assert_array_equal(c24.samples, [-1.0, 0.0, ((1 << 23) - 1) / (1 << 23)])


def test_float32_and_unknown_chunks_skipped():
    payload = np.array([0.25, -0.5], dtype="<f4").tobytes()
    extra = b"LIST" + struct.pack("<I", 3) + b"abc" + b"\x00"
    clip = parse_wav(riff((3, 1, 8000, 32000, 4, 32), payload, extra))
    np.testing.assert_array_equal(clip.samples, [0.25, -0.5])


def test_extensible_header():
    fmt = struct.pack("<HHIIHHHHI", 0xFFFE, 1, 8000, 16000, 2, 16, 22, 16, 0) + struct.pack("<H", 1) + b"\x00" * 14
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", 2) + struct.pack("<h", 16384)
    clip = parse_wav(b"RIFF" + struct.pack("<I", len(body)) + body)
    assert clip.samples[0] == 0.5


@pytest.mark.parametrize(
    "data,err",
    [
        (b"JUNK" + b"\x00" * 40, MalformedHeaderError),
        (b"RIFF\x00\x00\x00\x00WAVE", MalformedHeaderError),
        (riff((2, 1, 8000, 16000, 2, 16), b"\x00\x00"), UnsupportedFormatError),
        (riff((1, 3, 8000, 48000, 6, 16), b"\x00" * 6), UnsupportedFormatError),
        (riff((1, 1, 8000, 16000, 2, 16), b"\x00\x00\x00"), TruncatedDataError),
        (riff((1, 1, 8000, 16000, 2, 16), b"\x00" * 8)[:-4], TruncatedDataError),
    ],
)
def test_parse_errors(data, err):
    with pytest.raises(err):
        parse_wav(data)


@given(hnp.arrays(np.int16, st.integers(1, 500)))
def test_pcm16_roundtrip_bit_exact(values):
    clip = AudioClip(values.astype(np.float64) / 32768.0, 16000)
    back = parse_wav(wav_bytes(clip))
    np.testing.assert_array_equal(to_pcm16(back.samples), values)
    np.testing.assert_array_equal(back.samples, clip.samples)


def test_clip_validation():
    for bad in ([], [np.nan], [1.5]):
        with pytest.raises(InputError):
            AudioClip(np.array(bad, dtype=float), 8000)
    with pytest.raises(InputError):
        AudioClip(np.zeros(4), 0)


class TestFrame:
    def test_thirty_seconds(self):
        fs = frame(AudioClip(np.zeros(48000 * 30), 48000))
        assert fs.frames.shape == (1500, 960)

    def test_one_hop(self):
        assert len(frame(AudioClip(np.zeros(960), 48000))) == 1

    def test_proportional(self):
        a = frame(AudioClip(np.zeros(16000 * 30), 16000))
        b = frame(AudioClip(np.zeros(16000 * 90), 16000))
        assert len(b) == 3 * len(a)

    def test_partial_dropped_and_scale_invariant(self, rng):
        s = rng.uniform(-0.5, 0.5, 1000)
        assert len(frame(AudioClip(s, 8000))) == len(frame(AudioClip(2 * s, 8000))) == 6

    def test_fractional_hop(self):
        with pytest.raises(InputError):
            frame(AudioClip(np.zeros(44100), 44100), 0.0101)

    def test_too_short(self):
        with pytest.raises(InputError):
            frame(AudioClip(np.zeros(10), 48000))
