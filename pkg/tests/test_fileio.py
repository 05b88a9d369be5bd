import struct
import wave
import zlib

import numpy as np
import pytest
from PIL import Image

from timbrekit.analysis import (ComplexSpectrogram, CqtParams, LogMagSpectrogram, StftParams,
                                Waveform, cqt, log_magnitude, stft)
from timbrekit.errors import CorruptFile
from timbrekit.fileio import (dumps_spectrogram, load_spectrogram, loads_spectrogram, read_wav,
                              save_spectrogram, write_wav)
from timbrekit.rainbowgram import rainbowgram_rgb, save_rainbowgram

SR = 16000


def raw_wav(path, data: bytes, channels=1, width=2, rate=SR):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(data)


# --- WAV

def test_wav_roundtrip_is_bit_exact(tmp_path):
    pcm = np.random.default_rng(0).integers(-32768, 32768, 5000).astype("<i2")
    path = tmp_path / "a.wav"
    raw_wav(path, pcm.tobytes())
    wave_in = read_wav(path)
    assert wave_in.sample_rate == SR
    np.testing.assert_array_equal(wave_in.samples, pcm / 32768.0)
    out = tmp_path / "b.wav"
    write_wav(out, wave_in)
    assert out.read_bytes() == path.read_bytes()


def test_write_clips_out_of_range(tmp_path):
    path = tmp_path / "c.wav"
    write_wav(path, Waveform(np.array([2.0, -2.0, 0.5])))
    np.testing.assert_array_equal(read_wav(path).samples, [32767 / 32768, -1.0, 0.5])


@pytest.mark.parametrize("kwargs,word", [
    (dict(channels=2), "channels"),
    (dict(width=1), "sample width"),
    (dict(rate=44100), "sample rate"),
])
def test_wav_rejects_unsupported_formats(tmp_path, kwargs, word):
    path = tmp_path / "bad.wav"
    raw_wav(path, bytes(400), **kwargs)
    with pytest.raises(CorruptFile, match=word):
        read_wav(path)


def test_wav_rejects_garbage(tmp_path):
    path = tmp_path / "junk.wav"
    path.write_bytes(b"not a wav file at all")
    with pytest.raises(CorruptFile):
        read_wav(path)


# --- .ttsg

def _specs():
    x = Waveform(np.random.default_rng(1).normal(size=3000) * 0.3)
    c, s = cqt(x), stft(x)
    return [log_magnitude(s), log_magnitude(c), c, s]


@pytest.mark.parametrize("idx", range(4))
def test_ttsg_roundtrip_all_representations(tmp_path, idx):
    spec = _specs()[idx]
    path = tmp_path / "s.ttsg"
    save_spectrogram(path, spec)
    assert path.read_bytes()[5] == idx  # representation code
    back = load_spectrogram(path)
    assert type(back) is type(spec)
    assert back.repr == spec.repr and back.params == spec.params
    np.testing.assert_array_equal(back.data, spec.data.astype(np.complex64 if isinstance(back, ComplexSpectrogram) else np.float32))


def test_ttsg_keeps_normalization_state():
    spec = _specs()[1]
    for state in ("raw", "domain_normalized", "conditioning_shifted"):
        assert loads_spectrogram(dumps_spectrogram(spec.replace(normalization_state=state))).normalization_state == state


def test_ttsg_header_layout():
    spec = _specs()[1]
    blob = dumps_spectrogram(spec)
    magic, version, code, _, frames, bins, sr, hop = struct.unpack_from("<4sBBHIIII", blob)
    assert (magic, version, code, frames, bins, sr, hop) == (b"TTSG", 1, 1, spec.n_frames, 336, SR, 256)
    payload = blob[struct.calcsize("<4sBBHIIIIdddB"):-4]
    assert struct.unpack("<I", blob[-4:])[0] == zlib.crc32(payload)
    assert len(payload) == spec.n_frames * 336 * 4


def test_ttsg_corruption_detected():
    blob = bytearray(dumps_spectrogram(_specs()[0]))
    flipped = bytearray(blob)
    flipped[60] ^= 0x40
    with pytest.raises(CorruptFile, match="CRC"):
        loads_spectrogram(bytes(flipped))
    with pytest.raises(CorruptFile):
        loads_spectrogram(bytes(blob[:-10]))
    with pytest.raises(CorruptFile, match="magic"):
        loads_spectrogram(b"XXXX" + bytes(blob[4:]))
    with pytest.raises(CorruptFile):
        loads_spectrogram(b"TTSG")


# --- rainbowgram

def test_rainbowgram_geometry_and_value(tmp_path):
    x = Waveform(0.5 * np.sin(2 * np.pi * 440 * np.arange(8000) / SR))
    spec = cqt(x)
    img = rainbowgram_rgb(spec)
    assert img.shape == (336, spec.n_frames, 3) and img.dtype == np.uint8
    value = img.max(axis=2)  # HSV value with full saturation is the max RGB channel
    assert value.max() >= 254
    # the 440 Hz bin (index 180) is brightest; row 0 is the highest bin
    assert np.argmax(value[:, spec.n_frames // 2]) == 335 - 180
    path = tmp_path / "r.png"
    save_rainbowgram(path, spec)
    assert Image.open(path).size == (spec.n_frames, 336)


def test_rainbowgram_hue_follows_instantaneous_frequency():
    params = StftParams(window_len=8, hop=4)
    frames = 6
    # bin 0 has zero phase advance (hue 0.5 turn), bin 1 advances by -pi/2 (hue 0.25 turn)
    data = np.ones((frames, 5), complex)
    data[:, 1] = np.exp(-0.5j * np.pi * np.arange(frames))
    data[:, 4] = 1e-3  # something darker so the magnitude range is not empty
    img = rainbowgram_rgb(ComplexSpectrogram(data, params))
    hsv = np.asarray(Image.fromarray(img, "RGB").convert("HSV")).astype(int)
    assert abs(hsv[-1, 3, 0] - 128) <= 2  # bottom row is bin 0
    assert abs(hsv[-2, 3, 0] - 64) <= 2
