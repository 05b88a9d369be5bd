import numpy as np
import pytest

from timbrekit.errors import CorruptFile, ShapeMismatch
from timbrekit.wavenet import WaveNetConfig, init_weights, load_weights, param_shapes, save_weights
from timbrekit.wavenet.checkpoint import dumps_weights, loads_weights


def cfg():
    return WaveNetConfig.small(2, 4, cond_channels=10, dilation_cycle=2)


@pytest.mark.parametrize("with_ema", [True, False])
def test_roundtrip_bit_exact(tmp_path, with_ema):
    w = init_weights(cfg(), 3, with_ema=with_ema)
    if with_ema:
        w.ema = {k: v + 1 for k, v in w.ema.items()}
    path = tmp_path / "w.ttwn"
    save_weights(path, w)
    back = load_weights(path)
    assert back.config == w.config
    for name, _ in param_shapes(w.config):
        assert back.params[name].tobytes() == w.params[name].tobytes()
        if with_ema:
            assert back.ema[name].tobytes() == w.ema[name].tobytes()
    assert (back.ema is None) == (not with_ema)


def test_layout_header_and_trailer():
    import struct
    import zlib
    blob = dumps_weights(init_weights(cfg(), 0, with_ema=False))
    magic, version, *dims, has_ema = struct.unpack_from("<4sB8IB", blob)
    assert magic == b"TTWN" and version == 1 and has_ema == 0
    assert dims == [2, 2, 3, 4, 4, 8, 10, 256]
    assert struct.unpack("<I", blob[-4:])[0] == zlib.crc32(blob[:-4])
    first = np.frombuffer(blob, dtype="<f4", count=3 * 4, offset=struct.calcsize("<4sB8IB"))
    w = loads_weights(blob)
    assert np.array_equal(first, w.params["init.w"].ravel())


def test_corruption_detected():
    blob = dumps_weights(init_weights(cfg(), 0))
    with pytest.raises(CorruptFile):
        loads_weights(blob[:-10])
    with pytest.raises(CorruptFile):
        loads_weights(b"XXXX" + blob[4:])
    flipped = bytearray(blob)
    flipped[60] ^= 0xFF
    with pytest.raises(CorruptFile):
        loads_weights(bytes(flipped))
    with pytest.raises(CorruptFile):
        loads_weights(b"")


def test_config_mismatch():
    blob = dumps_weights(init_weights(cfg(), 0))
    with pytest.raises(ShapeMismatch):
        loads_weights(blob, WaveNetConfig.small(3, 4, cond_channels=10, dilation_cycle=2))
    assert loads_weights(blob, cfg()).config == cfg()
