import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cradon import container as ct
from cradon.numerics import SGrid, Sinogram, sphere_grid
from cradon.transform import VolumeGrid


def make_sinogram(seed=0, section=True):
    rng = np.random.default_rng(seed)
    sphere = sphere_grid(4, 5, section=section)
    g = SGrid(0.25 - 0.5j, 1.5, 9)
    vals = rng.standard_normal((len(sphere), 81)) + 1j * rng.standard_normal((len(sphere), 81))
    return Sinogram(sphere, g, vals, 2, {"method": "test", "note": "x"})


@given(st.integers(0, 1000), st.booleans())
def test_sinogram_roundtrip_bitwise(seed, section):
    S = make_sinogram(seed, section)
    R = ct.sinogram_from_bytes(ct.sinogram_to_bytes(S))
    assert np.array_equal(R.values, S.values)
    assert R.sgrid == S.sgrid and R.margin == S.margin and R.provenance == S.provenance
    assert R.sphere.params == S.sphere.params


def test_sinogram_layout():
    S = make_sinogram()
    buf = ct.sinogram_to_bytes(S)
    assert buf[:5] == b"CRDN1"
    (n,) = struct.unpack_from("<I", buf, 5)
    assert n == 2
    # trailing payload: interleaved little-endian (re, im), row-major (node, s-row, s-col)
    tail = np.frombuffer(buf[-16 * S.values.size :], dtype="<f8")
    assert tail[0] == S.values[0, 0].real and tail[1] == S.values[0, 0].imag
    assert tail[2] == S.values[0, 1].real


def test_volume_roundtrip(tmp_path):
    V = VolumeGrid((0.1j, -0.2), 1.0, 3, np.arange(81) * (1 + 0.5j), {"c_n": 0.016})
    path = tmp_path / "v.crvl"
    ct.write(path, V)
    R = ct.read(path)
    assert np.array_equal(R.values, V.values)
    assert R.center == V.center and R.extent == V.extent and R.provenance == V.provenance


def test_file_roundtrip_sinogram(tmp_path):
    S = make_sinogram(3)
    ct.write(tmp_path / "s.crdn", S)
    assert np.array_equal(ct.read(tmp_path / "s.crdn").values, S.values)


def test_rejects_bad_magic_and_truncation():
    buf = ct.sinogram_to_bytes(make_sinogram())
    with pytest.raises(ValueError, match="magic"):
        ct.sinogram_from_bytes(b"XXXXX" + buf[5:])
    with pytest.raises(ValueError, match="bytes"):
        ct.sinogram_from_bytes(buf[:-8])


def test_volume_without_values_rejected():
    with pytest.raises(ValueError):
        ct.volume_to_bytes(VolumeGrid())
