"""Flat binary containers for sinograms ("CRDN1") and volumes ("CRVL1").

Layout, little-endian throughout:

    magic           5 bytes
    n               u32   complex dimension
    header fields   (see _SINO / _VOL below)
    meta_len        u32
    meta            meta_len bytes of UTF-8 JSON
    values          float64 pairs (re, im), row-major
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .numerics import SGrid, Sinogram, sphere_grid
from .transform import VolumeGrid

SINO_MAGIC = b"CRDN1"
VOL_MAGIC = b"CRVL1"
# n, n_eta, n_theta, section, center re/im, extent, count, margin
_SINO = struct.Struct("<IIIBdddII")
# n, centre (2 complex), extent, count
_VOL = struct.Struct("<IdddddI")


def _meta_bytes(meta: dict) -> bytes:
    return json.dumps(meta, sort_keys=True, separators=(",", ":"), default=str).encode("utf-8")


def _values_bytes(values) -> bytes:
    v = np.ascontiguousarray(np.asarray(values, dtype=np.complex128))
    return v.view(np.float64).astype("<f8", copy=False).tobytes()


def _read_values(buf: bytes, offset: int, count: int) -> np.ndarray:
    need = offset + 16 * count
    if len(buf) != need:
        raise ValueError(f"container payload has {len(buf) - offset} bytes, expected {16 * count}")
    flat = np.frombuffer(buf, dtype="<f8", offset=offset, count=2 * count)
    return flat[0::2] + 1j * flat[1::2]


def sinogram_to_bytes(S: Sinogram) -> bytes:
    g = S.sgrid
    c = complex(g.center)
    head = _SINO.pack(2, S.sphere.n_eta, S.sphere.n_theta, int(S.sphere.section), c.real, c.imag, g.extent, g.count, S.margin)
    meta = _meta_bytes(S.provenance)
    return SINO_MAGIC + head + struct.pack("<I", len(meta)) + meta + _values_bytes(S.values)


def sinogram_from_bytes(buf: bytes) -> Sinogram:
    if buf[:5] != SINO_MAGIC:
        raise ValueError(f"not a sinogram container (magic {buf[:5]!r})")
    off = 5
    n, n_eta, n_theta, section, cr, ci, extent, count, margin = _SINO.unpack_from(buf, off)
    if n != 2:
        raise ValueError(f"only n = 2 containers are supported, got n = {n}")
    off += _SINO.size
    (meta_len,) = struct.unpack_from("<I", buf, off)
    off += 4
    meta = json.loads(buf[off : off + meta_len].decode("utf-8"))
    off += meta_len
    sphere = sphere_grid(n_eta, n_theta, section=bool(section))
    sgrid = SGrid(complex(cr, ci), extent, count)
    vals = _read_values(buf, off, len(sphere) * count * count)
    return Sinogram(sphere, sgrid, vals.reshape(len(sphere), count * count), margin, meta)


def volume_to_bytes(V: VolumeGrid) -> bytes:
    if V.values is None:
        raise ValueError("volume has no values to write")
    c1, c2 = V.center
    head = _VOL.pack(2, c1.real, c1.imag, c2.real, c2.imag, V.extent, V.count)
    meta = _meta_bytes(V.provenance)
    return VOL_MAGIC + head + struct.pack("<I", len(meta)) + meta + _values_bytes(V.values)


def volume_from_bytes(buf: bytes) -> VolumeGrid:
    if buf[:5] != VOL_MAGIC:
        raise ValueError(f"not a volume container (magic {buf[:5]!r})")
    off = 5
    n, a, b, c, d, extent, count = _VOL.unpack_from(buf, off)
    if n != 2:
        raise ValueError(f"only n = 2 containers are supported, got n = {n}")
    off += _VOL.size
    (meta_len,) = struct.unpack_from("<I", buf, off)
    off += 4
    meta = json.loads(buf[off : off + meta_len].decode("utf-8"))
    off += meta_len
    vals = _read_values(buf, off, count**4)
    return VolumeGrid((complex(a, b), complex(c, d)), extent, count, vals, meta)


def write(path, obj) -> None:
    data = sinogram_to_bytes(obj) if isinstance(obj, Sinogram) else volume_to_bytes(obj)
    with open(path, "wb") as fh:
        fh.write(data)


def read(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:5] == SINO_MAGIC:
        return sinogram_from_bytes(buf)
    return volume_from_bytes(buf)
