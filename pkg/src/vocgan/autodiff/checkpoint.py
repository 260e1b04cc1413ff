"""Binary parameter container.

Layout (all integers little-endian)::

    magic    4 bytes  b"VOCG"
    version  u32
    count    u32
    repeated `count` times:
        name_len  u16
        name      name_len bytes, UTF-8
        rank      u8
        extents   rank x u32
        data      prod(extents) x f32, row-major

Values are stored as 32-bit floats; a float32 model round-trips losslessly.
"""

import struct
from collections import OrderedDict

import numpy as np

MAGIC = b"VOCG"
VERSION = 1


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    def __init__(self, found, expected=VERSION):
        super().__init__(
            f"checkpoint format version {found} is not supported (this build reads version {expected})"
        )
        self.found, self.expected = found, expected


def save_checkpoint(path, named_arrays):
    items = list(named_arrays.items()) if hasattr(named_arrays, "items") else list(named_arrays)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(items)))
        for name, array in items:
            array = np.asarray(getattr(array, "data", array) if not isinstance(array, np.ndarray) else array)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", array.ndim))
            fh.write(struct.pack(f"<{array.ndim}I", *array.shape))
            fh.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a VOCG checkpoint (magic {blob[:4]!r})")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CheckpointVersionError(version)
    offset = 12
    out = OrderedDict()
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        shape = struct.unpack_from(f"<{rank}I", blob, offset)
        offset += 4 * rank
        n = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(blob, dtype="<f4", count=n, offset=offset)
        offset += 4 * n
        out[name] = data.reshape(shape).astype(np.float32)
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return out
