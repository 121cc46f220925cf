"""Parameter checkpoint serialization.

Layout: magic ``PTGC0001``; then per parameter: name length (u32 LE), name
bytes (utf-8), rank (u32 LE), extents (u32 LE each), values as float64 LE in
C order. Parameter order in the file is the model's registration order.
"""

import struct

import numpy as np

from gridaste.errors import ValidationError

MAGIC = b"PTGC0001"


def save_params(path, params: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, arr in params.items():
            data = np.ascontiguousarray(arr, dtype="<f8")
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<I", data.ndim))
            for extent in data.shape:
                fh.write(struct.pack("<I", extent))
            fh.write(data.tobytes())


def load_params(path) -> dict[str, np.ndarray]:
    """Read a checkpoint back into name -> float64 array, preserving order."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise ValidationError(f"not a parameter checkpoint: bad magic in {path}")
    pos = len(MAGIC)
    params: dict[str, np.ndarray] = {}

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise ValidationError(f"truncated checkpoint {path}")
        piece = blob[pos : pos + n]
        pos += n
        return piece

    while pos < len(blob):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        count = int(np.prod(shape, dtype=np.int64)) if rank else 1
        values = np.frombuffer(take(8 * count), dtype="<f8").reshape(shape)
        if name in params:
            raise ValidationError(f"duplicate parameter {name!r} in {path}")
        params[name] = values.astype(np.float64)
    return params
