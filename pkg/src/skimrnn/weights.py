"""Binary weight container: JSON header plus named float64 arrays.

Layout (all integers little-endian):
    magic     8 bytes  b"SKIMWGT1"
    u32       header length in bytes
    bytes     header JSON (utf-8, sorted keys); always carries
              format_version, d_in, d, d_small, k, gate_order
    u32       array count
    per array:
        u16   name length, then name (utf-8)
        u8    ndim
        u32*  dims
        f64*  data, little-endian, row-major

Writes are deterministic byte-for-byte given the same header and arrays,
and a read/write round trip is bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"SKIMWGT1"
FORMAT_VERSION = 1
GATE_ORDER = "ifog"


class WeightFileError(ValueError):
    """Malformed or truncated weight container."""


def write_weights(path, header: dict, arrays: dict[str, np.ndarray]) -> None:
    header = dict(header)
    header.setdefault("format_version", FORMAT_VERSION)
    header.setdefault("gate_order", GATE_ORDER)
    for key in ("d_in", "d", "d_small", "k"):
        if key not in header:
            raise WeightFileError(f"weight header missing required field '{key}'")
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            data = np.ascontiguousarray(arr, dtype="<f8")
            if data.ndim > 2:
                raise WeightFileError(f"array '{name}' has unsupported ndim {data.ndim}")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", data.ndim))
            for dim in data.shape:
                f.write(struct.pack("<I", dim))
            f.write(data.tobytes())


def read_weights(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:8] != MAGIC:
        raise WeightFileError(f"{path}: not a weight container (bad magic)")
    off = 8
    (hlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    try:
        header = json.loads(raw[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise WeightFileError(f"{path}: bad header ({e})") from None
    off += hlen
    if header.get("format_version") != FORMAT_VERSION:
        raise WeightFileError(f"{path}: unsupported format version {header.get('format_version')}")
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<B", raw, off)
        off += 1
        shape = []
        for _ in range(ndim):
            (dim,) = struct.unpack_from("<I", raw, off)
            off += 4
            shape.append(dim)
        n = int(np.prod(shape)) if shape else 1
        end = off + 8 * n
        if end > len(raw):
            raise WeightFileError(f"{path}: truncated array '{name}'")
        arr = np.frombuffer(raw[off:end], dtype="<f8").astype(np.float64).reshape(shape)
        off = end
        arrays[name] = arr
    if off != len(raw):
        raise WeightFileError(f"{path}: {len(raw) - off} trailing bytes")
    return header, arrays
