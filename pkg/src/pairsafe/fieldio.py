"""Binary persistence for value fields.

Layout (little-endian)::

    b"CBVF"            magic
    u32                format version
    u8 u8 u8           dynamics id, field kind, axis count
    per axis           u32 n, f64 lo, f64 hi, u8 periodic
    u32 + bytes        JSON metadata block
    f64[...]           payload, row-major (axis 0 slowest)
    u32                CRC32 of the payload bytes
"""

import json
import os
import struct
import zlib

import numpy as np

from .dynamics import DynamicsKind
from .errors import CorruptPayload, FormatVersionMismatch
from .grid import Axis, FieldKind, GridSpec, ValueField

MAGIC = b"CBVF"
FORMAT_VERSION = 1

_HEAD = struct.Struct("<4sIBBB")
_AXIS = struct.Struct("<IddB")
_U32 = struct.Struct("<I")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def encode_field(field):
    spec = field.spec
    parts = [_HEAD.pack(MAGIC, FORMAT_VERSION, field.dynamics.value, field.kind.value, spec.ndim)]
    for ax in spec.axes:
        parts.append(_AXIS.pack(ax.n, ax.lo, ax.hi, int(ax.periodic)))
    meta = json.dumps(_jsonable(field.metadata), sort_keys=True).encode("utf-8")
    parts.append(_U32.pack(len(meta)))
    parts.append(meta)
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    parts.append(payload)
    parts.append(_U32.pack(zlib.crc32(payload)))
    return b"".join(parts)


def decode_field(blob):
    if len(blob) < _HEAD.size or blob[:4] != MAGIC:
        raise FormatVersionMismatch("not a value-field file (bad magic)")
    _, version, dyn, kind, ndim = _HEAD.unpack_from(blob, 0)
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(f"file format version {version}, expected {FORMAT_VERSION}")
    pos = _HEAD.size
    try:
        axes = []
        for _ in range(ndim):
            n, lo, hi, per = _AXIS.unpack_from(blob, pos)
            pos += _AXIS.size
            axes.append(Axis(n, lo, hi, bool(per)))
        (mlen,) = _U32.unpack_from(blob, pos)
        pos += _U32.size
        meta_bytes = blob[pos : pos + mlen]
        if len(meta_bytes) != mlen:
            raise CorruptPayload("truncated metadata block")
        pos += mlen
        spec = GridSpec(tuple(axes))
        nbytes = 8 * int(np.prod(spec.shape))
        if len(blob) != pos + nbytes + _U32.size:
            raise CorruptPayload(f"payload size mismatch: file has {len(blob) - pos} bytes after header, expected {nbytes + 4}")
        payload = blob[pos : pos + nbytes]
        (crc,) = _U32.unpack_from(blob, pos + nbytes)
    except struct.error as exc:
        raise CorruptPayload(f"truncated header: {exc}") from None
    if zlib.crc32(payload) != crc:
        raise CorruptPayload("payload checksum mismatch")
    try:
        metadata = json.loads(meta_bytes.decode("utf-8"))
        dynamics = DynamicsKind(dyn)
        fkind = FieldKind(kind)
    except (ValueError, UnicodeDecodeError) as exc:
        raise CorruptPayload(f"bad header fields: {exc}") from None
    values = np.frombuffer(payload, dtype="<f8").reshape(spec.shape).copy()
    return ValueField(spec, values, fkind, dynamics, metadata)


def save_field(field, path):
    """Write ``field`` atomically (temporary file then rename)."""
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(encode_field(field))
    os.replace(tmp, path)


def load_field(path):
    with open(os.fspath(path), "rb") as fh:
        return decode_field(fh.read())


def file_checksum(path):
    """CRC32 of a whole file as 8 hex digits (for manifests)."""
    crc = 0
    with open(os.fspath(path), "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            crc = zlib.crc32(chunk, crc)
    return f"{crc:08x}"
