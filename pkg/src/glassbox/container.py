"""Shared binary container: magic, length-prefixed JSON manifest, payload, CRC32.

Layout:
    bytes 0..8    ASCII magic (8 bytes)
    bytes 8..12   little-endian uint32 manifest length L
    bytes 12..12+L  UTF-8 JSON manifest
    ...           payload (raw bytes; manifest records offsets into it)
    last 4 bytes  little-endian uint32 CRC32 of the payload

Used for model files ("GBOXMDL1"), activation dumps ("GBOXACT1") and dataset
files ("GBOXDS01").
"""

import json
import struct
import zlib

from .errors import FormatError

MAGIC_LEN = 8
_LEN = struct.Struct("<I")


def dumps_manifest(manifest):
    """Deterministic JSON encoding (sorted keys, no whitespace padding)."""
    return json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_container(path, magic, manifest, payload):
    magic_b = magic.encode("ascii")
    if len(magic_b) != MAGIC_LEN:
        raise ValueError(f"magic must be {MAGIC_LEN} bytes, got {magic!r}")
    man = dumps_manifest(manifest)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    with open(path, "wb") as f:
        f.write(magic_b)
        f.write(_LEN.pack(len(man)))
        f.write(man)
        f.write(payload)
        f.write(_LEN.pack(crc))


def read_container(path, magic):
    """Read and validate a container; returns (manifest, payload)."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < MAGIC_LEN + _LEN.size + _LEN.size:
        raise FormatError(f"file too short for container header", offset=len(blob))
    got_magic = blob[:MAGIC_LEN]
    if got_magic != magic.encode("ascii"):
        raise FormatError(f"bad magic {got_magic!r}, expected {magic!r}", offset=0)
    (man_len,) = _LEN.unpack_from(blob, MAGIC_LEN)
    man_start = MAGIC_LEN + _LEN.size
    man_end = man_start + man_len
    if man_end + _LEN.size > len(blob):
        raise FormatError("truncated manifest", offset=man_start)
    try:
        manifest = json.loads(blob[man_start:man_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"manifest is not valid JSON: {exc}", offset=man_start)
    payload = blob[man_end:-_LEN.size]
    (want_crc,) = _LEN.unpack_from(blob, len(blob) - _LEN.size)
    got_crc = zlib.crc32(payload) & 0xFFFFFFFF
    if got_crc != want_crc:
        raise FormatError(
            f"payload CRC mismatch: stored {want_crc:#010x}, computed {got_crc:#010x}",
            offset=man_end,
        )
    return manifest, payload
