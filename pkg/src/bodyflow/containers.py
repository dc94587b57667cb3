"""Binary tensor container used for checkpoints and precomputed-prior caches.

Layout::

    bytes 0..7    magic  b"BFTENSOR"
    bytes 8..11   header length N, little-endian uint32
    bytes 12..    JSON header (UTF-8, N bytes)
    then          payload: the tensors, contiguous little-endian float32
    last 4 bytes  CRC32 of the payload, little-endian uint32

The header carries ``format_version``, a ``tensors`` list ({name, dtype,
shape, offset, nbytes} with offsets relative to the payload start) and a
free-form ``meta`` dict for configuration snapshots. Everything needed to
list the contents lives in the header, so `inspect` never touches the
payload.
"""

import json
import struct
import zlib
from typing import Dict, Tuple

import numpy as np

from .errors import CorruptCheckpointError, IncompatibleCheckpointError

MAGIC = b"BFTENSOR"
FORMAT_VERSION = 1
_PAYLOAD_DTYPE = "<f4"


def write_container(path, tensors: Dict[str, np.ndarray], meta: dict = None) -> None:
    """Write named float32 arrays plus a JSON-serializable ``meta`` dict."""
    entries = []
    chunks = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype=np.float32)
        raw = arr.astype(_PAYLOAD_DTYPE, copy=False).tobytes()
        entries.append(
            {
                "name": str(name),
                "dtype": _PAYLOAD_DTYPE,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = {
        "format_version": FORMAT_VERSION,
        "payload_nbytes": len(payload),
        "tensors": entries,
        "meta": meta or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def _read_header(fh, path) -> dict:
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise CorruptCheckpointError(f"{path}: not a tensor container (bad magic)")
    raw_len = fh.read(4)
    if len(raw_len) != 4:
        raise CorruptCheckpointError(f"{path}: truncated before header length")
    (header_len,) = struct.unpack("<I", raw_len)
    header_bytes = fh.read(header_len)
    if len(header_bytes) != header_len:
        raise CorruptCheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{path}: unreadable header ({exc})") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise IncompatibleCheckpointError(
            f"{path}: container format version {version!r}, "
            f"this build reads version {FORMAT_VERSION}"
        )
    return header


def inspect_container(path) -> dict:
    """Return the parsed header (names, dtypes, shapes, meta) without the payload."""
    with open(path, "rb") as fh:
        return _read_header(fh, path)


def read_container(path) -> Tuple[Dict[str, np.ndarray], dict]:
    """Load all tensors and the meta dict; verifies length and checksum."""
    with open(path, "rb") as fh:
        header = _read_header(fh, path)
        expected = header.get("payload_nbytes", 0)
        payload = fh.read(expected)
        if len(payload) != expected:
            raise CorruptCheckpointError(
                f"{path}: payload truncated ({len(payload)} of {expected} bytes)"
            )
        raw_crc = fh.read(4)
        if len(raw_crc) != 4:
            raise CorruptCheckpointError(f"{path}: missing checksum")
        (want_crc,) = struct.unpack("<I", raw_crc)
    got_crc = zlib.crc32(payload)
    if got_crc != want_crc:
        raise CorruptCheckpointError(
            f"{path}: checksum mismatch (stored {want_crc:#010x}, computed {got_crc:#010x})"
        )
    tensors: Dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(payload):
            raise CorruptCheckpointError(
                f"{path}: tensor {entry['name']!r} extends past the payload"
            )
        flat = np.frombuffer(payload[start : start + nbytes], dtype=entry["dtype"])
        tensors[entry["name"]] = flat.reshape(entry["shape"]).copy()
    return tensors, header.get("meta", {})
