"""Deterministic binary array container.

Layout::

    magic      8 bytes   b"ICEEMU\\x00\\x01"
    hdr_len    uint64 little-endian
    header     canonical JSON (sorted keys, no spaces), UTF-8
    payload    raw little-endian array bytes, back to back

The header carries ``version``, a caller ``kind`` string, caller metadata and
an ``arrays`` directory of {name, dtype, shape, offset, nbytes}. Writing the
same arrays and metadata twice yields identical bytes.
"""

import json
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

MAGIC = b"ICEEMU\x00\x01"
CONTAINER_VERSION = 1
_DTYPES = {"f8": "<f8", "i8": "<i8", "i1": "<i1", "u1": "<u1", "b1": "|b1"}


class ArtifactError(ValueError):
    """Raised for missing, truncated or mismatched artifact files."""


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _code(array: np.ndarray) -> str:
    kind = array.dtype.kind
    if kind == "f":
        return "f8"
    if kind in "iu":
        return "i8" if array.dtype.itemsize > 1 else ("i1" if kind == "i" else "u1")
    if kind == "b":
        return "b1"
    raise ArtifactError(f"unsupported array dtype {array.dtype}")


def write_container(
    path: Union[str, Path],
    kind: str,
    metadata: Dict[str, Any],
    arrays: Dict[str, np.ndarray],
) -> Path:
    """
    Write arrays plus JSON metadata to ``path``.

    Float arrays are stored as float64, wide integers as int64; arrays are
    written in the given dict order.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    directory = []
    blobs = []
    offset = 0
    for name, array in arrays.items():
        array = np.asarray(array)
        code = _code(array)
        data = np.ascontiguousarray(array, dtype=_DTYPES[code]).tobytes()
        directory.append({
            "name": name, "dtype": code, "shape": list(array.shape), "offset": offset, "nbytes": len(data),
        })
        blobs.append(data)
        offset += len(data)

    header = canonical_json({
        "version": CONTAINER_VERSION, "kind": kind, "metadata": metadata, "arrays": directory,
    }).encode("utf-8")

    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(len(header).to_bytes(8, "little"))
        f.write(header)
        for blob in blobs:
            f.write(blob)
    return path


def read_container(
    path: Union[str, Path], expected_kind: str = None
) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """
    Read a container written by ``write_container``.

    Returns:
        (metadata, arrays)

    Raises:
        ArtifactError: If the file is missing, corrupt, of another kind or
            written by a newer container version
    """
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"artifact not found: {path}")
    raw = path.read_bytes()
    if raw[:8] != MAGIC:
        raise ArtifactError(f"{path} is not an ice-emulator container (bad magic)")
    try:
        hdr_len = int.from_bytes(raw[8:16], "little")
        header = json.loads(raw[16:16 + hdr_len].decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as e:
        raise ArtifactError(f"{path} has a corrupt header: {e}") from e
    if header.get("version", 0) > CONTAINER_VERSION:
        raise ArtifactError(f"{path} uses container version {header['version']} (> {CONTAINER_VERSION})")
    if expected_kind is not None and header.get("kind") != expected_kind:
        raise ArtifactError(f"{path} holds a {header.get('kind')!r}, expected {expected_kind!r}")

    base = 16 + hdr_len
    arrays = {}
    for entry in header["arrays"]:
        start = base + entry["offset"]
        stop = start + entry["nbytes"]
        if stop > len(raw):
            raise ArtifactError(f"{path} is truncated inside array {entry['name']!r}")
        arr = np.frombuffer(raw[start:stop], dtype=_DTYPES[entry["dtype"]]).reshape(entry["shape"])
        arrays[entry["name"]] = arr.copy()
    return header.get("metadata", {}), arrays
