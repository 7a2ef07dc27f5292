# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

"""
Single-file binary container shared by store snapshots and model files.

Byte layout (all integers little-endian)::

    offset  size  field
    0       4     magic (b'FMPS' snapshot, b'FMPM' model)
    4       1     format version (u8)
    5       3     reserved, zero
    8       8     header length H (u64)
    16      8     body length B (u64)
    24      32    SHA-256 of header + body
    56      H     header: UTF-8 JSON, sorted keys
    56+H    B     body: concatenated raw array bytes

The header is ``{"meta": {...}, "arrays": [{"name", "dtype", "shape",
"offset", "nbytes"}, ...]}``; array offsets are relative to the body start.
Arrays are stored in little-endian byte order, so a file written on one
machine reads back bit-identically on any other.
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CorruptModel, CorruptSnapshot, IoError
from .version import app_version_int, assert_format_version, format_version

MAGIC = {
    'snapshot': b'FMPS',
    'model': b'FMPM',
}
_CORRUPT = {
    'snapshot': CorruptSnapshot,
    'model': CorruptModel,
}
_PREAMBLE = struct.Struct('<4sB3sQQ32s')


def _to_little_endian(arr):
    arr = np.ascontiguousarray(arr)
    if arr.dtype.byteorder == '>' or (arr.dtype.byteorder == '=' and np.little_endian is False):
        arr = arr.astype(arr.dtype.newbyteorder('<'))
    return arr


def encode_container(kind, meta, arrays):
    """
    Encode metadata and named numpy arrays to container bytes.

    Parameters
    ----------
    kind : str
        'snapshot' or 'model'.
    meta : dict
        JSON-serialisable metadata.
    arrays : dict of str to numpy.ndarray
        Arrays to store, in the insertion order of the dict.

    Returns
    -------
    bytes
    """
    table = []
    chunks = []
    offset = 0
    for name, arr in arrays.items():
        arr = _to_little_endian(np.asarray(arr))
        if arr.dtype == object:
            raise TypeError(f"Array {name} has dtype object, which cannot be stored.")
        raw = arr.tobytes()
        table.append({
            'name': name,
            'dtype': arr.dtype.str,
            'shape': list(arr.shape),
            'offset': offset,
            'nbytes': len(raw),
        })
        chunks.append(raw)
        offset += len(raw)
    meta = dict(meta)
    meta.setdefault('fmpscore_version', app_version_int)
    header = json.dumps({'meta': meta, 'arrays': table}, sort_keys=True,
                        separators=(',', ':')).encode('utf-8')
    body = b''.join(chunks)
    checksum = hashlib.sha256(header + body).digest()
    preamble = _PREAMBLE.pack(MAGIC[kind], format_version(kind), b'\x00' * 3,
                              len(header), len(body), checksum)
    return preamble + header + body


def decode_container(kind, data, filename=None):
    """
    Decode container bytes written by :func:`encode_container`.

    Returns
    -------
    meta : dict
    arrays : dict of str to numpy.ndarray
    """
    corrupt = _CORRUPT[kind]
    if len(data) < _PREAMBLE.size:
        raise corrupt(f"{filename or 'Data'} is too short to be a {kind} file.")
    magic, version, _, header_len, body_len, checksum = _PREAMBLE.unpack_from(data)
    if magic != MAGIC[kind]:
        raise corrupt(f"{filename or 'Data'} is not a {kind} file (bad magic {magic!r}).")
    assert_format_version(kind, version, filename=filename)
    start = _PREAMBLE.size
    if len(data) != start + header_len + body_len:
        raise corrupt(f"{filename or 'Data'} is truncated or has trailing bytes.")
    payload = data[start:]
    if hashlib.sha256(payload).digest() != checksum:
        raise corrupt(f"Checksum mismatch in {filename or 'data'}.")
    try:
        header = json.loads(payload[:header_len].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise corrupt(f"Unreadable header in {filename or 'data'}.") from e
    body = payload[header_len:]
    arrays = {}
    try:
        for entry in header['arrays']:
            raw = body[entry['offset']:entry['offset'] + entry['nbytes']]
            arr = np.frombuffer(raw, dtype=np.dtype(entry['dtype']))
            arrays[entry['name']] = arr.reshape(entry['shape']).copy()
        return header['meta'], arrays
    except (KeyError, TypeError, ValueError) as e:
        raise corrupt(f"Malformed header in {filename or 'data'}: {e}") from None


def write_container(kind, filename, meta, arrays):
    """Write a container file. Wraps OS failures in IoError."""
    filename = Path(filename).expanduser()
    data = encode_container(kind, meta, arrays)
    try:
        filename.parent.mkdir(parents=True, exist_ok=True)
        with filename.open('wb') as fid:
            fid.write(data)
    except OSError as e:
        raise IoError(f"Cannot write {kind} file {filename}: {e}") from e


def read_container(kind, filename):
    """Read a container file. Wraps OS failures in IoError."""
    filename = Path(filename).expanduser()
    try:
        with filename.open('rb') as fid:
            data = fid.read()
    except OSError as e:
        raise IoError(f"Cannot read {kind} file {filename}: {e}") from e
    return decode_container(kind, data, filename=filename)
