"""
Little-endian binary container for feature matrices and weight sets.

A single array is stored as

    magic "EMOF" | version u32 | dtype code u32 | ndim u32 | dims u32[ndim] | row-major payload

An archive of named arrays uses dtype code 0 and continues with

    header length u32 | JSON header | payloads in header order | CRC32 u32

where the header lists {name, dtype, shape} per array plus free-form metadata,
and the CRC covers every byte before it.
"""

import json
import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from emoformer.errors import ArgumentError, AudioIOError, IntegrityError

log = logging.getLogger(__name__)

MAGIC = b'EMOF'
FORMAT_VERSION = 1

ARCHIVE_CODE = 0
DTYPE_CODES: dict[int, np.dtype] = {
    1: np.dtype('<f4'),
    2: np.dtype('<f8'),
}
DTYPE_NAMES = {'f32': 1, 'f64': 2}

_PREAMBLE = struct.Struct('<4sII')
_U32 = struct.Struct('<I')


def _dtype_code(dtype: np.dtype) -> int:
    for code, candidate in DTYPE_CODES.items():
        if np.dtype(dtype).newbyteorder('<') == candidate:
            return code
    raise ArgumentError(f'EMOF stores float32 or float64 arrays, got {dtype}')


def _dtype_name(code: int) -> str:
    return next(name for name, c in DTYPE_NAMES.items() if c == code)


class _Reader:
    """Cursor over a byte buffer raising IntegrityError on truncation."""

    def __init__(self, data: bytes, origin: str):
        self.data = data
        self.offset = 0
        self.origin = origin

    def take(self, count: int) -> bytes:
        if count < 0 or self.offset + count > len(self.data):
            raise IntegrityError(
                f'{self.origin} is truncated: needs {count} byte(s) at offset {self.offset}, '
                f'{len(self.data) - self.offset} left'
            )
        chunk = self.data[self.offset : self.offset + count]
        self.offset += count
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def array(self, code: int, shape: tuple[int, ...]) -> np.ndarray:
        dtype = DTYPE_CODES[code]
        count = int(np.prod(shape, dtype=np.int64))
        raw = self.take(count * dtype.itemsize)
        return np.frombuffer(raw, dtype=dtype).reshape(shape).astype(dtype.newbyteorder('='))

    def finish(self):
        if self.offset != len(self.data):
            raise IntegrityError(
                f'{self.origin} has {len(self.data) - self.offset} unexpected trailing byte(s)'
            )


def _read_preamble(reader: _Reader) -> int:
    magic, version, code = _PREAMBLE.unpack(reader.take(_PREAMBLE.size))
    if magic != MAGIC:
        raise IntegrityError(f'{reader.origin} is not an EMOF file (magic {magic!r})')
    if version != FORMAT_VERSION:
        raise IntegrityError(f'{reader.origin} has unsupported EMOF version {version}')
    if code != ARCHIVE_CODE and code not in DTYPE_CODES:
        raise IntegrityError(f'{reader.origin} has unknown dtype code {code}')
    return code


def encode_array(array: np.ndarray) -> bytes:
    code = _dtype_code(array.dtype)
    array = np.ascontiguousarray(array, dtype=DTYPE_CODES[code])
    parts = [_PREAMBLE.pack(MAGIC, FORMAT_VERSION, code), _U32.pack(array.ndim)]
    parts.extend(_U32.pack(dim) for dim in array.shape)
    parts.append(array.tobytes(order='C'))
    return b''.join(parts)


def decode_array(data: bytes, origin: str = 'EMOF data') -> np.ndarray:
    reader = _Reader(data, origin)
    code = _read_preamble(reader)
    if code == ARCHIVE_CODE:
        raise IntegrityError(f'{origin} is an archive, expected a single array')
    ndim = reader.u32()
    shape = tuple(reader.u32() for _ in range(ndim))
    array = reader.array(code, shape)
    reader.finish()
    return array


@dataclass
class Archive:
    """Named arrays in a fixed order together with JSON metadata."""

    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self.arrays


def encode_archive(archive: Archive) -> bytes:
    entries, payloads = [], []
    for name, array in archive.arrays.items():
        code = _dtype_code(array.dtype)
        array = np.ascontiguousarray(array, dtype=DTYPE_CODES[code])
        entries.append({'name': name, 'dtype': _dtype_name(code), 'shape': list(array.shape)})
        payloads.append(array.tobytes(order='C'))

    header = json.dumps(
        {'arrays': entries, 'metadata': archive.metadata}, sort_keys=True, separators=(',', ':')
    ).encode('utf-8')
    body = b''.join(
        [
            _PREAMBLE.pack(MAGIC, FORMAT_VERSION, ARCHIVE_CODE),
            _U32.pack(len(header)),
            header,
            *payloads,
        ]
    )
    return body + _U32.pack(zlib.crc32(body))


def decode_archive(data: bytes, origin: str = 'EMOF archive') -> Archive:
    if len(data) < _PREAMBLE.size + 2 * _U32.size:
        raise IntegrityError(f'{origin} is truncated ({len(data)} bytes)')
    body, (checksum,) = data[:-4], _U32.unpack(data[-4:])
    if zlib.crc32(body) != checksum:
        raise IntegrityError(f'{origin} failed its checksum; the file is corrupted or truncated')

    reader = _Reader(body, origin)
    if _read_preamble(reader) != ARCHIVE_CODE:
        raise IntegrityError(f'{origin} holds a single array, expected an archive')
    try:
        header = json.loads(reader.take(reader.u32()).decode('utf-8'))
        entries = header['arrays']
        metadata = header.get('metadata', {})
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise IntegrityError(f'{origin} has an unreadable header: {e}') from e

    arrays = {}
    for entry in entries:
        code = DTYPE_NAMES.get(entry.get('dtype'))
        if code is None:
            raise IntegrityError(f'{origin} lists unknown dtype {entry.get("dtype")!r}')
        arrays[entry['name']] = reader.array(code, tuple(entry['shape']))
    reader.finish()
    return Archive(arrays=arrays, metadata=metadata)


def _write_bytes(path: Path, data: bytes):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as e:
        raise AudioIOError(path, e) from e


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as e:
        raise AudioIOError(path, e) from e


def save_array(path: str | Path, array: np.ndarray):
    _write_bytes(Path(path), encode_array(array))


def load_array(path: str | Path) -> np.ndarray:
    path = Path(path)
    return decode_array(_read_bytes(path), origin=str(path))


def save_archive(path: str | Path, archive: Archive):
    path = Path(path)
    _write_bytes(path, encode_archive(archive))
    log.debug('Wrote archive %s with %d array(s)', path, len(archive.arrays))


def load_archive(path: str | Path) -> Archive:
    path = Path(path)
    return decode_archive(_read_bytes(path), origin=str(path))


@dataclass(frozen=True)
class StoredFeature:
    """A feature file on disk together with its sidecar index entry."""

    path: Path
    parent_id: str
    label: str
    segment_index: int

    @property
    def sidecar(self) -> Path:
        return sidecar_path(self.path)

    def load(self) -> np.ndarray:
        return load_array(self.path)


def sidecar_path(path: Path) -> Path:
    return path.with_suffix('.json')


def save_feature(
    path: str | Path, data: np.ndarray, parent_id: str, label: str, segment_index: int
) -> StoredFeature:
    """Writes one feature array and its JSON sidecar {parent_id, label, segment_index}."""
    stored = StoredFeature(Path(path), parent_id, label, segment_index)
    save_array(stored.path, data)
    index = {'parent_id': parent_id, 'label': label, 'segment_index': segment_index}
    try:
        stored.sidecar.write_text(json.dumps(index, sort_keys=True) + '\n', encoding='utf-8')
    except OSError as e:
        raise AudioIOError(stored.sidecar, e) from e
    return stored


def list_features(directory: str | Path) -> list[StoredFeature]:
    """All features of a directory written by save_feature, ordered by file name."""
    found = []
    for path in sorted(Path(directory).glob('*.emof')):
        side = sidecar_path(path)
        try:
            index = json.loads(side.read_text(encoding='utf-8'))
            found.append(
                StoredFeature(
                    path=path,
                    parent_id=str(index['parent_id']),
                    label=str(index['label']),
                    segment_index=int(index['segment_index']),
                )
            )
        except FileNotFoundError:
            log.warning('Skipping %s: no sidecar index %s', path, side)
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as e:
            raise IntegrityError(f'Unreadable sidecar index {side}: {e}') from e
    return found
