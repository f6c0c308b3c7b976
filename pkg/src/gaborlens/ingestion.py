"""Tensor-archive container and kernel-slice extraction.

File layout (bit-exact):

* 8-byte little-endian unsigned header length ``N``;
* ``N`` bytes of UTF-8 JSON mapping tensor name to
  ``{"dtype": "F32", "shape": [...], "data_offsets": [begin, end]}``,
  optionally plus a ``"__metadata__"`` object that may carry
  ``"layer_order"`` (array of layer-name prefixes in depth order) and
  ``"model_id"``;
* the raw payload, tensors row-major little-endian 32-bit floats, offsets
  relative to the payload start.

Only dtype F32 is supported.
"""
from __future__ import annotations

import fnmatch
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ArchiveError",
    "ArchiveParseError",
    "UnsupportedDtypeError",
    "TruncatedPayloadError",
    "TensorEntry",
    "TensorArchive",
    "KernelSlice",
    "load_archive",
    "write_archive",
    "extract_conv_slices",
]

logger = logging.getLogger(__name__)

_HEADER_LEN_BYTES = 8
_F32_WIDTH = 4


class ArchiveError(Exception):
    pass


class ArchiveParseError(ArchiveError):
    """Malformed container; `offset` is the byte position of the problem."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnsupportedDtypeError(ArchiveError):
    pass


class TruncatedPayloadError(ArchiveError):
    pass


@dataclass(frozen=True)
class TensorEntry:
    dtype: str
    shape: tuple[int, ...]
    data_offsets: tuple[int, int]


@dataclass
class TensorArchive:
    """Parsed archive: header entries plus the raw payload bytes."""

    entries: dict[str, TensorEntry]
    payload: bytes
    metadata: dict = field(default_factory=dict)

    def tensor(self, name: str) -> np.ndarray:
        entry = self.entries[name]
        begin, end = entry.data_offsets
        return np.frombuffer(self.payload[begin:end], dtype="<f4").reshape(entry.shape)


def _reject_duplicates(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise ArchiveParseError(f"duplicate tensor name {key!r} in header", _HEADER_LEN_BYTES)
        seen[key] = value
    return seen


def load_archive(path) -> TensorArchive:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER_LEN_BYTES:
        raise ArchiveParseError("file too short for the 8-byte header length", 0)
    (header_len,) = struct.unpack("<Q", raw[:_HEADER_LEN_BYTES])
    if _HEADER_LEN_BYTES + header_len > len(raw):
        raise ArchiveParseError(
            f"header length {header_len} extends past end of file", _HEADER_LEN_BYTES
        )
    header_bytes = raw[_HEADER_LEN_BYTES : _HEADER_LEN_BYTES + header_len]
    try:
        header = json.loads(header_bytes.decode("utf-8"), object_pairs_hook=_reject_duplicates)
    except UnicodeDecodeError as exc:
        raise ArchiveParseError(f"header is not UTF-8: {exc.reason}", _HEADER_LEN_BYTES + exc.start) from exc
    except json.JSONDecodeError as exc:
        raise ArchiveParseError(f"header is not valid JSON: {exc.msg}", _HEADER_LEN_BYTES + exc.pos) from exc
    if not isinstance(header, dict):
        raise ArchiveParseError("header must be a JSON object", _HEADER_LEN_BYTES)

    metadata = header.pop("__metadata__", {})
    if not isinstance(metadata, dict):
        raise ArchiveParseError('"__metadata__" must be a JSON object', _HEADER_LEN_BYTES)

    payload = raw[_HEADER_LEN_BYTES + header_len :]
    entries: dict[str, TensorEntry] = {}
    ranges: list[tuple[int, int, str]] = []
    for name, record in header.items():
        if not isinstance(record, dict):
            raise ArchiveParseError(f"tensor {name!r}: entry must be an object", _HEADER_LEN_BYTES)
        dtype = record.get("dtype")
        if dtype != "F32":
            raise UnsupportedDtypeError(f"tensor {name!r}: dtype {dtype!r} not supported (only F32)")
        shape = record.get("shape")
        if not isinstance(shape, list) or any(not isinstance(s, int) or s < 0 for s in shape):
            raise ArchiveParseError(f"tensor {name!r}: invalid shape {shape!r}", _HEADER_LEN_BYTES)
        offsets = record.get("data_offsets")
        if (
            not isinstance(offsets, list)
            or len(offsets) != 2
            or any(not isinstance(o, int) or o < 0 for o in offsets)
            or offsets[0] > offsets[1]
        ):
            raise ArchiveParseError(f"tensor {name!r}: invalid data_offsets {offsets!r}", _HEADER_LEN_BYTES)
        begin, end = offsets
        expected = int(np.prod(shape, dtype=np.int64)) * _F32_WIDTH
        if end - begin != expected:
            raise ArchiveParseError(
                f"tensor {name!r}: byte range {end - begin} does not match shape {shape} ({expected} bytes)",
                _HEADER_LEN_BYTES,
            )
        if end > len(payload):
            raise TruncatedPayloadError(
                f"tensor {name!r} needs payload bytes [{begin}, {end}) but only {len(payload)} are present"
            )
        entries[name] = TensorEntry(dtype, tuple(shape), (begin, end))
        ranges.append((begin, end, name))

    ranges.sort()
    for (b0, e0, n0), (b1, e1, n1) in zip(ranges, ranges[1:]):
        if b1 < e0:
            raise ArchiveParseError(f"tensors {n0!r} and {n1!r} have overlapping byte ranges", _HEADER_LEN_BYTES)

    return TensorArchive(entries, payload, metadata)


def write_archive(path, tensors, layer_order=None, model_id=None) -> None:
    """Write float32 tensors into a new archive; insertion order is preserved."""
    metadata: dict = {}
    if layer_order is not None:
        metadata["layer_order"] = list(layer_order)
    if model_id is not None:
        metadata["model_id"] = str(model_id)
    header: dict = {"__metadata__": metadata} if metadata else {}

    blobs: list[bytes] = []
    offset = 0
    for name, values in tensors.items():
        arr = np.ascontiguousarray(values, dtype="<f4")
        blob = arr.tobytes()
        header[name] = {
            "dtype": "F32",
            "shape": list(arr.shape),
            "data_offsets": [offset, offset + len(blob)],
        }
        offset += len(blob)
        blobs.append(blob)

    header_bytes = json.dumps(header, separators=(",", ":"), ensure_ascii=True).encode("utf-8")
    Path(path).write_bytes(struct.pack("<Q", len(header_bytes)) + header_bytes + b"".join(blobs))


@dataclass(frozen=True, eq=False)
class KernelSlice:
    """One 2D kernel slice with its provenance inside the source model."""

    model_id: str
    layer_name: str
    layer_index: int
    filter_index: int
    channel_index: int
    values: np.ndarray


def _layer_assignment(names: list[str], layer_order) -> list[tuple[int, str, str]]:
    """Map tensor names to (layer_index, layer_name, tensor_name), depth order.

    Manifest prefixes match longest-first so "features.24.weight" pairs with
    "features.24" even when "features.2" is also listed.
    """
    if layer_order:
        assigned = []
        unmatched = []
        for name in names:
            matches = [
                (len(prefix), position, prefix)
                for position, prefix in enumerate(layer_order)
                if name.startswith(prefix)
            ]
            if matches:
                _, position, prefix = max(matches)
                assigned.append((position, prefix, name))
            else:
                unmatched.append(name)
        for rank, name in enumerate(sorted(unmatched)):
            assigned.append((len(layer_order) + rank, name, name))
    else:
        assigned = [(index, name, name) for index, name in enumerate(sorted(names))]
    return sorted(assigned)


def extract_conv_slices(archive: TensorArchive, selection: str = "*") -> list[KernelSlice]:
    """Explode selected 4-axis square-kernel tensors into per-channel slices.

    Tensors are interpreted as [out_channels, in_channels, k, k]; slices come
    out in (layer_index, filter_index, channel_index) lexicographic order.
    Selected tensors of any other shape are skipped with a logged warning.
    """
    model_id = str(archive.metadata.get("model_id", ""))
    layer_order = archive.metadata.get("layer_order")
    selected = [n for n in archive.entries if fnmatch.fnmatchcase(n, selection)]

    slices: list[KernelSlice] = []
    for layer_index, layer_name, tensor_name in _layer_assignment(selected, layer_order):
        shape = archive.entries[tensor_name].shape
        if len(shape) != 4:
            logger.warning("skipping %r: expected 4 axes, got shape %s", tensor_name, list(shape))
            continue
        if shape[2] != shape[3] or shape[2] < 1:
            logger.warning("skipping %r: kernel %dx%d is not square", tensor_name, shape[2], shape[3])
            continue
        weights = archive.tensor(tensor_name)
        for filter_index in range(shape[0]):
            for channel_index in range(shape[1]):
                slices.append(
                    KernelSlice(
                        model_id=model_id,
                        layer_name=layer_name,
                        layer_index=layer_index,
                        filter_index=filter_index,
                        channel_index=channel_index,
                        values=np.array(weights[filter_index, channel_index], dtype=float),
                    )
                )
    return slices
