"""In-memory checkpoint representation and the SMECKPT1 on-disk container.

A checkpoint is an immutable, named map of dense float32 tensors plus a small
string-to-string metadata map. The container layout is bit-exact so that
content digests are stable:

    bytes 0..7    ASCII magic "SMECKPT1"
    bytes 8..15   little-endian u64 header length H
    bytes 16..    UTF-8 JSON header (H bytes), then zero padding to the next
                  8-byte boundary, then the data section

Header JSON: ``{"version":1,"tensors":{name:{"dtype":"f32","shape":[...],
"offset":u64,"nbytes":u64}},"meta":{...}}`` with tensor names (and meta keys)
in lexicographic order, compact separators, ASCII-escaped. Tensor data is
little-endian binary32, row-major, packed contiguously in name order; offsets
are relative to the start of the data section.
"""

import json
import struct
from pathlib import Path
from typing import BinaryIO, Iterable, Mapping

import numpy as np

from .errors import CompatibilityError, FormatError, ValidationError

MAGIC = b"SMECKPT1"
FORMAT_VERSION = 1

KIND_MODEL = "model"
KIND_DELTA = "delta"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _U64_MASK
    return h


def hash_bytes(data: bytes) -> str:
    """FNV-1a 64 of raw bytes, rendered as 16 lowercase hex digits."""
    return format(fnv1a64(data), "016x")


class Checkpoint:
    """Immutable named map of float32 tensors with string metadata.

    Tensor names are unique, non-empty, and kept in lexicographic order;
    every value must be finite. ``meta`` carries provenance only and never
    affects the content digest.
    """

    __slots__ = ("tensors", "meta", "_digest")

    def __init__(self, tensors: Mapping[str, np.ndarray], meta: Mapping[str, str] | None = None):
        if not tensors:
            raise ValidationError("empty checkpoint")
        frozen: dict[str, np.ndarray] = {}
        for name in sorted(tensors):
            if not isinstance(name, str) or not name:
                raise ValidationError(f"tensor name must be a non-empty string, got {name!r}")
            arr = np.ascontiguousarray(tensors[name], dtype=np.float32)
            if arr is tensors[name] and arr.flags.writeable:
                arr = arr.copy()
            if arr.size == 0:
                raise ValidationError(f"tensor {name!r} has zero size")
            flat = arr.reshape(-1)
            if not np.isfinite(flat).all():
                bad = int(np.flatnonzero(~np.isfinite(flat))[0])
                raise ValidationError(
                    f"non-finite value in tensor {name!r} at flat index {bad}"
                )
            arr.setflags(write=False)
            frozen[name] = arr
        meta_frozen: dict[str, str] = {}
        for key in sorted(meta or {}):
            value = (meta or {})[key]
            if not isinstance(key, str) or not isinstance(value, str):
                raise ValidationError(f"meta entries must be string pairs, got {key!r}: {value!r}")
            meta_frozen[key] = value
        kind = meta_frozen.get("kind", KIND_MODEL)
        if kind not in (KIND_MODEL, KIND_DELTA):
            raise ValidationError(f"unknown checkpoint kind {kind!r}")
        if kind == KIND_DELTA:
            missing = [k for k in ("base_digest", "finetuned_digest") if k not in meta_frozen]
            if missing:
                raise ValidationError(f"delta checkpoint missing source digests: {missing}")
        object.__setattr__(self, "tensors", frozen)
        object.__setattr__(self, "meta", meta_frozen)
        object.__setattr__(self, "_digest", None)

    def __setattr__(self, name, value):
        raise AttributeError("Checkpoint is immutable")

    @property
    def kind(self) -> str:
        return self.meta.get("kind", KIND_MODEL)

    @property
    def stage(self) -> int:
        return int(self.meta.get("stage", "0"))

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.tensors.values())

    def names(self) -> list[str]:
        return list(self.tensors)

    def with_meta(self, **updates: str) -> "Checkpoint":
        """New checkpoint sharing tensor storage, with meta entries replaced."""
        meta = dict(self.meta)
        meta.update(updates)
        return Checkpoint(self.tensors, meta)

    def flat(self) -> np.ndarray:
        """All values concatenated in canonical (name, flat index) order."""
        return np.concatenate([a.reshape(-1) for a in self.tensors.values()])

    def __repr__(self) -> str:
        return f"Checkpoint(kind={self.kind!r}, tensors={len(self.tensors)}, n_params={self.n_params})"


def _encode(ckpt: Checkpoint, include_meta: bool = True) -> bytes:
    entries = {}
    offset = 0
    for name, arr in ckpt.tensors.items():
        nbytes = int(arr.size) * 4
        entries[name] = {
            "dtype": "f32",
            "shape": [int(d) for d in arr.shape],
            "offset": offset,
            "nbytes": nbytes,
        }
        offset += nbytes
    header = {
        "version": FORMAT_VERSION,
        "tensors": entries,
        "meta": dict(ckpt.meta) if include_meta else {},
    }
    hjson = json.dumps(header, separators=(",", ":")).encode("utf-8")
    pad = -(len(MAGIC) + 8 + len(hjson)) % 8
    parts = [MAGIC, struct.pack("<Q", len(hjson)), hjson, b"\x00" * pad]
    for arr in ckpt.tensors.values():
        parts.append(arr.astype("<f4", copy=False).tobytes())
    return b"".join(parts)


def write_checkpoint(ckpt: Checkpoint, destination: str | Path | BinaryIO) -> int:
    """Serialize to the SMECKPT1 container; returns the byte count written.

    Writing the same checkpoint twice yields bitwise-identical output.
    """
    blob = _encode(ckpt)
    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as fh:
            fh.write(blob)
    else:
        destination.write(blob)
    return len(blob)


def read_checkpoint(source: str | Path | BinaryIO | bytes) -> Checkpoint:
    """Parse an SMECKPT1 container back into a Checkpoint.

    ``read(write(c))`` is value-equal to ``c``; re-serializing the result of a
    read reproduces the canonical byte stream exactly.
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            blob = fh.read()
    elif isinstance(source, bytes):
        blob = source
    else:
        blob = source.read()
    if blob[:8] != MAGIC:
        raise FormatError(f"bad magic {blob[:8]!r}; expected {MAGIC!r}")
    if len(blob) < 16:
        raise FormatError("truncated header: file shorter than 16 bytes")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    if 16 + hlen > len(blob):
        raise FormatError("header length exceeds file size")
    try:
        header = json.loads(blob[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unparseable header: {exc}") from exc
    if not isinstance(header, dict) or header.get("version") != FORMAT_VERSION:
        raise FormatError(f"unsupported header/version: {header.get('version')!r}")
    raw_tensors = header.get("tensors")
    meta = header.get("meta", {})
    if not isinstance(raw_tensors, dict) or not raw_tensors:
        raise FormatError("header missing tensor table")
    if not isinstance(meta, dict):
        raise FormatError("header meta must be an object")

    data_start = 16 + hlen + (-(16 + hlen) % 8)
    data = blob[data_start:]
    extents = []
    tensors: dict[str, np.ndarray] = {}
    for name, info in raw_tensors.items():
        shape = info.get("shape")
        offset = info.get("offset")
        nbytes = info.get("nbytes")
        if info.get("dtype") != "f32":
            raise FormatError(f"tensor {name!r}: unsupported dtype {info.get('dtype')!r}")
        if (
            not isinstance(shape, list)
            or not shape_is_valid(shape)
            or type(offset) is not int
            or type(nbytes) is not int
            or offset < 0
            or nbytes <= 0
        ):
            raise FormatError(f"tensor {name!r}: malformed header entry")
        count = 1
        for d in shape:
            count *= d
        if nbytes != 4 * count:
            raise FormatError(f"tensor {name!r}: nbytes {nbytes} != 4 * prod(shape)")
        if offset + nbytes > len(data):
            raise FormatError(
                f"tensor {name!r}: extent [{offset}, {offset + nbytes}) "
                f"out of bounds for data section of {len(data)} bytes"
            )
        extents.append((offset, offset + nbytes, name))
        tensors[name] = np.frombuffer(data, dtype="<f4", count=count, offset=offset).reshape(shape)
    extents.sort()
    for (_, end_a, name_a), (start_b, _, name_b) in zip(extents, extents[1:]):
        if start_b < end_a:
            raise FormatError(f"overlapping tensor extents: {name_a!r} and {name_b!r}")
    total = sum(end - start for start, end, _ in extents)
    if total != len(data):
        raise FormatError(
            f"data section length mismatch: header declares {total} bytes, found {len(data)}"
        )
    return Checkpoint(tensors, {str(k): str(v) for k, v in meta.items()})


def shape_is_valid(shape: Iterable) -> bool:
    dims = list(shape)
    return len(dims) > 0 and all(type(d) is int and d > 0 for d in dims)


def digest(ckpt: Checkpoint) -> str:
    """Content digest: FNV-1a 64 over the canonical serialization, meta excluded.

    Equal tensors give equal digests regardless of meta; any single-value
    change (even by one ulp) changes the digest.
    """
    cached = ckpt._digest
    if cached is None:
        cached = hash_bytes(_encode(ckpt, include_meta=False))
        object.__setattr__(ckpt, "_digest", cached)
    return cached


def validate_compatible(a: Checkpoint, b: Checkpoint) -> None:
    """Require identical tensor name sets and per-name shapes."""
    names_a, names_b = set(a.tensors), set(b.tensors)
    if names_a != names_b:
        only_a = sorted(names_a - names_b)
        only_b = sorted(names_b - names_a)
        raise CompatibilityError(
            f"tensor sets differ: only in first={only_a}, only in second={only_b}"
        )
    for name in a.tensors:
        sa, sb = a.tensors[name].shape, b.tensors[name].shape
        if sa != sb:
            raise CompatibilityError(f"shape mismatch for {name!r}: {list(sa)} vs {list(sb)}")


def value_equal(a: Checkpoint, b: Checkpoint) -> bool:
    """True when both checkpoints hold bitwise-identical tensor values."""
    try:
        validate_compatible(a, b)
    except CompatibilityError:
        return False
    return all(
        np.array_equal(a.tensors[n].view(np.uint32), b.tensors[n].view(np.uint32))
        for n in a.tensors
    )
