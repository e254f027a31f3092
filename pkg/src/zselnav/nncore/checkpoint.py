"""Binary checkpoint format.

Layout: magic b"ZSELCKPT", u16 version, u32 block count; per block a u16
name length, UTF-8 name, u8 dtype tag, u8 rank, rank u32 dims and the
little-endian payload; finally a u32 CRC32 of everything before it.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .optim import Adam, ParameterSet

MAGIC = b"ZSELCKPT"
VERSION = 1

_DTYPE_TAGS = {np.dtype("float32"): 1, np.dtype("float64"): 2, np.dtype("int64"): 3}
_TAG_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("<i8")}


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(params: ParameterSet, path, optimizer: Adam | None = None) -> None:
    """Write all parameters (and optimizer moments, when given) losslessly."""
    blocks: dict[str, np.ndarray] = {name: t.data for name, t in params.items()}
    if optimizer is not None:
        blocks.update(optimizer.state_arrays())
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<H", VERSION)
    buf += struct.pack("<I", len(blocks))
    for name in sorted(blocks):
        arr = np.ascontiguousarray(blocks[name])
        if arr.dtype not in _DTYPE_TAGS:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for block {name!r}")
        nb = name.encode()
        buf += struct.pack("<H", len(nb)) + nb
        buf += struct.pack("<BB", _DTYPE_TAGS[arr.dtype], arr.ndim)
        for d in arr.shape:
            buf += struct.pack("<I", d)
        buf += arr.astype(arr.dtype.newbyteorder("<")).tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    with open(path, "wb") as fh:
        fh.write(buf)


def load_blocks(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 2 + 4 + 4:
        raise CheckpointError(f"{path}: truncated checkpoint")
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {raw[:8]!r}")
    crc_stored = struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(raw[:-4]) != crc_stored:
        raise CheckpointError(f"{path}: CRC mismatch, file corrupt")
    off = len(MAGIC)
    (version,) = struct.unpack_from("<H", raw, off)
    off += 2
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    blocks: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", raw, off)
            off += 2
            name = raw[off:off + nlen].decode()
            off += nlen
            tag, rank = struct.unpack_from("<BB", raw, off)
            off += 2
            dims = struct.unpack_from(f"<{rank}I", raw, off) if rank else ()
            off += 4 * rank
            dtype = _TAG_DTYPES[tag]
            nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize if rank else dtype.itemsize
            arr = np.frombuffer(raw, dtype=dtype, count=max(1, int(np.prod(dims, dtype=np.int64))) if rank else 1,
                                offset=off)
            off += nbytes
            blocks[name] = arr.reshape(dims).copy() if rank else arr[:1].copy()
    except (struct.error, KeyError, ValueError) as err:
        raise CheckpointError(f"{path}: malformed block table ({err})") from err
    if off != len(raw) - 4:
        raise CheckpointError(f"{path}: trailing bytes after block table")
    return blocks


def load_checkpoint(path) -> tuple[ParameterSet, dict[str, np.ndarray]]:
    """Read a checkpoint into a fresh ParameterSet; optimizer blocks (the
    __opt__ namespace) are returned separately."""
    blocks = load_blocks(path)
    params = ParameterSet()
    extras: dict[str, np.ndarray] = {}
    for name, arr in blocks.items():
        if name.startswith("__opt__."):
            extras[name] = arr
        else:
            params.add(name, arr.astype(np.float32) if arr.dtype == np.dtype("<f4") else arr)
    return params, extras


def load_into(target: ParameterSet, path, partial: bool = False) -> dict[str, list[str]]:
    """Copy checkpoint values into an existing set by name.

    Without partial, the name sets must match exactly. With partial, blocks
    missing on either side are tolerated and reported.
    """
    src, _ = load_checkpoint(path)
    src_names = set(src.names())
    dst_names = set(target.names())
    missing = sorted(dst_names - src_names)
    extra = sorted(src_names - dst_names)
    if (missing or extra) and not partial:
        raise CheckpointError(
            f"{path}: name-set mismatch (missing={missing[:4]}, extra={extra[:4]}); "
            "pass partial=True to load the intersection")
    for name in sorted(src_names & dst_names):
        if src[name].shape != target[name].shape:
            raise CheckpointError(
                f"{path}: shape mismatch for {name}: {src[name].shape} vs {target[name].shape}")
        target[name].data = src[name].data.copy()
    return {"missing": missing, "extra": extra}
