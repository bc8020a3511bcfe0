"""Binary persistence for both index kinds.

Fixed little-endian layout, unsigned LEB128 varints, sorted member lists
stored as deltas.  Files embed the fingerprint of the graph they were built
from, so loading against the wrong graph fails fast instead of producing
quietly wrong aggregates.  Encoding is byte-deterministic for a given index.
"""

from __future__ import annotations

import json
import zlib

import numpy as np

from .errors import SerializationError

DBINDEX_MAGIC = b"GWDB1"
IINDEX_MAGIC = b"GWII1"

_WINDOW_KINDS = ("khop", "topological")
_DIRECTIONS = (None, "out", "in")
_STRATEGIES = ("mc", "emc")


def write_uvarint(out, value):
    if value < 0:
        raise SerializationError(f"cannot encode negative value {value}")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


class _Reader:
    """Cursor over a byte string that treats truncation as corruption."""

    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise SerializationError("truncated index file")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def uvarint(self):
        shift = 0
        value = 0
        while True:
            if self.pos >= len(self.data):
                raise SerializationError("truncated index file")
            byte = self.data[self.pos]
            self.pos += 1
            value |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return value
            shift += 7
            if shift > 63:
                raise SerializationError("varint out of range")


def _write_members(out, members):
    write_uvarint(out, len(members))
    prev = -1
    for x in members:
        x = int(x)
        if x <= prev:
            raise SerializationError("member list is not strictly increasing")
        write_uvarint(out, x - prev - 1)
        prev = x


def _read_members(r):
    count = r.uvarint()
    members = np.empty(count, dtype=np.int32)
    prev = -1
    for i in range(count):
        prev = prev + 1 + r.uvarint()
        members[i] = prev
    return members


def _write_fingerprint(out, fingerprint):
    try:
        raw = bytes.fromhex(fingerprint)
    except ValueError:
        raise SerializationError(f"malformed fingerprint {fingerprint!r}")
    if len(raw) != 32:
        raise SerializationError("fingerprint must be 32 bytes")
    out.extend(raw)


def _seal(out):
    out.extend(zlib.crc32(bytes(out)).to_bytes(4, "little"))
    return bytes(out)


def _open_sealed(data, magic):
    if len(data) < len(magic) + 4:
        raise SerializationError("truncated index file")
    if data[: len(magic)] != magic:
        raise SerializationError(
            f"bad magic {bytes(data[:len(magic)])!r}, expected {magic!r}"
        )
    body, tail = data[:-4], data[-4:]
    if zlib.crc32(body) != int.from_bytes(tail, "little"):
        raise SerializationError("checksum mismatch, file is corrupt")
    r = _Reader(body)
    r.take(len(magic))
    return r


def encode_dbindex(index):
    out = bytearray(DBINDEX_MAGIC)
    _write_fingerprint(out, index.graph_fingerprint)
    w = index.window
    out.append(_WINDOW_KINDS.index(w.kind))
    write_uvarint(out, w.k or 0)
    out.append(_DIRECTIONS.index(w.direction))
    p = index.params
    out.append(_STRATEGIES.index(p.strategy))
    write_uvarint(out, p.m)
    write_uvarint(out, p.seed)
    write_uvarint(out, p.k_cluster)
    write_uvarint(out, p.max_cluster)
    write_uvarint(out, p.max_rounds)
    write_uvarint(out, index.update_log.updates)
    if index.update_log.threshold is None:
        out.append(0)
    else:
        out.append(1)
        write_uvarint(out, index.update_log.threshold)
    write_uvarint(out, index.vertex_count)
    write_uvarint(out, len(index.blocks))
    for block in index.blocks:
        _write_members(out, block)
    for v in range(index.vertex_count):
        links = index.links[v]
        write_uvarint(out, len(links))
        for b in links:
            write_uvarint(out, b)
    return _seal(out)


def decode_dbindex(data):
    from .dbindex import BuildParams, DenseBlockIndex, UpdateLog
    from .query import WindowSpec

    r = _open_sealed(data, DBINDEX_MAGIC)
    fingerprint = r.take(32).hex()
    try:
        kind = _WINDOW_KINDS[r.take(1)[0]]
        k = r.uvarint()
        direction = _DIRECTIONS[r.take(1)[0]]
        strategy = _STRATEGIES[r.take(1)[0]]
    except IndexError:
        raise SerializationError("unknown window or strategy code")
    window = WindowSpec(kind, k=k or None, direction=direction)
    params = BuildParams(
        strategy=strategy,
        m=r.uvarint(),
        seed=r.uvarint(),
        k_cluster=r.uvarint(),
        max_cluster=r.uvarint(),
        max_rounds=r.uvarint(),
    )
    updates = r.uvarint()
    threshold = r.uvarint() if r.take(1)[0] else None
    vertex_count = r.uvarint()
    index = DenseBlockIndex(window, params, vertex_count, fingerprint)
    index.update_log = UpdateLog(updates=updates, threshold=threshold)
    block_count = r.uvarint()
    for _ in range(block_count):
        members = _read_members(r)
        if len(members) == 0:
            raise SerializationError("empty block in index file")
        if len(members) and int(members[-1]) >= vertex_count:
            raise SerializationError("block member out of range")
        index.blocks.append(members)
    for v in range(vertex_count):
        count = r.uvarint()
        links = []
        for _ in range(count):
            b = r.uvarint()
            if b >= block_count:
                raise SerializationError("link to a nonexistent block")
            links.append(b)
        index.links[v] = links
    if r.pos != len(r.data):
        raise SerializationError("trailing bytes after index payload")
    index.rebuild_digests()
    return index


def encode_iindex(index):
    out = bytearray(IINDEX_MAGIC)
    _write_fingerprint(out, index.graph_fingerprint)
    write_uvarint(out, index.vertex_count)
    for pid in index.pids:
        write_uvarint(out, pid + 1)
    for card in index.cards:
        write_uvarint(out, card)
    for wd in index.wds:
        _write_members(out, wd)
    return _seal(out)


def decode_iindex(data):
    from .iindex import InheritanceIndex

    r = _open_sealed(data, IINDEX_MAGIC)
    fingerprint = r.take(32).hex()
    n = r.uvarint()
    index = InheritanceIndex(n, fingerprint)
    for v in range(n):
        pid = r.uvarint() - 1
        if pid >= n:
            raise SerializationError("parent pointer out of range")
        index.pids[v] = pid
    for v in range(n):
        index.cards[v] = r.uvarint()
    for v in range(n):
        wd = _read_members(r)
        if len(wd) and int(wd[-1]) >= n:
            raise SerializationError("window delta member out of range")
        index.wds[v] = wd
    if r.pos != len(r.data):
        raise SerializationError("trailing bytes after index payload")
    return index


def sniff_kind(data):
    """'dbindex', 'iindex', or an error for anything else."""
    if data[: len(DBINDEX_MAGIC)] == DBINDEX_MAGIC:
        return "dbindex"
    if data[: len(IINDEX_MAGIC)] == IINDEX_MAGIC:
        return "iindex"
    raise SerializationError("not a recognized index file")


def save_index(index, path):
    from .dbindex import DenseBlockIndex

    data = (
        encode_dbindex(index)
        if isinstance(index, DenseBlockIndex)
        else encode_iindex(index)
    )
    with open(path, "wb") as f:
        f.write(data)
    return len(data)


def load_index(path):
    with open(path, "rb") as f:
        data = f.read()
    if sniff_kind(data) == "dbindex":
        return decode_dbindex(data)
    return decode_iindex(data)


def dbindex_debug_json(index):
    """Human-inspectable dump; not part of the binary round-trip."""
    return json.dumps(
        {
            "kind": "dbindex",
            "fingerprint": index.graph_fingerprint,
            "window": index.window.describe(),
            "params": {
                "strategy": index.params.strategy,
                "m": index.params.m,
                "seed": index.params.seed,
                "k_cluster": index.params.k_cluster,
            },
            "updates": index.update_log.updates,
            "blocks": [b.tolist() for b in index.blocks],
            "links": index.links,
        },
        indent=2,
        sort_keys=True,
    )


def iindex_debug_json(index):
    return json.dumps(
        {
            "kind": "iindex",
            "fingerprint": index.graph_fingerprint,
            "entries": [
                {"vertex": v, "pid": index.pids[v], "wd": index.wds[v].tolist()}
                for v in range(index.vertex_count)
            ],
        },
        indent=2,
        sort_keys=True,
    )
