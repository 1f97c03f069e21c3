"""Self-describing tagged binary encoding and length-prefixed framing.

The bridge between the planner and simulator processes exchanges frames of
``u32le length + payload``.  The payload is a tagged encoding of plain
Python values (None, bool, int, float, str, bytes, list, dict with string
keys).  Doubles are encoded as raw IEEE-754 bytes, so values survive the
wire bit-exactly.
"""

from __future__ import annotations

import struct

MAX_FRAME = 16 * 1024 * 1024


class WireError(Exception):
    pass


_TAG_NONE = b"N"
_TAG_TRUE = b"T"
_TAG_FALSE = b"F"
_TAG_INT = b"I"
_TAG_FLOAT = b"D"
_TAG_STR = b"S"
_TAG_BYTES = b"B"
_TAG_LIST = b"L"
_TAG_DICT = b"M"


def encode(obj) -> bytes:
    out = bytearray()
    _encode_into(obj, out)
    return bytes(out)


def _encode_into(obj, out: bytearray) -> None:
    if obj is None:
        out += _TAG_NONE
    elif obj is True:
        out += _TAG_TRUE
    elif obj is False:
        out += _TAG_FALSE
    elif isinstance(obj, int):
        out += _TAG_INT
        out += struct.pack("<q", obj)
    elif isinstance(obj, float):
        out += _TAG_FLOAT
        out += struct.pack("<d", obj)
    elif isinstance(obj, str):
        raw = obj.encode("utf-8")
        out += _TAG_STR
        out += struct.pack("<I", len(raw))
        out += raw
    elif isinstance(obj, (bytes, bytearray)):
        out += _TAG_BYTES
        out += struct.pack("<I", len(obj))
        out += obj
    elif isinstance(obj, (list, tuple)):
        out += _TAG_LIST
        out += struct.pack("<I", len(obj))
        for item in obj:
            _encode_into(item, out)
    elif isinstance(obj, dict):
        out += _TAG_DICT
        out += struct.pack("<I", len(obj))
        for key, value in obj.items():
            if not isinstance(key, str):
                raise WireError(f"dict keys must be str, got {type(key).__name__}")
            _encode_into(key, out)
            _encode_into(value, out)
    else:
        raise WireError(f"unencodable type {type(obj).__name__}")


def decode(data: bytes):
    obj, pos = _decode_at(data, 0)
    if pos != len(data):
        raise WireError(f"{len(data) - pos} trailing bytes after value")
    return obj


def _decode_at(data: bytes, pos: int):
    if pos >= len(data):
        raise WireError("truncated value")
    tag = data[pos:pos + 1]
    pos += 1
    if tag == _TAG_NONE:
        return None, pos
    if tag == _TAG_TRUE:
        return True, pos
    if tag == _TAG_FALSE:
        return False, pos
    if tag == _TAG_INT:
        if pos + 8 > len(data):
            raise WireError("truncated int")
        return struct.unpack_from("<q", data, pos)[0], pos + 8
    if tag == _TAG_FLOAT:
        if pos + 8 > len(data):
            raise WireError("truncated float")
        return struct.unpack_from("<d", data, pos)[0], pos + 8
    if tag in (_TAG_STR, _TAG_BYTES):
        if pos + 4 > len(data):
            raise WireError("truncated length")
        n = struct.unpack_from("<I", data, pos)[0]
        pos += 4
        if pos + n > len(data):
            raise WireError("truncated payload")
        raw = data[pos:pos + n]
        pos += n
        if tag == _TAG_STR:
            try:
                return raw.decode("utf-8"), pos
            except UnicodeDecodeError as exc:
                raise WireError(f"invalid utf-8: {exc}")
        return bytes(raw), pos
    if tag == _TAG_LIST:
        if pos + 4 > len(data):
            raise WireError("truncated length")
        n = struct.unpack_from("<I", data, pos)[0]
        pos += 4
        items = []
        for _ in range(n):
            item, pos = _decode_at(data, pos)
            items.append(item)
        return items, pos
    if tag == _TAG_DICT:
        if pos + 4 > len(data):
            raise WireError("truncated length")
        n = struct.unpack_from("<I", data, pos)[0]
        pos += 4
        result = {}
        for _ in range(n):
            key, pos = _decode_at(data, pos)
            if not isinstance(key, str):
                raise WireError("dict key is not a string")
            value, pos = _decode_at(data, pos)
            result[key] = value
        return result, pos
    raise WireError(f"unknown tag {tag!r}")


def frame(obj) -> bytes:
    payload = encode(obj)
    if len(payload) > MAX_FRAME:
        raise WireError("frame too large")
    return struct.pack("<I", len(payload)) + payload


class FrameDecoder:
    """Incremental frame parser.

    Feed raw bytes as they arrive; decoded objects come back in order.
    A frame whose payload fails to decode is dropped and recorded in
    ``errors``; later frames are unaffected.
    """

    def __init__(self):
        self._buf = bytearray()
        self.errors: list[str] = []

    def feed(self, data: bytes) -> list:
        self._buf += data
        out = []
        while True:
            if len(self._buf) < 4:
                break
            n = struct.unpack_from("<I", self._buf, 0)[0]
            if n > MAX_FRAME:
                self.errors.append(f"oversized frame ({n} bytes) — stream reset")
                self._buf.clear()
                break
            if len(self._buf) < 4 + n:
                break
            payload = bytes(self._buf[4:4 + n])
            del self._buf[:4 + n]
            try:
                out.append(decode(payload))
            except WireError as exc:
                self.errors.append(f"dropped malformed frame: {exc}")
        return out

    def close(self) -> None:
        if self._buf:
            self.errors.append(
                f"stream ended with {len(self._buf)} bytes of a partial frame")
            self._buf.clear()
