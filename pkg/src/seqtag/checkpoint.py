"""Self-describing binary container for model checkpoints.

Layout: a magic/version line, UTF-8 header sections (named blocks of
text lines), raw little-endian float64 tensor payloads, and a trailing
SHA-256 checksum over everything that precedes it::

    SEQTAG-CKPT v1\\n
    [section <name> <line-count>]\\n   (repeated)
    <line>\\n ...
    [tensors <count>]\\n
    <name> <ndim> <d0> <d1>\\n<raw bytes>   (repeated)
    [checksum <hex sha256>]\\n

A truncated or modified file fails the checksum; a different version
line fails with an explicit unsupported-version error.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import IntegrityError, UnsupportedVersionError

MAGIC_PREFIX = b"SEQTAG-CKPT v"
VERSION = 1
MAGIC = MAGIC_PREFIX + str(VERSION).encode() + b"\n"
_CHECKSUM_LEN = len("[checksum ]\n") + 64


def write_container(path, sections: dict[str, list[str]], tensors: dict[str, np.ndarray]):
    chunks: list[bytes] = [MAGIC]
    for name, lines in sections.items():
        if any("\n" in ln for ln in lines):
            raise ValueError(f"section {name!r} lines must not contain newlines")
        chunks.append(f"[section {name} {len(lines)}]\n".encode("utf-8"))
        for ln in lines:
            chunks.append(ln.encode("utf-8") + b"\n")
    chunks.append(f"[tensors {len(tensors)}]\n".encode("utf-8"))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        dims = " ".join(str(d) for d in arr.shape)
        chunks.append(f"{name} {arr.ndim} {dims}".rstrip().encode("utf-8") + b"\n")
        chunks.append(arr.tobytes())
    payload = b"".join(chunks)
    digest = hashlib.sha256(payload).hexdigest()
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(f"[checksum {digest}]\n".encode("ascii"))


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def line(self) -> str:
        end = self.data.find(b"\n", self.pos)
        if end < 0:
            raise IntegrityError("checkpoint ended in the middle of a header line")
        try:
            out = self.data[self.pos : end].decode("utf-8")
        except UnicodeDecodeError:
            raise IntegrityError("checkpoint header is not valid UTF-8") from None
        self.pos = end + 1
        return out

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise IntegrityError("checkpoint ended inside a tensor payload")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out


def read_container(path) -> tuple[dict[str, list[str]], dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        data = fh.read()

    if len(data) < len(MAGIC) + _CHECKSUM_LEN:
        raise IntegrityError("checkpoint file is too short")
    payload, trailer = data[:-_CHECKSUM_LEN], data[-_CHECKSUM_LEN:]
    if not trailer.startswith(b"[checksum ") or not trailer.endswith(b"]\n"):
        raise IntegrityError("checkpoint has no checksum trailer (truncated file?)")
    try:
        stated = trailer[len(b"[checksum ") : -2].decode("ascii")
    except UnicodeDecodeError:
        raise IntegrityError("checkpoint checksum trailer is corrupt") from None
    actual = hashlib.sha256(payload).hexdigest()
    if stated != actual:
        raise IntegrityError("checkpoint checksum mismatch; the file is corrupt")

    if not payload.startswith(MAGIC):
        first = payload.split(b"\n", 1)[0]
        if first.startswith(MAGIC_PREFIX):
            raise UnsupportedVersionError(
                f"unsupported checkpoint version {first.decode('utf-8', 'replace')!r}; "
                f"this build reads v{VERSION}"
            )
        raise IntegrityError("not a checkpoint file (bad magic)")

    cur = _Cursor(payload)
    cur.pos = len(MAGIC)
    sections: dict[str, list[str]] = {}
    tensors: dict[str, np.ndarray] = {}
    while True:
        header = cur.line()
        if header.startswith("[section "):
            body = header[len("[section ") : -1]
            name, _, count = body.rpartition(" ")
            sections[name] = [cur.line() for _ in range(int(count))]
        elif header.startswith("[tensors "):
            count = int(header[len("[tensors ") : -1])
            for _ in range(count):
                parts = cur.line().split(" ")
                name, ndim = parts[0], int(parts[1])
                shape = tuple(int(d) for d in parts[2 : 2 + ndim])
                size = 8 * int(np.prod(shape, dtype=np.int64)) if ndim else 8
                buf = cur.raw(size)
                tensors[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
            break
        else:
            raise IntegrityError(f"unexpected checkpoint block {header!r}")
    if cur.pos != len(payload):
        raise IntegrityError("trailing bytes after the tensor block")
    return sections, tensors
