"""Binary PGM (P5, maxval 255) reader and writer."""

from pathlib import Path

import numpy as np

from src.errors import ArtifactError
from src.models.image import ImageBuffer


class PgmFormatError(ArtifactError):
    """Malformed or truncated PGM file."""


class UnsupportedPgmError(PgmFormatError):
    """Well-formed PGM variant this toolkit does not handle (e.g. 16-bit)."""


def pgm_header(width: int, height: int) -> bytes:
    return f"P5\n{width} {height}\n255\n".encode("ascii")


def write_pgm(img: ImageBuffer, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with path.open("wb") as f:
            f.write(pgm_header(img.width, img.height))
            f.write(np.ascontiguousarray(img.pixels).tobytes())
    except OSError as e:
        raise ArtifactError(f"cannot write {path}: {e}") from e
    return path


def _header_tokens(data: bytes, path: Path) -> tuple[list[bytes], int]:
    """Split the first four whitespace-separated header tokens, skipping comments.

    Returns the tokens and the payload offset (one whitespace byte after maxval).
    """
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise PgmFormatError(f"{path}: truncated header")
        ch = data[i:i + 1]
        if ch.isspace():
            i += 1
        elif ch == b"#":
            end = data.find(b"\n", i)
            if end < 0:
                raise PgmFormatError(f"{path}: unterminated header comment")
            i = end + 1
        else:
            start = i
            while i < len(data) and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
                i += 1
            tokens.append(data[start:i])
    if i >= len(data) or not data[i:i + 1].isspace():
        raise PgmFormatError(f"{path}: missing whitespace after maxval")
    return tokens, i + 1


def read_pgm(path: str | Path) -> ImageBuffer:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ArtifactError(f"cannot read {path}: {e}") from e

    tokens, offset = _header_tokens(data, path)
    magic, width, height, maxval = tokens
    if magic != b"P5":
        raise PgmFormatError(f"{path}: not a binary PGM (magic {magic!r})")
    try:
        w, h, mv = int(width), int(height), int(maxval)
    except ValueError as e:
        raise PgmFormatError(f"{path}: non-numeric header field") from e
    if w < 1 or h < 1:
        raise PgmFormatError(f"{path}: invalid dimensions {w}x{h}")
    if mv != 255:
        raise UnsupportedPgmError(f"{path}: maxval {mv} not supported (only 255)")

    payload = data[offset:]
    if len(payload) < w * h:
        raise PgmFormatError(f"{path}: truncated payload ({len(payload)} of {w * h} bytes)")
    pixels = np.frombuffer(payload[:w * h], dtype=np.uint8).reshape(h, w).copy()
    return ImageBuffer(pixels)
