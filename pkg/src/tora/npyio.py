"""Reading and writing embedding matrices in the NPY v1.0 array file format.

Only little-endian float32/float64 payloads in row-major order are accepted.
Values are widened to float64 on read; ``write_array`` narrows back to the
tag carried by the :class:`ArrayFile` so a read/write cycle is bit-exact.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    TruncationError,
    UnsupportedLayoutError,
    ValidationError,
)

MAGIC = b"\x93NUMPY"
VERSION = b"\x01\x00"
SUPPORTED_DESCR = ("<f4", "<f8")
_WIDTH = {"<f4": 4, "<f8": 8}


@dataclass(frozen=True)
class ArrayFile:
    """An array plus the element width it is stored at on disk.

    ``values`` is always float64 in memory; ``dtype`` records the on-disk
    width tag. ``shape`` defaults to ``values.shape`` but may be set
    explicitly, in which case ``write_array`` validates consistency.
    """

    values: np.ndarray
    dtype: str = "<f8"
    shape: tuple = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if self.shape is None:
            object.__setattr__(self, "shape", tuple(values.shape))
        else:
            object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))


def read_array(path) -> ArrayFile:
    """Parse an array file, widening the payload to float64.

    Raises FormatError on bad magic/version/header, UnsupportedLayoutError
    when the column-major flag is set, and TruncationError when the header
    and payload lengths disagree.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 10:
        raise TruncationError(f"{path}: file shorter than the fixed preamble")
    if raw[:6] != MAGIC:
        raise FormatError(f"{path}: bad magic bytes {raw[:6]!r}")
    if raw[6:8] != VERSION:
        raise FormatError(f"{path}: unsupported format version {raw[6:8]!r}")
    header_len = int.from_bytes(raw[8:10], "little")
    if len(raw) < 10 + header_len:
        raise TruncationError(f"{path}: header extends past end of file")
    try:
        header_text = raw[10 : 10 + header_len].decode("ascii")
        header = ast.literal_eval(header_text.strip())
    except (UnicodeDecodeError, ValueError, SyntaxError) as exc:
        raise FormatError(f"{path}: unparseable header") from exc
    if not isinstance(header, dict):
        raise FormatError(f"{path}: header is not a dict literal")

    descr = header.get("descr")
    if descr not in SUPPORTED_DESCR:
        raise FormatError(f"{path}: unsupported descr {descr!r}")
    fortran = header.get("fortran_order")
    if fortran is True:
        raise UnsupportedLayoutError(f"{path}: column-major files are not supported")
    if fortran is not False:
        raise FormatError(f"{path}: missing or malformed fortran_order flag")
    shape = header.get("shape")
    if not isinstance(shape, tuple) or not all(
        isinstance(n, int) and n >= 0 for n in shape
    ):
        raise FormatError(f"{path}: malformed shape {shape!r}")

    payload = raw[10 + header_len :]
    expected = math.prod(shape) * _WIDTH[descr]
    if len(payload) != expected:
        raise TruncationError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    values = np.frombuffer(payload, dtype=np.dtype(descr)).reshape(shape)
    return ArrayFile(values=values.astype(np.float64), dtype=descr, shape=shape)


def write_array(path, data: ArrayFile) -> None:
    """Write an ArrayFile so that ``read_array`` recovers it bit-exactly."""
    if data.dtype not in SUPPORTED_DESCR:
        raise ValidationError(f"unsupported dtype tag {data.dtype!r}")
    if any(n < 0 for n in data.shape):
        raise ValidationError(f"negative extent in shape {data.shape}")
    if data.values.size != math.prod(data.shape):
        raise ValidationError(
            f"shape {data.shape} implies {math.prod(data.shape)} elements, "
            f"payload has {data.values.size}"
        )
    payload = (
        np.ascontiguousarray(data.values.reshape(data.shape))
        .astype(np.dtype(data.dtype))
        .tobytes(order="C")
    )
    header = _render_header(data.dtype, data.shape)
    Path(path).write_bytes(MAGIC + VERSION + len(header).to_bytes(2, "little") + header + payload)


def _render_header(descr: str, shape: tuple) -> bytes:
    # Total preamble (magic + version + length field + header) must be a
    # multiple of 64, with the header terminated by a newline.
    body = "{'descr': '%s', 'fortran_order': False, 'shape': %s, }" % (
        descr,
        repr(tuple(shape)),
    )
    pad = (-(len(body) + 11)) % 64
    text = body + " " * pad + "\n"
    if len(text) > 0xFFFF:
        raise ValidationError("header too long for format version 1.0")
    return text.encode("ascii")
