"""2D scalar fields, bit-exact file I/O, and the patch tiler.

A :class:`ScalarField` is an immutable row-major grid of intensities in
``[0, 1]``.  Fields travel on disk as TPR1 (magic ``TPR1``, little-endian
``u32`` width, ``u32`` height, row-major IEEE-754 32-bit floats); binary
PGM (P5, maxval <= 65535) is accepted on input and normalised to
``v / maxval``.  Values outside ``[0, 1]`` are an error, never clamped.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TPR1_MAGIC = b"TPR1"
_TPR1_HEADER = struct.Struct("<4sII")


class FieldParseError(ValueError):
    """A field file failed to parse; ``offset`` is the offending byte."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class MalformedHeaderError(FieldParseError):
    pass


class ValueRangeError(FieldParseError):
    pass


class TruncatedPayloadError(FieldParseError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Immutable 2D grid of finite intensities in ``[0, 1]``.

    Parameters
    ----------
    values:
        Array-like of shape ``(height, width)``; copied, validated and
        frozen (the stored array is read-only float64).
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"field must be 2D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"field dimensions must be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
            raise ValueError(
                f"field values must lie in [0, 1], got range "
                f"[{arr.min()}, {arr.max()}]"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def value(self, row: int, col: int) -> float:
        return float(self.values[row, col])

    def tobytes(self) -> bytes:
        """Row-major float64 payload; the cache/determinism key."""
        return self.values.tobytes()


@dataclass(frozen=True)
class PatchLayout:
    """Anchors of constant-size patches covering a field.

    Anchors sit at multiples of ``patch_size``; the last anchor per axis is
    clamped inward to ``dim - patch_size`` so the tail patch overlaps its
    neighbour instead of shrinking.  A field smaller than ``patch_size`` in
    an axis gets a single anchor at 0 with the patch clipped to the field.
    """

    patch_size: int
    anchors: tuple[tuple[int, int], ...]


def _axis_anchors(dim: int, patch_size: int) -> list[int]:
    if dim <= patch_size:
        return [0]
    out = list(range(0, dim - patch_size + 1, patch_size))
    if out[-1] != dim - patch_size:
        out.append(dim - patch_size)
    return out


def tile(field: ScalarField, patch_size: int) -> PatchLayout:
    """Cover ``field`` with ``patch_size`` x ``patch_size`` patches.

    Raises
    ------
    ValueError
        If ``patch_size < 2``.
    """
    if patch_size < 2:
        raise ValueError(f"patch_size must be >= 2, got {patch_size}")
    rows = _axis_anchors(field.height, patch_size)
    cols = _axis_anchors(field.width, patch_size)
    anchors = tuple((r, c) for r in rows for c in cols)
    return PatchLayout(patch_size=patch_size, anchors=anchors)


def extract_patch(
    field: ScalarField, anchor: tuple[int, int], patch_size: int
) -> ScalarField:
    """Copy the patch at ``anchor``; clipped when the field is smaller."""
    r, c = anchor
    h, w = field.height, field.width
    if r < 0 or c < 0 or r >= h or c >= w:
        raise ValueError(f"anchor {anchor} out of bounds for {h}x{w} field")
    if (r + patch_size > h and r != 0) or (c + patch_size > w and c != 0):
        raise ValueError(
            f"anchor {anchor} with patch {patch_size} does not fit a "
            f"{h}x{w} field"
        )
    return ScalarField(field.values[r : r + patch_size, c : c + patch_size])


def _read_tpr1(data: bytes, path: str) -> ScalarField:
    if len(data) < _TPR1_HEADER.size:
        raise MalformedHeaderError(f"{path}: short TPR1 header", len(data))
    magic, width, height = _TPR1_HEADER.unpack_from(data, 0)
    if magic != TPR1_MAGIC:
        raise MalformedHeaderError(f"{path}: bad magic {magic!r}", 0)
    if width < 1 or height < 1:
        raise MalformedHeaderError(
            f"{path}: invalid dimensions {width}x{height}", 4
        )
    n = width * height
    need = _TPR1_HEADER.size + 4 * n
    if len(data) < need:
        raise TruncatedPayloadError(
            f"{path}: payload holds {(len(data) - _TPR1_HEADER.size) // 4} of "
            f"{n} floats",
            len(data),
        )
    raw = np.frombuffer(data, dtype="<f4", count=n, offset=_TPR1_HEADER.size)
    bad = ~np.isfinite(raw) | (raw < 0.0) | (raw > 1.0)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueRangeError(
            f"{path}: value {raw[i]} at pixel {i} outside [0, 1]",
            _TPR1_HEADER.size + 4 * i,
        )
    return ScalarField(raw.astype(np.float64).reshape(height, width))


def _pgm_token(data: bytes, pos: int, path: str) -> tuple[bytes, int]:
    # Skip whitespace and '#' comments, then take one token.
    n = len(data)
    while pos < n:
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise MalformedHeaderError(f"{path}: PGM header ended early", pos)
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    return data[start:pos], pos


def _read_pgm(data: bytes, path: str) -> ScalarField:
    tok, pos = _pgm_token(data, 0, path)
    if tok != b"P5":
        raise MalformedHeaderError(f"{path}: not a binary PGM (got {tok!r})", 0)
    fields = []
    for name in ("width", "height", "maxval"):
        at = pos
        tok, pos = _pgm_token(data, pos, path)
        if not tok.isdigit():
            raise MalformedHeaderError(f"{path}: bad PGM {name} {tok!r}", at)
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedHeaderError(
            f"{path}: invalid dimensions {width}x{height}", 0
        )
    if not 0 < maxval <= 65535:
        raise ValueRangeError(f"{path}: PGM maxval {maxval} out of range", 0)
    pos += 1  # single whitespace byte after maxval
    n = width * height
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = pos + n * dtype.itemsize
    if len(data) < need:
        raise TruncatedPayloadError(
            f"{path}: PGM payload short by {need - len(data)} bytes", len(data)
        )
    raw = np.frombuffer(data, dtype=dtype, count=n, offset=pos)
    if int(raw.max(initial=0)) > maxval:
        i = int(np.argmax(raw > maxval))
        raise ValueRangeError(
            f"{path}: sample {int(raw[i])} exceeds maxval {maxval}",
            pos + i * dtype.itemsize,
        )
    arr = raw.astype(np.float64).reshape(height, width) / float(maxval)
    return ScalarField(arr)


def read_field(path, format: str | None = None) -> ScalarField:
    """Read a field from ``path``.

    ``format`` is ``"tpr1"`` or ``"pgm"``; when omitted it is inferred from
    the file suffix.
    """
    p = Path(path)
    if format is None:
        suffix = p.suffix.lower().lstrip(".")
        if suffix in ("tpr1", "pgm"):
            format = suffix
        else:
            raise ValueError(f"cannot infer format from suffix of {p.name!r}")
    data = p.read_bytes()
    if format == "tpr1":
        return _read_tpr1(data, str(p))
    if format == "pgm":
        return _read_pgm(data, str(p))
    raise ValueError(f"unknown field format {format!r}")


def write_field(field: ScalarField, path) -> None:
    """Write ``field`` as TPR1 (payload cast to float32)."""
    write_grid(field.values, path)


def write_grid(grid: np.ndarray, path) -> None:
    """Write an arbitrary real grid in the TPR1 layout.

    Unlike :func:`write_field` the values are not range-checked, so
    gradient grids (unconstrained sign) can use the same container.
    """
    arr = np.asarray(grid, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"grid must be 2D, got shape {arr.shape}")
    h, w = arr.shape
    payload = arr.astype("<f4").tobytes()
    Path(path).write_bytes(_TPR1_HEADER.pack(TPR1_MAGIC, w, h) + payload)


def read_grid(path) -> np.ndarray:
    """Read a TPR1 grid without the ``[0, 1]`` field validation."""
    data = Path(path).read_bytes()
    if len(data) < _TPR1_HEADER.size:
        raise MalformedHeaderError(f"{path}: short TPR1 header", len(data))
    magic, width, height = _TPR1_HEADER.unpack_from(data, 0)
    if magic != TPR1_MAGIC:
        raise MalformedHeaderError(f"{path}: bad magic {magic!r}", 0)
    n = width * height
    if len(data) < _TPR1_HEADER.size + 4 * n:
        raise TruncatedPayloadError(f"{path}: truncated grid payload", len(data))
    raw = np.frombuffer(data, dtype="<f4", count=n, offset=_TPR1_HEADER.size)
    return raw.astype(np.float64).reshape(height, width)


def write_pgm(field: ScalarField, path, maxval: int = 65535) -> None:
    """Write ``field`` as binary PGM (used by the ``convert`` CLI).

    Quantises to ``round(v * maxval)``; lossy for general fields.
    """
    if not 0 < maxval <= 65535:
        raise ValueError(f"maxval {maxval} out of range")
    q = np.rint(field.values * maxval)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    header = f"P5\n{field.width} {field.height}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + q.astype(dtype).tobytes())
