"""File formats: the SVXB volume container, binary PGM, and key = value configs.

SVXB layout (all little-endian)::

    magic  "SVXB"        4 bytes
    version u8 = 1
    dtype   u8           0 = uint8, 1 = uint16, 2 = float32
    ndim    u8           2, 3, or 4 (leading axis = class/stack axis)
    pad     u8
    dims    u32 * ndim
    spacing f32 * spatial axes (ndim, or 3 when ndim == 4)
    payload row-major, last axis fastest
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"SVXB"
VERSION = 1
DTYPES = {0: np.dtype("<u1"), 1: np.dtype("<u2"), 2: np.dtype("<f4")}
DTYPE_CODES = {np.dtype(v).str: k for k, v in DTYPES.items()}


class FormatError(ValueError):
    pass


@dataclass
class VoxFile:
    data: np.ndarray
    spacing: tuple

    @property
    def dims(self):
        return self.data.shape

    @property
    def spatial_ndim(self):
        return 3 if self.data.ndim == 4 else self.data.ndim


def _dtype_code(dtype):
    code = DTYPE_CODES.get(np.dtype(dtype).newbyteorder("<").str)
    if code is None:
        raise FormatError(f"unsupported dtype {dtype}; use uint8, uint16 or float32")
    return code


def encode_vox(data, spacing=None):
    data = np.asarray(data)
    if data.ndim not in (2, 3, 4):
        raise FormatError(f"ndim must be 2, 3 or 4, got {data.ndim}")
    code = _dtype_code(data.dtype)
    nsp = 3 if data.ndim == 4 else data.ndim
    spacing = (1.0,) * nsp if spacing is None else tuple(spacing)
    if len(spacing) != nsp:
        raise FormatError(f"expected {nsp} spacing values, got {len(spacing)}")
    header = MAGIC + struct.pack("<BBBx", VERSION, code, data.ndim)
    header += struct.pack(f"<{data.ndim}I", *data.shape)
    header += struct.pack(f"<{nsp}f", *spacing)
    return header + np.ascontiguousarray(data, dtype=DTYPES[code]).tobytes()


def decode_vox(buf):
    if len(buf) < 8 or buf[:4] != MAGIC:
        raise FormatError("not an SVXB file (bad magic)")
    version, code, ndim = struct.unpack_from("<BBB", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported SVXB version {version}")
    if code not in DTYPES:
        raise FormatError(f"unknown dtype code {code}")
    if ndim not in (2, 3, 4):
        raise FormatError(f"bad ndim {ndim}")
    nsp = 3 if ndim == 4 else ndim
    off = 8
    need = off + 4 * ndim + 4 * nsp
    if len(buf) < need:
        raise FormatError("truncated header")
    dims = struct.unpack_from(f"<{ndim}I", buf, off)
    off += 4 * ndim
    spacing = struct.unpack_from(f"<{nsp}f", buf, off)
    off += 4 * nsp
    dtype = DTYPES[code]
    nbytes = math.prod(dims) * dtype.itemsize
    if len(buf) - off != nbytes:
        raise FormatError(f"payload is {len(buf) - off} bytes, expected {nbytes}")
    data = np.frombuffer(buf, dtype=dtype, offset=off).reshape(dims)
    return VoxFile(data.copy(), tuple(float(s) for s in spacing))


def write_vox(path, data, spacing=None):
    with open(path, "wb") as fh:
        fh.write(encode_vox(data, spacing))


def read_vox(path):
    with open(path, "rb") as fh:
        return decode_vox(fh.read())


def _pgm_tokens(buf, count):
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(int(buf[start:pos]))
    return tokens, pos + 1


def read_pgm(path):
    """Binary (P5) PGM as a float array in [0, 1]."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:2] != b"P5":
        raise FormatError("not a binary PGM (P5)")
    (width, height, maxval), off = _pgm_tokens(buf, 3)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    if len(buf) - off < count * dtype.itemsize:
        raise FormatError("truncated PGM payload")
    data = np.frombuffer(buf, dtype=dtype, count=count, offset=off).reshape(height, width)
    return data.astype(float) / maxval


def write_pgm(path, image, maxval=255):
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise FormatError("PGM holds 2D images only")
    if arr.dtype.kind == "f":
        arr = np.round(np.clip(arr, 0, 1) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode()
    with open(path, "wb") as fh:
        fh.write(header + arr.astype(dtype).tobytes())


def read_image(path):
    """PGM for 2D grayscale, SVXB otherwise; returns (array, spacing)."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head[:2] == b"P5":
        img = read_pgm(path)
        return img, (1.0,) * img.ndim
    vox = read_vox(path)
    return vox.data.astype(float), vox.spacing


class ConfigError(ValueError):
    pass


def parse_config(text):
    """``key = value`` lines with ``#`` comments; returns ``{key: (value, lineno)}``."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        out[key] = (value, lineno)
    return out
