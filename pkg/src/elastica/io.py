"""Surface and path file formats, OBJ export, and content digests.

Binary surface format GIS1:
    bytes 0-3   magic ``GIS1``
    bytes 4-7   u32 little-endian n_u
    bytes 8-11  u32 little-endian n_v
    then        n_u * n_v * 3 float64 little-endian values, row-major
                (i outer, j inner, x y z innermost)

Binary path format GIP1:
    bytes 0-3   magic ``GIP1``
    bytes 4-15  u32 little-endian T, n_u, n_v
    then        T frame payloads, each the raw float64 block of a GIS1 body

Text surface variant (conventionally ``.gis.txt``): a header line ``n_u n_v``
followed by one ``x y z`` line per point in the same row-major order.
Readers sniff the magic bytes, so any of the formats may be handed to any
loading entry point.
"""

import hashlib
import json
import struct

import numpy as np

from .errors import ParseError
from .metric import SurfacePath
from .surface import Surface

SURFACE_MAGIC = b"GIS1"
PATH_MAGIC = b"GIP1"


def content_digest(data):
    """64-bit content hash (blake2b) of bytes or a file path, as 16 hex chars."""
    if isinstance(data, (bytes, bytearray)):
        payload = bytes(data)
    else:
        with open(data, "rb") as fh:
            payload = fh.read()
    return hashlib.blake2b(payload, digest_size=8).hexdigest()


def _grid_block(points):
    return np.ascontiguousarray(points, dtype="<f8").tobytes()


def write_surface(filename, surface: Surface):
    with open(filename, "wb") as fh:
        fh.write(SURFACE_MAGIC)
        fh.write(struct.pack("<II", surface.n_u, surface.n_v))
        fh.write(_grid_block(surface.points))


def write_surface_text(filename, surface: Surface):
    with open(filename, "w") as fh:
        fh.write(f"{surface.n_u} {surface.n_v}\n")
        for row in surface.points.reshape(-1, 3):
            fh.write(f"{row[0]!r} {row[1]!r} {row[2]!r}\n")


def _read_text_surface(filename):
    with open(filename) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ParseError(f"{filename}: expected 'n_u n_v' header line", offset=1)
        try:
            n_u, n_v = int(header[0]), int(header[1])
        except ValueError as exc:
            raise ParseError(f"{filename}: bad header {header!r}", offset=1) from exc
        values = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"{filename}: expected 3 coordinates", offset=lineno)
            try:
                values.append([float(p) for p in parts])
            except ValueError as exc:
                raise ParseError(f"{filename}: bad float", offset=lineno) from exc
    if len(values) != n_u * n_v:
        raise ParseError(
            f"{filename}: expected {n_u * n_v} points, found {len(values)}", offset=len(values) + 1
        )
    return Surface(np.asarray(values).reshape(n_u, n_v, 3))


def read_surface(filename) -> Surface:
    """Load a surface from GIS1 binary or the text variant (sniffed by magic)."""
    with open(filename, "rb") as fh:
        head = fh.read(4)
        if head != SURFACE_MAGIC:
            return _read_text_surface(filename)
        raw = fh.read(8)
        if len(raw) != 8:
            raise ParseError(f"{filename}: truncated header", offset=4 + len(raw))
        n_u, n_v = struct.unpack("<II", raw)
        count = n_u * n_v * 3
        payload = fh.read(count * 8)
        if len(payload) != count * 8:
            raise ParseError(
                f"{filename}: expected {count * 8} payload bytes, got {len(payload)}",
                offset=12 + len(payload),
            )
        if fh.read(1):
            raise ParseError(f"{filename}: trailing bytes after payload", offset=12 + count * 8)
    points = np.frombuffer(payload, dtype="<f8").reshape(n_u, n_v, 3)
    return Surface(points.astype(np.float64))


def write_path(filename, path: SurfacePath):
    T, (n_u, n_v) = path.n_frames, path.grid
    with open(filename, "wb") as fh:
        fh.write(PATH_MAGIC)
        fh.write(struct.pack("<III", T, n_u, n_v))
        for k in range(T):
            fh.write(_grid_block(path.points[k]))


def read_path(filename) -> SurfacePath:
    with open(filename, "rb") as fh:
        head = fh.read(4)
        if head != PATH_MAGIC:
            raise ParseError(f"{filename}: bad magic {head!r}, expected GIP1", offset=0)
        raw = fh.read(12)
        if len(raw) != 12:
            raise ParseError(f"{filename}: truncated header", offset=4 + len(raw))
        T, n_u, n_v = struct.unpack("<III", raw)
        count = T * n_u * n_v * 3
        payload = fh.read(count * 8)
        if len(payload) != count * 8:
            raise ParseError(
                f"{filename}: expected {count * 8} payload bytes, got {len(payload)}",
                offset=16 + len(payload),
            )
    points = np.frombuffer(payload, dtype="<f8").reshape(T, n_u, n_v, 3)
    return SurfacePath(points.astype(np.float64))


def _scalar_colors(scalar):
    """Map a per-vertex scalar to a blue-to-red ramp, NaN-safe."""
    finite = np.isfinite(scalar)
    lo = float(scalar[finite].min()) if finite.any() else 0.0
    hi = float(scalar[finite].max()) if finite.any() else 1.0
    span = hi - lo if hi > lo else 1.0
    t = np.where(finite, (scalar - lo) / span, 0.5)
    r = t
    g = 0.25 + 0.0 * t
    b = 1.0 - t
    return np.stack([r, g, b], axis=-1)


def export_obj(filename, surface: Surface, scalar=None):
    """Write the quad-split triangle mesh as OBJ.

    Vertices are emitted in row-major grid order; each quad is split along
    the (i, j)--(i+1, j+1) diagonal and the v direction wraps, giving
    ``2 * (n_u - 1) * n_v`` triangles.  When ``scalar`` is given, its values
    are attached as ``v x y z r g b`` vertex colors (a common OBJ extension).
    """
    n_u, n_v = surface.n_u, surface.n_v
    pts = surface.points.reshape(-1, 3)
    colors = None
    if scalar is not None:
        scalar = np.asarray(scalar, dtype=np.float64)
        colors = _scalar_colors(scalar).reshape(-1, 3)
    with open(filename, "w") as fh:
        fh.write(f"# elastica surface {n_u}x{n_v}\n")
        for idx, p in enumerate(pts):
            if colors is None:
                fh.write(f"v {p[0]!r} {p[1]!r} {p[2]!r}\n")
            else:
                c = colors[idx]
                fh.write(f"v {p[0]!r} {p[1]!r} {p[2]!r} {c[0]:.6f} {c[1]:.6f} {c[2]:.6f}\n")
        for i in range(n_u - 1):
            for j in range(n_v):
                a = i * n_v + j + 1
                b = (i + 1) * n_v + j + 1
                c = (i + 1) * n_v + (j + 1) % n_v + 1
                d = i * n_v + (j + 1) % n_v + 1
                fh.write(f"f {a} {b} {c}\n")
                fh.write(f"f {a} {c} {d}\n")


def write_json(filename, payload):
    with open(filename, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
