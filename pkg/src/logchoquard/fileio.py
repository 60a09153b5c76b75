"""File formats: LCF2 fields, radial CSV profiles, kernel cache, manifests.

All binary formats are little-endian.  LCF2 layout: magic ``LCF2``,
u32 version=1, u32 nx, u32 ny, f64 lx, ly, x0, y0, then nx*ny f64 values
in row-major order (rows along y).  Radial profiles are two-column CSV
``r,u`` under the provenance line ``# logchoquard radial v1``.  Kernel
caches (``LCK1``) store the build parameters and the rfft-layout
multipliers of the truncated log kernel.
"""

from __future__ import annotations

import hashlib
import io
import os
import struct
from pathlib import Path

import numpy as np

from .grids import Field2D, Grid2D, RadialGrid, RadialProfile
from .logkernel import KERNEL_FORMAT_VERSION, TruncatedKernelSpectrum

__all__ = [
    "write_field",
    "read_field",
    "write_radial_profile",
    "read_radial_profile",
    "write_kernel_cache",
    "read_kernel_cache",
    "kernel_cache_path",
    "write_sidecar",
    "read_keyvalue",
    "write_keyvalue",
    "sha256_of",
    "RADIAL_HEADER",
]

LCF2_MAGIC = b"LCF2"
LCK1_MAGIC = b"LCK1"
RADIAL_HEADER = "# logchoquard radial v1"


def write_field(path, f: Field2D, sidecar: dict | None = None) -> None:
    """Write a field as LCF2 (plus an optional key=value sidecar)."""
    g = f.grid
    payload = io.BytesIO()
    payload.write(LCF2_MAGIC)
    payload.write(struct.pack("<I", 1))
    payload.write(struct.pack("<II", g.nx, g.ny))
    payload.write(struct.pack("<dddd", g.lx, g.ly, g.x0, g.y0))
    payload.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    Path(path).write_bytes(payload.getvalue())
    if sidecar is not None:
        write_sidecar(path, sidecar)


def read_field(path) -> Field2D:
    raw = Path(path).read_bytes()
    if raw[:4] != LCF2_MAGIC:
        raise ValueError(f"{path}: not an LCF2 field file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != 1:
        raise ValueError(f"{path}: unsupported LCF2 version {version}")
    nx, ny = struct.unpack_from("<II", raw, 8)
    lx, ly, x0, y0 = struct.unpack_from("<dddd", raw, 16)
    values = np.frombuffer(raw, dtype="<f8", count=nx * ny, offset=48)
    grid = Grid2D(nx, ny, lx, ly, x0, y0)
    return Field2D(grid, values.reshape(ny, nx).copy())


def write_sidecar(path, meta: dict) -> None:
    """Flat key=value provenance next to a binary artifact."""
    write_keyvalue(str(path) + ".meta", meta)


def write_radial_profile(path, p: RadialProfile, provenance: dict | None = None) -> None:
    lines = [RADIAL_HEADER]
    for key, value in (provenance or {}).items():
        lines.append(f"# {key}={value}")
    lines.append("r,u")
    for r, u in zip(p.grid.r, p.values):
        lines.append(f"{r!r},{u!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_radial_profile(path) -> RadialProfile:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith(RADIAL_HEADER):
        raise ValueError(f"{path}: missing '{RADIAL_HEADER}' header")
    rows = [ln for ln in text if ln and not ln.startswith("#") and ln != "r,u"]
    data = np.array([[float(tok) for tok in ln.split(",")] for ln in rows])
    return RadialProfile(RadialGrid(data[:, 0]), data[:, 1])


# ---------------------------------------------------------------------------
# kernel cache
# ---------------------------------------------------------------------------

def kernel_cache_path(cache_dir, grid: Grid2D, T: float) -> Path:
    tag = f"{grid.nx}x{grid.ny}_{grid.lx:.12g}x{grid.ly:.12g}_T{T:.12g}_v{KERNEL_FORMAT_VERSION}"
    digest = hashlib.sha256(tag.encode()).hexdigest()[:16]
    return Path(cache_dir) / f"logkernel_{digest}.lck"


def write_kernel_cache(path, K: TruncatedKernelSpectrum) -> None:
    g = K.grid
    npy, npx = K.pad_shape
    method = K.method.encode()[:16].ljust(16, b"\0")
    payload = io.BytesIO()
    payload.write(LCK1_MAGIC)
    payload.write(struct.pack("<I", K.version))
    payload.write(struct.pack("<II", g.nx, g.ny))
    payload.write(struct.pack("<dddd", g.lx, g.ly, g.x0, g.y0))
    payload.write(struct.pack("<d", K.T))
    payload.write(struct.pack("<II", npx, npy))
    payload.write(method)
    payload.write(np.ascontiguousarray(K.khat, dtype="<f8").tobytes())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload.getvalue())


def read_kernel_cache(path) -> TruncatedKernelSpectrum:
    raw = Path(path).read_bytes()
    if raw[:4] != LCK1_MAGIC:
        raise ValueError(f"{path}: not a kernel cache file")
    off = 4
    (version,) = struct.unpack_from("<I", raw, off); off += 4
    nx, ny = struct.unpack_from("<II", raw, off); off += 8
    lx, ly, x0, y0 = struct.unpack_from("<dddd", raw, off); off += 32
    (T,) = struct.unpack_from("<d", raw, off); off += 8
    npx, npy = struct.unpack_from("<II", raw, off); off += 8
    method = raw[off:off + 16].rstrip(b"\0").decode(); off += 16
    khat = np.frombuffer(raw, dtype="<f8", offset=off,
                         count=npy * (npx // 2 + 1)).reshape(npy, npx // 2 + 1)
    grid = Grid2D(nx, ny, lx, ly, x0, y0)
    return TruncatedKernelSpectrum(grid, T, (npy, npx), khat.copy(), method, version)


# ---------------------------------------------------------------------------
# structured text (key=value)
# ---------------------------------------------------------------------------

def write_keyvalue(path, entries: dict) -> None:
    lines = []
    for key, value in entries.items():
        lines.append(f"{key}={value}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_keyvalue(path) -> dict:
    out: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}: malformed line {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
