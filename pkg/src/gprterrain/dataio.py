"""Binary radargram files, dataset manifests, CSV tables and PPM images.

RGG1 layout (all integers little-endian)::

    offset  size          field
    0       4             magic b"RGG1"
    4       4             height (uint32)
    8       4             width (uint32)
    12      4             flags (uint32, bit 0 = labels present)
    16      4*h*w         float32 samples, trace-major: trace 0 rows 0..h-1, trace 1, ...
    ...     w             uint8 label codes (only when bit 0 is set)
"""
from __future__ import annotations

import csv
import io
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .simulate import N_CLASSES, Radargram

MAGIC = b"RGG1"
HEADER = struct.Struct("<4sIII")
FLAG_LABELS = 0x1
UNLABELED = 0xFF  # label code used in memory for radargrams read without labels


class RadargramFormatError(ValueError):
    """Bad magic or malformed header."""


class RadargramLengthError(RadargramFormatError):
    """Payload shorter or longer than the header implies."""


class RadargramDataError(RadargramFormatError):
    """Payload decodes but contains invalid values."""


def payload_size(height: int, width: int, labels: bool) -> int:
    return 4 * height * width + (width if labels else 0)


def encode_radargram(r: Radargram, labels: bool = True) -> bytes:
    data = np.asarray(r.data, dtype="<f4")
    height, width = data.shape
    flags = FLAG_LABELS if labels else 0
    parts = [HEADER.pack(MAGIC, height, width, flags), data.T.tobytes(order="C")]
    if labels:
        parts.append(np.asarray(r.labels, dtype=np.uint8).tobytes())
    return b"".join(parts)


def decode_radargram(buf: bytes, source: str = "<bytes>") -> Radargram:
    if len(buf) < HEADER.size:
        raise RadargramLengthError(
            f"{source}: expected a {HEADER.size}-byte header, got {len(buf)} bytes"
        )
    magic, height, width, flags = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise RadargramFormatError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    has_labels = bool(flags & FLAG_LABELS)
    expected = payload_size(height, width, has_labels)
    actual = len(buf) - HEADER.size
    if actual != expected:
        raise RadargramLengthError(
            f"{source}: expected {expected} payload bytes for {height}x{width}, got {actual}"
        )
    if width < 1:
        raise RadargramDataError(f"{source}: width must be >= 1")
    n = height * width
    samples = np.frombuffer(buf, dtype="<f4", count=n, offset=HEADER.size)
    if not np.all(np.isfinite(samples)):
        raise RadargramDataError(f"{source}: payload contains non-finite samples")
    data = samples.reshape(width, height).T.astype(np.float64)
    if has_labels:
        labels = np.frombuffer(buf, dtype=np.uint8, count=width, offset=HEADER.size + 4 * n).copy()
        if np.any(labels >= N_CLASSES):
            raise RadargramDataError(f"{source}: label codes must be < {N_CLASSES}")
    else:
        labels = np.full(width, UNLABELED, dtype=np.uint8)
    return Radargram(data, labels, source_id=str(source))


def write_radargram(r: Radargram, path, labels: bool = True) -> int:
    """Write ``r`` to ``path`` in RGG1 form and return the byte count.

    Samples are stored as float32, so values round-trip bit-exactly only when
    they are already float32-representable.
    """
    buf = encode_radargram(r, labels)
    try:
        Path(path).write_bytes(buf)
    except OSError as exc:
        raise OSError(f"cannot write radargram to {path}: {exc.strerror or exc}") from exc
    return len(buf)


def read_radargram(path) -> Radargram:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read radargram {path}: {exc.strerror or exc}") from exc
    return decode_radargram(buf, source=str(path))


def header_info(path) -> dict:
    """Header fields and simple statistics, for ``inspect``."""
    r = read_radargram(path)
    _, height, width, flags = HEADER.unpack_from(Path(path).read_bytes())
    info = {
        "path": str(path),
        "height": height,
        "width": width,
        "flags": flags,
        "labels": bool(flags & FLAG_LABELS),
        "min": float(r.data.min()),
        "max": float(r.data.max()),
        "mean": float(r.data.mean()),
        "std": float(r.data.std()),
    }
    if info["labels"]:
        info["label_counts"] = np.bincount(r.labels, minlength=N_CLASSES).tolist()
    return info


def _check_rectangular(rows: Sequence[Sequence], what: str) -> None:
    if rows:
        n = len(rows[0])
        for i, row in enumerate(rows):
            if len(row) != n:
                raise ValueError(f"ragged {what}: row {i} has {len(row)} fields, expected {n}")


def csv_text(rows: Sequence[Sequence], header: Sequence[str] | None = None) -> str:
    all_rows = ([list(header)] if header is not None else []) + [list(r) for r in rows]
    _check_rectangular(all_rows, "CSV table")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerows(all_rows)
    return buf.getvalue()


def write_csv_table(rows: Sequence[Sequence], path, header: Sequence[str] | None = None) -> int:
    text = csv_text(rows, header)
    Path(path).write_bytes(text.encode("utf-8"))
    return len(text)


def read_csv_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], []
    return rows[0], rows[1:]


def encode_ppm(pixels) -> bytes:
    """Binary P6 image from a height x width grid of (r, g, b) triples."""
    rows = [list(r) for r in pixels]
    _check_rectangular(rows, "pixel grid")
    arr = np.asarray(rows, dtype=np.int64)
    if arr.size == 0:
        raise ValueError("image must be at least 1x1")
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected a grid of RGB triples, got shape {arr.shape}")
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("pixel values must lie in [0, 255]")
    height, width, _ = arr.shape
    return f"P6\n{width} {height}\n255\n".encode("ascii") + arr.astype(np.uint8).tobytes()


def write_ppm_image(pixels, path) -> int:
    buf = encode_ppm(pixels)
    Path(path).write_bytes(buf)
    return len(buf)


def read_ppm_image(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    parts = buf.split(b"\n", 3)
    if parts[0] != b"P6" or len(parts) < 4:
        raise ValueError(f"{path}: not a binary PPM written by this package")
    width, height = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(height, width, 3)


MANIFEST_HEADER = ("path", "site", "notes")


@dataclass
class ManifestEntry:
    path: str
    site: str = ""
    notes: str = ""


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    split_seed: int = 42

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.path in seen:
                raise ValueError(f"duplicate manifest path {e.path!r}")
            seen.add(e.path)

    def write(self, path) -> int:
        rows = [(e.path, e.site, e.notes) for e in self.entries]
        return write_csv_table(rows, path, header=MANIFEST_HEADER)

    @classmethod
    def read(cls, path, split_seed: int = 42) -> "DatasetManifest":
        header, rows = read_csv_table(path)
        if tuple(header) != MANIFEST_HEADER:
            raise ValueError(f"{path}: manifest header must be {','.join(MANIFEST_HEADER)}, got {header}")
        return cls([ManifestEntry(*row) for row in rows], split_seed)

    def resolve(self, base: str | os.PathLike) -> list[Path]:
        """Entry paths, relative ones taken relative to ``base``."""
        base = Path(base)
        return [Path(e.path) if os.path.isabs(e.path) else base / e.path for e in self.entries]


def load_corpus(manifest_path) -> list[Radargram]:
    """Read every radargram listed in a manifest; source ids are manifest paths."""
    manifest = DatasetManifest.read(manifest_path)
    out = []
    for entry, path in zip(manifest.entries, manifest.resolve(Path(manifest_path).parent)):
        r = read_radargram(path)
        r.source_id = entry.path
        out.append(r)
    return out


def save_corpus(corpus: Iterable[Radargram], out_dir, manifest_name: str = "manifest.csv") -> Path:
    """Write each radargram as ``<source_id>.rgg`` plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, r in enumerate(corpus):
        name = f"{r.source_id or f'radargram-{i:03d}'}.rgg"
        write_radargram(r, out_dir / name)
        entries.append(ManifestEntry(name, r.source_id or name, f"width={r.width}"))
    manifest_path = out_dir / manifest_name
    DatasetManifest(entries).write(manifest_path)
    return manifest_path
