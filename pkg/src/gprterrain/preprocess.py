"""Radargram padding, band extraction, windowed slicing and train/test splitting."""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .simulate import DIRECT_ROWS, N_CLASSES, N_SAMPLES, Radargram, TerrainClass, hash64

DEFAULT_WIDTH = 32
DEFAULT_STRIDE = 4
STD_FLOOR = 1e-8
WIDTHS = (1, 8, 16, 24, 32)


class ShapeError(ValueError):
    pass


class StratificationError(ValueError):
    pass


class Band(enum.Enum):
    DIRECT = "direct"
    REFLECTED = "reflected"
    FULL = "full"

    @property
    def rows(self) -> slice:
        return _BAND_ROWS[self]

    @property
    def height(self) -> int:
        return self.rows.stop - self.rows.start


_BAND_ROWS = {
    Band.DIRECT: slice(0, DIRECT_ROWS),
    Band.REFLECTED: slice(DIRECT_ROWS, 2 * DIRECT_ROWS),
    Band.FULL: slice(0, N_SAMPLES),
}


@dataclass(frozen=True)
class SliceSpec:
    w_resize: int = DEFAULT_WIDTH
    s: int = DEFAULT_STRIDE
    band: Band = Band.DIRECT
    snap: bool = False

    def __post_init__(self):
        if self.w_resize < 1:
            raise ValueError(f"w_resize must be >= 1, got {self.w_resize}")
        if not 1 <= self.s <= self.w_resize:
            raise ValueError(f"stride must satisfy 1 <= s <= w_resize, got s={self.s}, w_resize={self.w_resize}")

    @classmethod
    def for_width(cls, width: int, band: Band = Band.DIRECT, stride: int = DEFAULT_STRIDE) -> "SliceSpec":
        """Spec for ``width``, clamping the stride so it never exceeds the window."""
        return cls(width, min(stride, width), band)


@dataclass
class SliceImage:
    data: np.ndarray  # rows x w_resize
    label: TerrainClass
    source_id: str
    offset: int


def pad_width(w: int, w_resize: int, s: int, snap: bool = False) -> int:
    """Padded width ``w + ((w - w_resize) % s)``.

    With ``snap`` the result is instead the smallest width >= ``w`` for which
    ``(w_pad - w_resize)`` is a multiple of ``s``.
    """
    if w < w_resize:
        raise ValueError(f"radargram width {w} is smaller than window width {w_resize}")
    if s < 1:
        raise ValueError(f"stride must be >= 1, got {s}")
    if snap:
        return w + (-(w - w_resize)) % s
    return w + ((w - w_resize) % s)


def pad_radargram(r: Radargram, w_pad: int) -> Radargram:
    """Extend ``r`` to ``w_pad`` columns by replicating its last column."""
    if w_pad < r.width:
        raise ValueError(f"w_pad={w_pad} is smaller than width {r.width}")
    extra = w_pad - r.width
    if extra == 0:
        return r
    data = np.concatenate([r.data, np.repeat(r.data[:, -1:], extra, axis=1)], axis=1)
    labels = np.concatenate([r.labels, np.repeat(r.labels[-1:], extra)])
    return Radargram(data, labels, r.source_id)


def extract_band(r: Radargram, band: Band) -> np.ndarray:
    if r.height != N_SAMPLES:
        raise ShapeError(f"expected height {N_SAMPLES}, got {r.height}")
    return r.data[band.rows]


def window_count(w_pad: int, w_resize: int, s: int) -> int:
    if w_pad < w_resize:
        return 0
    return (w_pad - w_resize) // s + 1


def slice_radargram(r: Radargram, spec: SliceSpec) -> tuple[list[SliceImage], int]:
    """Cut windows at offsets 0, s, 2s, ... and keep the single-label ones.

    Returns the kept slices and the number of discarded mixed-label windows.
    """
    if r.width < spec.w_resize:
        raise ValueError(f"radargram width {r.width} is smaller than window width {spec.w_resize}")
    band = extract_band(r, spec.band)
    kept = []
    discarded = 0
    for offset in range(0, window_count(r.width, spec.w_resize, spec.s) * spec.s, spec.s):
        labels = r.labels[offset:offset + spec.w_resize]
        if np.any(labels != labels[0]):
            discarded += 1
            continue
        kept.append(SliceImage(band[:, offset:offset + spec.w_resize].copy(),
                               TerrainClass(int(labels[0])), r.source_id, offset))
    return kept, discarded


def make_slices(r: Radargram, spec: SliceSpec) -> tuple[list[SliceImage], int]:
    """Pad then slice one radargram; radargrams narrower than the window yield nothing."""
    if r.width < spec.w_resize:
        return [], 0
    padded = pad_radargram(r, pad_width(r.width, spec.w_resize, spec.s, spec.snap))
    return slice_radargram(padded, spec)


@dataclass
class DatasetSplit:
    train: list[SliceImage]
    test: list[SliceImage]
    seed: int
    spec: SliceSpec
    train_ids: tuple[str, ...] = ()
    test_ids: tuple[str, ...] = ()
    mean: float | None = None
    std: float | None = None
    discarded: int = 0

    def arrays(self, side: str) -> tuple[np.ndarray, np.ndarray]:
        """``(X, y)`` with X shaped (n, 1, rows, cols)."""
        slices = self.train if side == "train" else self.test
        if not slices:
            rows = self.spec.band.height
            return np.zeros((0, 1, rows, self.spec.w_resize)), np.zeros(0, dtype=np.int64)
        x = np.stack([s.data for s in slices])[:, None]
        y = np.array([int(s.label) for s in slices], dtype=np.int64)
        return x, y


def split_radargrams(radargrams: Sequence[Radargram], fraction: float = 0.8,
                     seed: int = 42) -> tuple[list[Radargram], list[Radargram]]:
    """Stratified radargram-level split by dominant class.

    The membership depends only on the radargram order, their dominant
    classes, ``fraction`` and ``seed``; it never depends on slicing settings.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    by_class: dict[int, list[int]] = {}
    for i, r in enumerate(radargrams):
        by_class.setdefault(int(r.dominant_label()), []).append(i)
    train_idx, test_idx = [], []
    for cls in sorted(by_class):
        members = by_class[cls]
        if len(members) < 2:
            raise StratificationError(
                f"class {TerrainClass(cls).name.lower()} has {len(members)} radargram(s); need >= 2"
            )
        order = np.random.default_rng(hash64(seed, cls)).permutation(len(members))
        n_test = min(len(members) - 1, max(1, int(round((1.0 - fraction) * len(members)))))
        test_idx.extend(members[j] for j in order[:n_test])
        train_idx.extend(members[j] for j in order[n_test:])
    train_idx.sort()
    test_idx.sort()
    return [radargrams[i] for i in train_idx], [radargrams[i] for i in test_idx]


def _slice_all(radargrams: Sequence[Radargram], spec: SliceSpec) -> tuple[list[SliceImage], int]:
    out, discarded = [], 0
    for r in radargrams:
        kept, dropped = make_slices(r, spec)
        out.extend(kept)
        discarded += dropped
    return out, discarded


def split_dataset(radargrams: Sequence[Radargram], spec: SliceSpec = SliceSpec(),
                  fraction: float = 0.8, seed: int = 42) -> DatasetSplit:
    """Split radargrams first, then slice each side with ``spec``."""
    train_r, test_r = split_radargrams(radargrams, fraction, seed)
    train, d1 = _slice_all(train_r, spec)
    test, d2 = _slice_all(test_r, spec)
    return DatasetSplit(
        train, test, seed, spec,
        train_ids=tuple(r.source_id for r in train_r),
        test_ids=tuple(r.source_id for r in test_r),
        discarded=d1 + d2,
    )


def normalize(split: DatasetSplit) -> DatasetSplit:
    """Standardize both sides with the train-set mean and std."""
    if not split.train:
        raise ValueError("cannot normalize with an empty train set")
    pixels = np.concatenate([s.data.ravel() for s in split.train])
    mean = float(pixels.mean())
    std = max(float(pixels.std()), STD_FLOOR)

    def apply(slices):
        return [replace(s, data=(s.data - mean) / std) for s in slices]

    return replace(split, train=apply(split.train), test=apply(split.test), mean=mean, std=std)


def class_counts(slices: Sequence[SliceImage]) -> list[int]:
    return np.bincount([int(s.label) for s in slices], minlength=N_CLASSES).tolist()
