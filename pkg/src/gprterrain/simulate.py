"""Forward model for synthetic GPR traces and radargrams.

A trace is the sum of three parts:

* a class-characteristic direct wave occupying rows ``0..DIRECT_ROWS-1``,
  perturbed per trace by jitter band-limited like the source pulse,
* the reflected wave, i.e. the layer reflectivity series convolved with a
  source wavelet,
* i.i.d. Gaussian noise.

Every column of a radargram draws from its own generator seeded with
``hash64(seed, column)`` so the output does not depend on generation order.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .physics import (
    Material,
    reflection_coefficient,
    twt_from_depth,
    velocity_consistent,
)

N_SAMPLES = 200
DIRECT_ROWS = 60
DEFAULT_DT = 0.25  # ns
DEFAULT_FC = 500.0  # MHz
DEFAULT_NOISE_STD = 1.0  # mV

_MASK64 = (1 << 64) - 1


class ConfigurationError(ValueError):
    """Raised for generator settings that cannot produce a valid signal."""


class TerrainClass(enum.IntEnum):
    ASPHALT = 0
    GRASS = 1
    SAND = 2
    SIDEWALK = 3

    @classmethod
    def parse(cls, name: str) -> "TerrainClass":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown terrain class {name!r}") from None


N_CLASSES = len(TerrainClass)


def hash64(seed: int, index: int) -> int:
    """Derive a 64-bit sub-seed from ``(seed, index)``.

    Uses the splitmix64 finalizer on ``seed * golden + index``, so the value is
    stable across platforms and Python versions.
    """
    z = ((seed & _MASK64) * 0x9E3779B97F4A7C15 + (index & _MASK64) + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class TraceTimebase:
    dt: float = DEFAULT_DT
    n_samples: int = N_SAMPLES

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if self.n_samples != N_SAMPLES:
            raise ConfigurationError(f"n_samples must be {N_SAMPLES}, got {self.n_samples}")


@dataclass(frozen=True)
class LayerSpec:
    material: Material
    thickness: float = math.inf  # inf marks a half-space

    def __post_init__(self):
        if not self.thickness > 0:
            raise ValueError(f"layer thickness must be > 0, got {self.thickness}")


@dataclass(frozen=True)
class LayeredEarthProfile:
    terrain: TerrainClass
    layers: tuple[LayerSpec, ...]
    direct_template: np.ndarray
    roughness: float = 0.0

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("profile needs at least one layer")
        for layer in layers[:-1]:
            if math.isinf(layer.thickness):
                raise ValueError("only the last layer may be a half-space")
        template = np.asarray(self.direct_template, dtype=np.float64)
        if template.shape != (DIRECT_ROWS,):
            raise ValueError(f"direct_template must have length {DIRECT_ROWS}, got {template.shape}")
        if self.roughness < 0:
            raise ValueError(f"roughness must be >= 0, got {self.roughness}")
        template.setflags(write=False)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "direct_template", template)

    def validate(self) -> bool:
        """True if every layer's velocity agrees with its kappa."""
        return all(velocity_consistent(layer.material) for layer in self.layers)


@dataclass
class Trace:
    samples: np.ndarray
    label: TerrainClass

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.shape != (N_SAMPLES,):
            raise ValueError(f"trace must have {N_SAMPLES} samples, got {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("trace contains non-finite samples")


@dataclass
class Radargram:
    """``data[:, j]`` is trace ``j``; ``labels[j]`` its terrain class code."""

    data: np.ndarray
    labels: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.data.ndim != 2 or self.data.shape[1] < 1:
            raise ValueError(f"radargram data must be 2-D with width >= 1, got {self.data.shape}")
        if self.labels.shape != (self.data.shape[1],):
            raise ValueError(
                f"labels length {self.labels.shape} does not match width {self.data.shape[1]}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("radargram contains non-finite samples")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def dominant_label(self) -> TerrainClass:
        counts = np.bincount(self.labels, minlength=N_CLASSES)
        return TerrainClass(int(np.argmax(counts)))


def ricker_wavelet(fc: float = DEFAULT_FC, tb: TraceTimebase = TraceTimebase()) -> np.ndarray:
    """Ricker wavelet with peak frequency ``fc`` (MHz), sampled at ``tb.dt`` (ns).

    The window has odd length with the peak (value 1) at its center and
    extends until the envelope has decayed below ~1e-7.
    """
    if not fc > 0:
        raise ConfigurationError(f"fc must be > 0, got {fc}")
    f = fc * 1e-3  # GHz, so f * t is dimensionless with t in ns
    samples_per_period = 1.0 / (f * tb.dt)
    if samples_per_period < 8:
        raise ConfigurationError(
            f"dt={tb.dt} ns gives {samples_per_period:.2f} samples per period at {fc} MHz; need >= 8"
        )
    half = int(math.ceil(4.0 / (math.pi * f * tb.dt)))
    t = np.arange(-half, half + 1) * tb.dt
    arg = (math.pi * f * t) ** 2
    return (1.0 - 2.0 * arg) * np.exp(-arg)


def reflectivity_series(profile: LayeredEarthProfile, tb: TraceTimebase = TraceTimebase()) -> np.ndarray:
    """Sparse reflectivity placed at each interface's two-way travel time.

    Each spike is scaled by the transmission loss ``1 - R**2`` of every
    shallower interface and damped by ``exp(-sum(loss_tangent_j * twt_j))``
    over the layers traversed. Interfaces beyond the window are dropped.
    """
    out = np.zeros(tb.n_samples)
    t = 0.0
    damping_exponent = 0.0
    transmission = 1.0
    layers = profile.layers
    for upper, lower in zip(layers[:-1], layers[1:]):
        layer_twt = twt_from_depth(upper.material.velocity, upper.thickness)
        t += layer_twt
        damping_exponent += upper.material.loss_tangent * layer_twt
        r = reflection_coefficient(upper.material.kappa, lower.material.kappa)
        idx = int(math.floor(t / tb.dt + 0.5))
        if idx < tb.n_samples:
            out[idx] += r * transmission * math.exp(-damping_exponent)
        transmission *= 1.0 - r * r
    return out


def _jitter_kernel() -> np.ndarray:
    k = ricker_wavelet(DEFAULT_FC, TraceTimebase())
    return k / np.sqrt(np.sum(k * k))  # unit output variance for white input


_JITTER_KERNEL = _jitter_kernel()


def _band_jitter(rng: np.random.Generator, n: int) -> np.ndarray:
    """Unit-variance noise band-limited like the source pulse."""
    white = rng.standard_normal(n + len(_JITTER_KERNEL) - 1)
    return np.convolve(white, _JITTER_KERNEL, mode="valid")


def synth_trace(
    profile: LayeredEarthProfile,
    tb: TraceTimebase = TraceTimebase(),
    wavelet: np.ndarray | None = None,
    noise_std: float = DEFAULT_NOISE_STD,
    seed: int = 0,
    gain: float = 1.0,
) -> Trace:
    """Synthesize one trace; bit-identical for identical arguments.

    ``wavelet`` defaults to the unit-peak Ricker wavelet at the default
    center frequency. ``gain`` scales the signal (not the noise).
    """
    if wavelet is None:
        wavelet = ricker_wavelet(DEFAULT_FC, tb)
    if noise_std < 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")
    rng = np.random.default_rng(seed)
    jitter = _band_jitter(rng, DIRECT_ROWS)
    noise = rng.standard_normal(tb.n_samples)

    samples = np.zeros(tb.n_samples)
    samples[:DIRECT_ROWS] = profile.direct_template + profile.roughness * jitter
    refl = reflectivity_series(profile, tb)
    if np.any(refl):
        samples += np.convolve(refl, wavelet, mode="same")[: tb.n_samples]
    if gain != 1.0:
        samples *= gain
    if noise_std > 0:
        samples += noise_std * noise
    return Trace(samples, profile.terrain)


def synth_radargram(
    scene: Sequence[tuple[LayeredEarthProfile, int]],
    tb: TraceTimebase = TraceTimebase(),
    wavelet: np.ndarray | None = None,
    noise_std: float = DEFAULT_NOISE_STD,
    seed: int = 0,
    source_id: str = "",
    gains: Sequence[float] | None = None,
) -> Radargram:
    """Stack traces for consecutive ``(profile, trace_count)`` segments.

    Column ``j`` is synthesized with the sub-seed ``hash64(seed, j)`` and,
    when ``gains`` is given, the signal gain ``gains[j]``.
    """
    if not scene or sum(count for _, count in scene) < 1:
        raise ValueError("scene must contain at least one trace")
    if wavelet is None:
        wavelet = ricker_wavelet(DEFAULT_FC, tb)
    columns = []
    labels = []
    j = 0
    for profile, count in scene:
        if count < 0:
            raise ValueError(f"trace_count must be >= 0, got {count}")
        for _ in range(count):
            g = 1.0 if gains is None else float(gains[j])
            columns.append(synth_trace(profile, tb, wavelet, noise_std, hash64(seed, j), g).samples)
            labels.append(int(profile.terrain))
            j += 1
    return Radargram(np.stack(columns, axis=1), np.array(labels, dtype=np.uint8), source_id)


@dataclass(frozen=True)
class _Pulse:
    delay: float  # ns
    amplitude: float  # mV
    fc: float = DEFAULT_FC


def direct_template(pulses: Sequence[_Pulse], dt: float = DEFAULT_DT) -> np.ndarray:
    """Sum of Ricker pulses on the direct-wave rows."""
    t = np.arange(DIRECT_ROWS) * dt
    out = np.zeros(DIRECT_ROWS)
    for p in pulses:
        arg = (math.pi * p.fc * 1e-3 * (t - p.delay)) ** 2
        out += p.amplitude * (1.0 - 2.0 * arg) * np.exp(-arg)
    return out


# Direct waves: air-wave arrival at a fixed delay, then a ground-wave arrival
# and surface ringing whose timing and strength depend on the surface.
# Sand and grass share a soft, moist-to-dry soil response and are kept close.
_TEMPLATE_PULSES = {
    TerrainClass.ASPHALT: (
        _Pulse(3.0, 30.0),
        _Pulse(6.0, -14.0),
        _Pulse(9.5, 6.0, 350.0),
    ),
    TerrainClass.GRASS: (
        _Pulse(3.0, 24.0),
        _Pulse(7.2, -18.0, 400.0),
        _Pulse(11.5, 7.0, 300.0),
    ),
    TerrainClass.SAND: (
        _Pulse(3.0, 24.5),
        _Pulse(7.35, -17.2, 400.0),
        _Pulse(11.3, 6.3, 300.0),
    ),
    TerrainClass.SIDEWALK: (
        _Pulse(3.0, 32.0),
        _Pulse(5.4, -10.0),
        _Pulse(8.0, 9.0, 450.0),
        _Pulse(12.0, -4.0, 350.0),
    ),
}

ASPHALT = Material.from_kappa("asphalt", 6.0, 0.02)
CONCRETE = Material.from_kappa("concrete", 8.0, 0.03)
GRAVEL = Material.from_kappa("gravel base", 5.0, 0.01)
TOPSOIL = Material.from_kappa("moist topsoil", 15.0, 0.05)
DRY_SAND = Material.from_kappa("dry sand", 4.0, 0.005)
WET_SAND = Material.from_kappa("wet sand", 20.0, 0.04)
CLAY = Material.from_kappa("clay", 25.0, 0.08)
SOIL = Material.from_kappa("native soil", 12.0, 0.03)

_LAYERS = {
    TerrainClass.ASPHALT: (LayerSpec(ASPHALT, 0.10), LayerSpec(GRAVEL, 1.0), LayerSpec(SOIL)),
    TerrainClass.GRASS: (LayerSpec(TOPSOIL, 0.6), LayerSpec(CLAY)),
    TerrainClass.SAND: (LayerSpec(DRY_SAND, 1.2), LayerSpec(WET_SAND)),
    TerrainClass.SIDEWALK: (LayerSpec(CONCRETE, 0.12), LayerSpec(GRAVEL, 0.9), LayerSpec(SOIL)),
}

DEFAULT_ROUGHNESS = 4.0  # mV RMS of the per-trace template jitter


def default_terrain_profiles(roughness: float = DEFAULT_ROUGHNESS) -> dict[TerrainClass, LayeredEarthProfile]:
    """Four fixed terrain columns, one per class.

    Direct templates are pairwise far apart relative to the default noise
    level, with sand and grass deliberately the closest pair.
    """
    return {
        c: LayeredEarthProfile(c, _LAYERS[c], direct_template(_TEMPLATE_PULSES[c]), roughness)
        for c in TerrainClass
    }


def template_distances(profiles: dict[TerrainClass, LayeredEarthProfile]) -> dict[tuple[TerrainClass, TerrainClass], float]:
    out = {}
    classes = sorted(profiles)
    for i, a in enumerate(classes):
        for b in classes[i + 1:]:
            out[(a, b)] = float(np.linalg.norm(profiles[a].direct_template - profiles[b].direct_template))
    return out


def perturb_profile(profile: LayeredEarthProfile, rng: np.random.Generator,
                    thickness_spread: float = 0.5, kappa_log_spread: float = 1.0,
                    gain_spread: float = 0.05) -> LayeredEarthProfile:
    """Site-to-site variation of one terrain column.

    Finite layer thicknesses are scaled by ``U(1 - t, 1 + t)``, subsurface
    kappa by ``exp(U(-k, k))`` (velocity rederived) and the direct template by
    ``U(1 - g, 1 + g)``. The top layer material is the terrain itself and is
    kept fixed.
    """
    layers = []
    for i, layer in enumerate(profile.layers):
        material = layer.material
        if i > 0:
            kappa = max(1.0, material.kappa * math.exp(rng.uniform(-kappa_log_spread, kappa_log_spread)))
            material = Material.from_kappa(material.name, kappa, material.loss_tangent)
        thickness = layer.thickness
        if not math.isinf(thickness):
            thickness *= rng.uniform(1 - thickness_spread, 1 + thickness_spread)
        layers.append(LayerSpec(material, thickness))
    gain = rng.uniform(1 - gain_spread, 1 + gain_spread)
    return replace(profile, layers=tuple(layers), direct_template=profile.direct_template * gain)


@dataclass(frozen=True)
class CorpusConfig:
    """Shape and difficulty of the default synthetic corpus.

    The defaults mirror the field corpus scale: 7752 traces in 64 radargrams,
    16 per class, a quarter of them crossing one terrain boundary.
    """

    n_radargrams: int = 64
    total_traces: int = 7752
    mixed_fraction: float = 0.25
    noise_std: float = DEFAULT_NOISE_STD
    roughness: float = DEFAULT_ROUGHNESS
    source_amplitude: float = 40.0  # mV, scales the unit-peak wavelet
    dt: float = DEFAULT_DT
    fc: float = DEFAULT_FC
    thickness_spread: float = 0.5
    kappa_log_spread: float = 1.0
    gain_spread: float = 0.05
    gain_drift: float = 0.3  # log-std of the slow along-track gain variation
    drift_length: float = 40.0  # its correlation length in traces
    seed: int = 0

    def __post_init__(self):
        if self.n_radargrams < 2 * N_CLASSES:
            raise ConfigurationError(f"need >= {2 * N_CLASSES} radargrams, got {self.n_radargrams}")
        if self.total_traces < self.n_radargrams:
            raise ConfigurationError("total_traces must be >= n_radargrams")


def gain_drift(width: int, std: float, length: float, seed: int) -> np.ndarray:
    """Along-track gain ``exp(std * n)`` with ``n`` unit-variance Gaussian-smoothed noise.

    Models antenna coupling that changes slowly as the platform moves.
    """
    if std == 0:
        return np.ones(width)
    if length <= 0:
        raise ConfigurationError(f"drift_length must be > 0, got {length}")
    half = int(math.ceil(3 * length))
    x = np.arange(-half, half + 1)
    kernel = np.exp(-0.5 * (x / length) ** 2)
    kernel /= np.sqrt((kernel ** 2).sum())
    white = np.random.default_rng(seed).standard_normal(width + len(x) - 1)
    return np.exp(std * np.convolve(white, kernel, mode="valid"))


def generate_corpus(cfg: CorpusConfig = CorpusConfig()) -> list[Radargram]:
    """Generate a labeled corpus; a pure function of ``cfg``.

    Radargrams cycle through the classes so each class gets an equal share.
    Mixed radargrams append a segment of a different class covering 30-45%
    of the width, so the dominant class is still the assigned one.
    """
    tb = TraceTimebase(cfg.dt)
    wavelet = cfg.source_amplitude * ricker_wavelet(cfg.fc, tb)
    profiles = default_terrain_profiles(cfg.roughness)
    base, extra = divmod(cfg.total_traces, cfg.n_radargrams)
    n_mixed = int(round(cfg.mixed_fraction * cfg.n_radargrams))
    corpus = []
    for k in range(cfg.n_radargrams):
        rng = np.random.default_rng(hash64(cfg.seed, 1_000_003 + k))
        width = base + (1 if k < extra else 0)
        cls = TerrainClass(k % N_CLASSES)
        spreads = (cfg.thickness_spread, cfg.kappa_log_spread, cfg.gain_spread)
        main = perturb_profile(profiles[cls], rng, *spreads)
        # spread mixed radargrams evenly over the index range
        mixed = n_mixed > 0 and (k * n_mixed) // cfg.n_radargrams != ((k + 1) * n_mixed) // cfg.n_radargrams
        if mixed:
            other = TerrainClass((cls + 1 + int(rng.integers(N_CLASSES - 1))) % N_CLASSES)
            second = int(round(width * rng.uniform(0.30, 0.45)))
            scene = [(main, width - second), (perturb_profile(profiles[other], rng, *spreads), second)]
        else:
            scene = [(main, width)]
        gains = gain_drift(width, cfg.gain_drift, cfg.drift_length, hash64(cfg.seed, 3_000_017 + k))
        r = synth_radargram(scene, tb, wavelet, cfg.noise_std, hash64(cfg.seed, k),
                            source_id=f"synthetic-{k:03d}-{cls.name.lower()}", gains=gains)
        # quantize to the on-disk float32 precision so saved and in-memory corpora agree
        r.data = r.data.astype(np.float32).astype(np.float64)
        corpus.append(r)
    return corpus


def synth_terrain_window(terrain: TerrainClass, width: int, cfg: CorpusConfig = CorpusConfig(),
                         seed: int = 0, source_id: str = "") -> Radargram:
    """One single-class radargram drawn with the corpus physics of ``cfg``.

    The site perturbation and the column noise both derive from ``seed``.
    """
    tb = TraceTimebase(cfg.dt)
    wavelet = cfg.source_amplitude * ricker_wavelet(cfg.fc, tb)
    profile = default_terrain_profiles(cfg.roughness)[TerrainClass(terrain)]
    rng = np.random.default_rng(hash64(seed, 1_000_003))
    site = perturb_profile(profile, rng, cfg.thickness_spread, cfg.kappa_log_spread, cfg.gain_spread)
    gains = gain_drift(width, cfg.gain_drift, cfg.drift_length, hash64(seed, 3_000_017))
    r = synth_radargram([(site, width)], tb, wavelet, cfg.noise_std, seed, source_id=source_id, gains=gains)
    r.data = r.data.astype(np.float32).astype(np.float64)
    return r
