"""Bayesian semantic terrain grid fusing a simulated camera with GPR classifications.

Each cell holds Dirichlet concentrations over five map classes. An
observation adds its class-probability vector to the cell (a soft count),
so the posterior is order independent and equals the prior plus the summed
observations.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataio import write_ppm_image
from .models import Model
from .models.networks import Classifier
from .preprocess import Band, SliceSpec, make_slices
from .simulate import ConfigurationError, CorpusConfig, TerrainClass, hash64, synth_terrain_window


class MapClass(enum.IntEnum):
    ASPHALT = 0
    GRASS = 1
    SAND = 2
    SIDEWALK = 3
    OTHER = 4


N_MAP_CLASSES = len(MapClass)
NO_DATA = -1
PRIOR_ALPHA = 0.1
SCENE_CHARS = {"A": MapClass.ASPHALT, "G": MapClass.GRASS, "S": MapClass.SAND,
               "W": MapClass.SIDEWALK, "O": MapClass.OTHER}

COLORS = {
    MapClass.ASPHALT: (255, 0, 0),
    MapClass.GRASS: (0, 255, 0),
    MapClass.SAND: (255, 255, 0),
    MapClass.SIDEWALK: (0, 0, 255),
    MapClass.OTHER: (128, 128, 128),
    NO_DATA: (0, 0, 0),
}

CAMERA_DEPTH = 8
CAMERA_HALF_WIDTH = 2
GPR_WINDOWS = 16  # classified windows per pose; the radar pings far faster than the camera frames


class SceneError(ValueError):
    pass


@dataclass
class CellPosterior:
    alpha: np.ndarray
    observed: bool

    def probabilities(self) -> np.ndarray:
        return self.alpha / self.alpha.sum()

    def map_class(self) -> int:
        return int(np.argmax(self.alpha)) if self.observed else NO_DATA


@dataclass
class SemanticGrid:
    width: int
    height: int
    resolution: float = 0.5  # meters per cell
    origin: tuple[float, float] = (0.0, 0.0)
    prior: float = PRIOR_ALPHA
    alpha: np.ndarray = field(init=False, repr=False)
    observed: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be > 0, got {self.resolution}")
        if not self.prior > 0:
            raise ValueError(f"prior concentration must be > 0, got {self.prior}")
        self.alpha = np.full((self.height, self.width, N_MAP_CLASSES), float(self.prior))
        self.observed = np.zeros((self.height, self.width), dtype=bool)

    @classmethod
    def like(cls, scene: "GroundTruthScene", **kwargs) -> "SemanticGrid":
        return cls(scene.width, scene.height, **kwargs)

    def copy(self) -> "SemanticGrid":
        g = SemanticGrid(self.width, self.height, self.resolution, self.origin, self.prior)
        g.alpha[...] = self.alpha
        g.observed[...] = self.observed
        return g

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def cell(self, x: int, y: int) -> CellPosterior:
        return CellPosterior(self.alpha[y, x].copy(), bool(self.observed[y, x]))


def as_distribution(p: Sequence[float]) -> np.ndarray:
    """Validate a class distribution; 4-class terrain vectors get a zero Other entry."""
    d = np.asarray(p, dtype=np.float64).ravel()
    if len(d) == N_MAP_CLASSES - 1:
        d = np.append(d, 0.0)
    if len(d) != N_MAP_CLASSES:
        raise ValueError(f"distribution needs {N_MAP_CLASSES} entries, got {len(d)}")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ValueError("distribution entries must be finite and >= 0")
    if abs(d.sum() - 1.0) > 1e-9:
        raise ValueError(f"distribution must sum to 1 within 1e-9, sums to {d.sum()!r}")
    return d


def one_hot(c: int) -> np.ndarray:
    d = np.zeros(N_MAP_CLASSES)
    d[int(c)] = 1.0
    return d


def observe(grid: SemanticGrid, cells: Iterable[tuple[int, int]], distribution) -> int:
    """Add ``distribution`` to the concentrations of each in-bounds ``(x, y)`` cell.

    The grid is updated in place. Returns the number of skipped out-of-bounds cells.
    """
    d = as_distribution(distribution)
    skipped = 0
    for x, y in cells:
        if not grid.contains(x, y):
            skipped += 1
            continue
        grid.alpha[y, x] += d
        grid.observed[y, x] = True
    return skipped


def map_estimate(grid: SemanticGrid) -> np.ndarray:
    """Per-cell MAP class (ties go to the lowest class index); NO_DATA where unobserved."""
    est = np.argmax(grid.alpha, axis=2)
    return np.where(grid.observed, est, NO_DATA)


def render_rgb(grid: SemanticGrid) -> np.ndarray:
    est = map_estimate(grid)
    img = np.zeros(est.shape + (3,), dtype=np.uint8)
    for cls, rgb in COLORS.items():
        img[est == int(cls)] = rgb
    return img


def render_ppm(grid: SemanticGrid, path) -> Path:
    write_ppm_image(render_rgb(grid), path)
    return Path(path)


def map_accuracy(grid: SemanticGrid, scene: "GroundTruthScene",
                 cells: Iterable[tuple[int, int]] | None = None) -> float | None:
    """Fraction of observed cells whose MAP class equals the ground truth.

    With ``cells`` every listed cell counts, and an unobserved one counts as
    wrong. Returns None when there is nothing to score.
    """
    if (grid.height, grid.width) != scene.classes.shape:
        raise SceneError(f"grid {grid.width}x{grid.height} does not match scene {scene.width}x{scene.height}")
    est = map_estimate(grid)
    if cells is None:
        mask = grid.observed
        if not mask.any():
            return None
        return float(np.mean(est[mask] == scene.classes[mask]))
    cells = list(cells)
    if not cells:
        return None
    return float(np.mean([est[y, x] == scene.classes[y, x] for x, y in cells]))


# --- sensors and scenes -----------------------------------------------------

@dataclass(frozen=True)
class Pose:
    x: int
    y: int
    heading: float  # degrees, 0 = +x, 90 = +y


@dataclass
class SensorModel:
    confusion: np.ndarray  # P(predicted | true), rows true
    footprint: tuple[tuple[int, int], ...]  # (forward, lateral) offsets from the pose

    def __post_init__(self):
        c = np.asarray(self.confusion, dtype=np.float64)
        if c.shape != (N_MAP_CLASSES, N_MAP_CLASSES):
            raise ValueError(f"confusion must be {N_MAP_CLASSES}x{N_MAP_CLASSES}, got {c.shape}")
        if np.any(c < 0) or np.any(np.abs(c.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("confusion rows must be non-negative and sum to 1 within 1e-9")
        self.confusion = c

    def cells(self, pose: Pose) -> list[tuple[int, int]]:
        """Footprint cells in grid coordinates, deduplicated, in footprint order."""
        th = math.radians(pose.heading)
        cos, sin = math.cos(th), math.sin(th)
        out, seen = [], set()
        for f, l in self.footprint:
            cell = (pose.x + int(round(f * cos - l * sin)), pose.y + int(round(f * sin + l * cos)))
            if cell not in seen:
                seen.add(cell)
                out.append(cell)
        return out


def camera_wedge(depth: int = CAMERA_DEPTH, half_width: int = CAMERA_HALF_WIDTH) -> tuple[tuple[int, int], ...]:
    """Forward wedge: one cell wide at depth 1, widening by one cell per side every 2 cells."""
    return tuple((f, l) for f in range(1, depth + 1)
                 for l in range(-min(half_width, f // 2), min(half_width, f // 2) + 1))


def camera_confusion(sidewalk_as_asphalt: float = 0.0, error: float = 0.0) -> np.ndarray:
    """Diagonal ``1 - error`` spread evenly off-diagonal; the sidewalk row puts
    ``sidewalk_as_asphalt`` on asphalt and the rest on sidewalk."""
    if not 0.0 <= error <= 1.0 or not 0.0 <= sidewalk_as_asphalt <= 1.0:
        raise ValueError("confusion rates must be in [0, 1]")
    c = np.full((N_MAP_CLASSES, N_MAP_CLASSES), error / (N_MAP_CLASSES - 1))
    np.fill_diagonal(c, 1.0 - error)
    c[MapClass.SIDEWALK] = 0.0
    c[MapClass.SIDEWALK, MapClass.ASPHALT] = sidewalk_as_asphalt
    c[MapClass.SIDEWALK, MapClass.SIDEWALK] = 1.0 - sidewalk_as_asphalt
    return c


def camera_model(sidewalk_as_asphalt: float = 0.0, error: float = 0.0) -> SensorModel:
    return SensorModel(camera_confusion(sidewalk_as_asphalt, error), camera_wedge())


@dataclass
class GroundTruthScene:
    classes: np.ndarray  # (height, width) MapClass codes
    trajectory: list[Pose]

    def __post_init__(self):
        self.classes = np.asarray(self.classes, dtype=np.int64)
        if self.classes.ndim != 2 or self.classes.size == 0:
            raise SceneError("scene grid must be a non-empty 2D array")
        if np.any((self.classes < 0) | (self.classes >= N_MAP_CLASSES)):
            raise SceneError("scene grid holds an unknown class code")
        for i, p in enumerate(self.trajectory):
            if not (0 <= p.x < self.width and 0 <= p.y < self.height):
                raise SceneError(f"pose {i} at ({p.x}, {p.y}) is outside the {self.width}x{self.height} scene")

    @property
    def width(self) -> int:
        return self.classes.shape[1]

    @property
    def height(self) -> int:
        return self.classes.shape[0]

    def track_cells(self) -> list[tuple[int, int]]:
        seen, out = set(), []
        for p in self.trajectory:
            if (p.x, p.y) not in seen:
                seen.add((p.x, p.y))
                out.append((p.x, p.y))
        return out


def parse_scene(text: str) -> GroundTruthScene:
    """Parse a scene file.

    Layout::

        # comments and blank lines are ignored
        [grid]
        AAAAAAAA
        WWWWWWWW
        [trajectory]
        0,1,0
        1,1,0

    Grid characters: A asphalt, G grass, S sand, W sidewalk, O other. The
    first grid line is row y=0. Trajectory lines are ``x,y,heading_degrees``.
    """
    section = None
    rows, poses = [], []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.lower() in ("[grid]", "[trajectory]"):
            section = line.lower()[1:-1]
            continue
        if section == "grid":
            try:
                rows.append([int(SCENE_CHARS[ch]) for ch in line.upper()])
            except KeyError as exc:
                raise SceneError(f"line {n}: unknown terrain character {exc.args[0]!r}") from None
        elif section == "trajectory":
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise SceneError(f"line {n}: expected x,y,heading, got {line!r}")
            try:
                poses.append(Pose(int(parts[0]), int(parts[1]), float(parts[2])))
            except ValueError:
                raise SceneError(f"line {n}: bad pose {line!r}") from None
        else:
            raise SceneError(f"line {n}: content before a [grid] or [trajectory] header")
    if not rows:
        raise SceneError("scene has no grid rows")
    if len({len(r) for r in rows}) != 1:
        raise SceneError("scene grid rows have different lengths")
    return GroundTruthScene(np.array(rows), poses)


def format_scene(scene: GroundTruthScene) -> str:
    chars = {int(v): k for k, v in SCENE_CHARS.items()}
    lines = ["[grid]"] + ["".join(chars[int(v)] for v in row) for row in scene.classes]
    lines.append("[trajectory]")
    lines += [f"{p.x},{p.y},{p.heading:g}" for p in scene.trajectory]
    return "\n".join(lines) + "\n"


def read_scene(path) -> GroundTruthScene:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read scene file {path}: {exc.strerror or exc}") from exc
    try:
        return parse_scene(text)
    except SceneError as exc:
        raise SceneError(f"{path}: {exc}") from None


def sidewalk_scene(width: int = 40, height: int = 21) -> GroundTruthScene:
    """A road above a 3-cell sidewalk strip above grass, traversed east along the strip."""
    classes = np.full((height, width), int(MapClass.GRASS))
    mid = height // 2
    classes[:mid - 1] = MapClass.ASPHALT
    classes[mid - 1:mid + 2] = MapClass.SIDEWALK
    classes[:2, width // 2:width // 2 + 4] = MapClass.OTHER  # a parked vehicle
    return GroundTruthScene(classes, [Pose(x, mid, 0.0) for x in range(width)])


# --- traversal --------------------------------------------------------------

@dataclass(frozen=True)
class TraverseEvent:
    step: int
    sensor: str  # "camera" or "gpr"
    cells: int  # in-bounds cells updated
    skipped: int
    label: int  # camera label drawn, or GPR argmax over the windows' mean


@dataclass
class TraverseResult:
    grid: SemanticGrid
    events: list[TraverseEvent]


def window_spec(model: Model) -> SliceSpec:
    """Slicing that produces inputs of the classifier's shape."""
    rows, cols = model.config.rows, model.config.cols
    band = Band.DIRECT if rows == Band.DIRECT.height else Band.FULL
    return SliceSpec.for_width(cols, band)


def gpr_distributions(model: Classifier, terrain: TerrainClass, n_windows: int,
                      corpus_cfg: CorpusConfig, seed: int) -> np.ndarray:
    """Softmax outputs for ``n_windows`` consecutive windows over one cell."""
    spec = window_spec(model)
    width = spec.w_resize + (n_windows - 1) * spec.s
    r = synth_terrain_window(terrain, width, corpus_cfg, seed)
    slices, _ = make_slices(r, spec)
    x = np.stack([s.data for s in slices[:n_windows]])[:, None]
    return model.predict_proba(model.normalize_input(x))


def simulate_traverse(scene: GroundTruthScene, camera: SensorModel, gpr_classifier: Classifier | None,
                      grid: SemanticGrid | None = None, seed: int = 0, gpr_windows: int = GPR_WINDOWS,
                      corpus_cfg: CorpusConfig = CorpusConfig()) -> TraverseResult:
    """Drive the trajectory, fusing camera hard labels and GPR soft labels.

    At each pose the camera labels every wedge cell with a class drawn from
    its confusion row, then the GPR classifies ``gpr_windows`` windows
    synthesized for the cell under the robot and adds each softmax vector.
    Cells of class Other get no GPR update. The camera and GPR draw from
    separate streams, so running with ``gpr_classifier=None`` gives the
    camera-only map with the identical camera labels.
    """
    if gpr_classifier is not None and not getattr(gpr_classifier, "trained", False):
        raise ConfigurationError("the GPR classifier is untrained; train or load a checkpoint first")
    if gpr_classifier is not None and not isinstance(gpr_classifier, Classifier):
        raise ConfigurationError("the GPR model must be a supervised classifier (cnn1d or cnn2d)")
    if gpr_windows < 1:
        raise ConfigurationError(f"gpr_windows must be >= 1, got {gpr_windows}")
    grid = grid if grid is not None else SemanticGrid.like(scene)
    if (grid.height, grid.width) != scene.classes.shape:
        raise SceneError(f"grid {grid.width}x{grid.height} does not match scene {scene.width}x{scene.height}")
    cam_rng = np.random.default_rng(hash64(seed, 1))
    events = []
    for step, pose in enumerate(scene.trajectory):
        for x, y in camera.cells(pose):
            if not grid.contains(x, y):
                events.append(TraverseEvent(step, "camera", 0, 1, NO_DATA))
                continue
            label = int(cam_rng.choice(N_MAP_CLASSES, p=camera.confusion[scene.classes[y, x]]))
            observe(grid, [(x, y)], one_hot(label))
            events.append(TraverseEvent(step, "camera", 1, 0, label))
        truth = int(scene.classes[pose.y, pose.x])
        if gpr_classifier is None or truth == MapClass.OTHER:
            continue
        probs = gpr_distributions(gpr_classifier, TerrainClass(truth), gpr_windows, corpus_cfg,
                                  hash64(seed, 2_000_000 + step))
        for p in probs:
            observe(grid, [(pose.x, pose.y)], p / p.sum())
        events.append(TraverseEvent(step, "gpr", 1, 0, int(np.argmax(probs.mean(axis=0)))))
    return TraverseResult(grid, events)


@dataclass
class FusionSummary:
    camera_overall: float | None
    fused_overall: float | None
    camera_sidewalk_track: float | None
    fused_sidewalk_track: float | None
    camera_grid: SemanticGrid
    fused_grid: SemanticGrid

    def rows(self) -> list[list[str]]:
        def f(v):
            return "" if v is None else f"{v:.6f}"
        return [["camera", f(self.camera_overall), f(self.camera_sidewalk_track)],
                ["fused", f(self.fused_overall), f(self.fused_sidewalk_track)]]


def compare_fusion(scene: GroundTruthScene, camera: SensorModel, gpr_classifier: Classifier,
                   seed: int = 0, **kwargs) -> FusionSummary:
    """Camera-only and fused traversals of ``scene`` with identical camera draws."""
    cam = simulate_traverse(scene, camera, None, seed=seed, **kwargs).grid
    fused = simulate_traverse(scene, camera, gpr_classifier, seed=seed, **kwargs).grid
    track = [(x, y) for x, y in scene.track_cells() if scene.classes[y, x] == MapClass.SIDEWALK]
    return FusionSummary(map_accuracy(cam, scene), map_accuracy(fused, scene),
                         map_accuracy(cam, scene, track), map_accuracy(fused, scene, track), cam, fused)


def truth_grid(scene: GroundTruthScene) -> SemanticGrid:
    """A grid whose MAP equals the scene everywhere, for rendering."""
    g = SemanticGrid.like(scene)
    for y in range(scene.height):
        for x in range(scene.width):
            observe(g, [(x, y)], one_hot(scene.classes[y, x]))
    return g
