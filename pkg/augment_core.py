#!/usr/bin/env python3
"""
Augmentation Core Module

This module contains the augmentation business logic, separated from the
command-line front end: configuration loading and validation, deterministic
random streams, the replica-to-frame plan and the batch engine that renders,
extracts and writes every augmented line.
"""

import copy
import hashlib
import json
import logging
import shutil
import sys
import threading
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path, PurePosixPath
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from dataset_manifest import (
    DIFFICULTIES, ORIGIN_AUGMENTED, ORIGIN_ORIGINAL, AugmentedManifestEntry, TextLineSample,
    class_counts, read_image, write_manifest, write_png,
)
from line_extract import REASON_BEHIND_CAMERA, REASON_DEGENERATE, extract_line
from scene_geometry import (
    BehindCameraError, CameraSpec, DegeneratePoseError, InvalidSpecError, SceneInstance,
    TrajectorySpec, sample_scene, scene_frame_view,
)
from scene_render import AugmentedFrame, FrameProvenance, light_from_dict, light_to_dict, render_frame

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.tsv'
REPLICA_DIR = 'aug'
SCENE_STREAM = 'scene'


class ConfigError(ValueError):
    """Configuration file is unreadable or has invalid values."""

    def __init__(self, errors: Union[str, List[str]]):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("; ".join(self.errors))


class OutputCollisionError(ValueError):
    """Two outputs of one run would be written to the same path."""


def config_value(data: Dict[str, Any], dotted: str):
    node = data
    for part in dotted.split('.'):
        if not isinstance(node, dict) or part not in node:
            return None
        node = node[part]
    return node


@dataclass(frozen=True)
class AugmentConfig:
    """Immutable augmentation configuration built from one JSON document."""

    cameras: Tuple[CameraSpec, ...]
    lights: tuple
    ambient: float
    trajectory: TrajectorySpec
    render_width: int
    render_height: int
    pixel_scale: float
    enlargement_factor: int
    seed: int
    workers: int = 1
    max_attempts: int = 8

    DEFAULT_CONFIG = {
        'cameras': [
            {'name': 'smartphone-wide', 'sensor_width': 6.17, 'sensor_height': 4.55, 'focal_length': 4.25,
             'position': [0.0, 0.0, -1.4], 'look_at': [0.0, 0.0, 0.0]},
            {'name': 'smartphone-tele', 'sensor_width': 6.17, 'sensor_height': 4.55, 'focal_length': 6.9,
             'position': [0.0, 0.0, -2.1], 'look_at': [0.0, 0.0, 0.0]},
            {'name': 'aps-c', 'sensor_width': 23.5, 'sensor_height': 15.6, 'focal_length': 35.0,
             'position': [0.0, 0.0, -2.8], 'look_at': [0.0, 0.0, 0.0]},
            {'name': 'full-frame', 'sensor_width': 36.0, 'sensor_height': 24.0, 'focal_length': 50.0,
             'position': [0.0, 0.0, -2.6], 'look_at': [0.0, 0.0, 0.0]},
        ],
        'lights': [
            {'type': 'sun', 'direction': [0.0, 0.3, 1.0], 'irradiance': 0.9},
        ],
        'ambient': 0.1,
        'trajectory': {
            'center': [0.0, 0.0, 0.0],
            'radius_min': 0.2,
            'radius_max': 0.5,
            'rotation_min': -45.0,
            'rotation_max': 45.0,
            'frames_per_scene': 10,
            'tilt': 20.0,
        },
        'render': {
            'width': 1920,
            'height': 1080,
            'pixel_scale': 0.0005,
        },
        'seed': 0,
        'enlargement_factor': 2,
        'workers': 1,
        'max_attempts': 8,
    }

    # Scalar keys (dotted for nested sections) and their closed ranges
    VALIDATION_RULES = {
        'ambient': (0.0, 1.0),
        'seed': (0, 2 ** 64 - 1),
        'enlargement_factor': (1, 1000),
        'workers': (1, 512),
        'max_attempts': (1, 1000),
        'render.width': (1, 16384),
        'render.height': (1, 16384),
        'render.pixel_scale': (1e-7, 1.0),
        'trajectory.radius_min': (1e-6, 10000.0),
        'trajectory.radius_max': (1e-6, 10000.0),
        'trajectory.rotation_min': (-180.0, 180.0),
        'trajectory.rotation_max': (-180.0, 180.0),
        'trajectory.frames_per_scene': (1, 10000),
        'trajectory.tilt': (-89.0, 89.0),
    }

    SECTIONS = ('render', 'trajectory')

    @classmethod
    def _validate_value(cls, key: str, value: Any) -> Any:
        """Validate a single scalar value against its rule.

        Raises:
            ValueError: If the type or range is wrong
        """
        min_val, max_val = cls.VALIDATION_RULES[key]
        default = config_value(cls.DEFAULT_CONFIG, key)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"'{key}' must be a number, got {type(value).__name__}")
        if isinstance(default, int) and not isinstance(value, int):
            raise ValueError(f"'{key}' must be an integer, got {value!r}")
        if not (min_val <= value <= max_val):
            raise ValueError(f"'{key}' must be between {min_val} and {max_val}, got {value}")
        return value

    @classmethod
    def merge_with_defaults(cls, file_config: Dict[str, Any]) -> Tuple[Dict[str, Any], List[str]]:
        """Overlay a parsed document on the defaults.

        Returns:
            Tuple of (merged document, warnings about unknown keys)
        """
        warnings = []
        merged = copy.deepcopy(cls.DEFAULT_CONFIG)
        for key, value in file_config.items():
            if key not in cls.DEFAULT_CONFIG:
                warnings.append(f"Unknown configuration key: '{key}'")
                continue
            if key in cls.SECTIONS and isinstance(value, dict):
                for sub_key, sub_value in value.items():
                    if sub_key not in cls.DEFAULT_CONFIG[key]:
                        warnings.append(f"Unknown configuration key: '{key}.{sub_key}'")
                        continue
                    merged[key][sub_key] = sub_value
            else:
                merged[key] = value
        return merged, warnings

    @classmethod
    def from_dict(cls, file_config: Dict[str, Any], warnings: Optional[List[str]] = None) -> 'AugmentConfig':
        """Validate a JSON-shaped document and build the configuration.

        Unknown keys are reported through ``warnings`` (and the log) and
        ignored; every invalid value is collected before raising.

        Raises:
            ConfigError: Listing every problem found
        """
        if not isinstance(file_config, dict):
            raise ConfigError(f"configuration must be a JSON object, got {type(file_config).__name__}")
        merged, unknown = cls.merge_with_defaults(file_config)
        for message in unknown:
            logger.warning(message)
        if warnings is not None:
            warnings.extend(unknown)

        errors = []
        for section in cls.SECTIONS:
            if not isinstance(merged[section], dict):
                errors.append(f"'{section}' must be an object")
        if errors:
            raise ConfigError(errors)

        for key in cls.VALIDATION_RULES:
            try:
                cls._validate_value(key, config_value(merged, key))
            except ValueError as e:
                errors.append(f"Invalid value for '{key}': {e}")

        cameras = []
        if not isinstance(merged['cameras'], list) or not merged['cameras']:
            errors.append("'cameras' must be a non-empty list")
        else:
            names = set()
            for i, cam in enumerate(merged['cameras']):
                try:
                    if not isinstance(cam, dict):
                        raise InvalidSpecError("must be an object")
                    cameras.append(CameraSpec(**cam))
                    if cam['name'] in names:
                        raise InvalidSpecError(f"duplicate camera name '{cam['name']}'")
                    names.add(cam['name'])
                except (InvalidSpecError, TypeError) as e:
                    errors.append(f"Invalid camera #{i}: {e}")

        lights = []
        if not isinstance(merged['lights'], list):
            errors.append("'lights' must be a list")
        else:
            for i, light in enumerate(merged['lights']):
                try:
                    if not isinstance(light, dict):
                        raise InvalidSpecError("must be an object")
                    lights.append(light_from_dict(light))
                except (InvalidSpecError, TypeError) as e:
                    errors.append(f"Invalid light #{i}: {e}")

        trajectory = None
        if not any(e.startswith("Invalid value for 'trajectory.") for e in errors):
            try:
                trajectory = TrajectorySpec(**merged['trajectory'])
            except (InvalidSpecError, TypeError) as e:
                errors.append(f"Invalid trajectory: {e}")

        if errors:
            raise ConfigError(errors)

        render = merged['render']
        return cls(
            cameras=tuple(cameras),
            lights=tuple(lights),
            ambient=float(merged['ambient']),
            trajectory=trajectory,
            render_width=render['width'],
            render_height=render['height'],
            pixel_scale=float(render['pixel_scale']),
            enlargement_factor=merged['enlargement_factor'],
            seed=merged['seed'],
            workers=merged['workers'],
            max_attempts=merged['max_attempts'],
        )

    @classmethod
    def from_file(cls, path: Union[str, Path], warnings: Optional[List[str]] = None) -> 'AugmentConfig':
        """Load and validate a configuration file.

        Raises:
            ConfigError: Missing file, invalid JSON (with line/column) or invalid values
        """
        path = Path(path)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                file_config = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
        except OSError as e:
            raise ConfigError(f"cannot read configuration file {path}: {e}") from e
        return cls.from_dict(file_config, warnings)

    @classmethod
    def default(cls) -> 'AugmentConfig':
        return cls.from_dict({})

    @classmethod
    def create_sample_config(cls, path: Union[str, Path]) -> bool:
        """Write the default configuration. Returns True if created."""
        path = Path(path)
        if path.exists():
            return False
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(cls.DEFAULT_CONFIG, f, indent=2)
            f.write('\n')
        return True

    def with_overrides(self, enlargement_factor: Optional[int] = None, seed: Optional[int] = None,
                       workers: Optional[int] = None) -> 'AugmentConfig':
        """Apply command-line overrides, validated like file values."""
        changes = {}
        errors = []
        for key, value in (('enlargement_factor', enlargement_factor), ('seed', seed), ('workers', workers)):
            if value is None:
                continue
            try:
                changes[key] = self._validate_value(key, value)
            except ValueError as e:
                errors.append(str(e))
        if errors:
            raise ConfigError(errors)
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        traj = self.trajectory
        return {
            'cameras': [
                {'name': c.name, 'sensor_width': c.sensor_width, 'sensor_height': c.sensor_height,
                 'focal_length': c.focal_length, 'position': list(c.position), 'look_at': list(c.look_at)}
                for c in self.cameras
            ],
            'lights': [light_to_dict(light) for light in self.lights],
            'ambient': self.ambient,
            'trajectory': {
                'center': list(traj.center), 'radius_min': traj.radius_min, 'radius_max': traj.radius_max,
                'rotation_min': traj.rotation_min, 'rotation_max': traj.rotation_max,
                'frames_per_scene': traj.frames_per_scene, 'tilt': traj.tilt,
            },
            'render': {'width': self.render_width, 'height': self.render_height, 'pixel_scale': self.pixel_scale},
            'seed': self.seed,
            'enlargement_factor': self.enlargement_factor,
            'workers': self.workers,
            'max_attempts': self.max_attempts,
        }


def derive_rng(master_seed: int, sample_id: str, replica: int, stream: str = SCENE_STREAM) -> np.random.Generator:
    """Counter-based stream keyed by a hash of (seed, sample id, replica, stream).

    Equal keys give identical streams; distinct keys give independent Philox
    streams regardless of the order in which they are created.
    """
    payload = '\x1f'.join([str(int(master_seed)), sample_id, str(int(replica)), stream]).encode('utf-8')
    digest = hashlib.blake2b(payload, digest_size=16).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest, 'little')))


@dataclass(frozen=True)
class ReplicaSlot:
    replica: int
    scene_slot: int
    frame: int


def replica_plan(enlargement_factor: int, frames_per_scene: int) -> List[ReplicaSlot]:
    """Map replicas 1..factor-1 to (scene, frame).

    While the replicas fit into one scene they are spread evenly over its
    trajectory; beyond that every scene is used frame by frame.
    """
    count = enlargement_factor - 1
    if count <= 0:
        return []
    if count <= frames_per_scene:
        return [ReplicaSlot(r, 0, (r - 1) * frames_per_scene // count) for r in range(1, count + 1)]
    return [ReplicaSlot(r, (r - 1) // frames_per_scene, (r - 1) % frames_per_scene)
            for r in range(1, count + 1)]


def attempt_stream(slot: ReplicaSlot, attempt: int, max_attempts: int, scene_slots: int) -> int:
    """Stream index of one render attempt; retries never reuse a scene stream."""
    if attempt == 0:
        return slot.scene_slot
    return slot.replica * max_attempts + attempt + scene_slots


def scene_for_attempt(config: AugmentConfig, sample_id: str, slot: ReplicaSlot, attempt: int = 0,
                      scene_slots: int = 1) -> SceneInstance:
    stream = attempt_stream(slot, attempt, config.max_attempts, scene_slots)
    return sample_scene(config, derive_rng(config.seed, sample_id, stream))


def render_replica_frame(image: np.ndarray, config: AugmentConfig, sample_id: str, slot: ReplicaSlot,
                         attempt: int = 0, scene_slots: int = 1) -> AugmentedFrame:
    """Render the frame a replica selects.

    Raises:
        BehindCameraError, DegeneratePoseError: The plane cannot be imaged
    """
    height, width = image.shape[:2]
    scene = scene_for_attempt(config, sample_id, slot, attempt, scene_slots)
    view, h = scene_frame_view(scene, slot.frame, (width, height))
    provenance = FrameProvenance(
        sample_id=sample_id,
        replica=slot.replica,
        frame=slot.frame,
        camera=scene.camera.name,
        radius=scene.radius,
        psi=scene.psi,
        seed=config.seed,
    )
    return render_frame(image, view, h, provenance)


@dataclass
class ReplicaTask:
    sample: TextLineSample
    slot: ReplicaSlot
    config: AugmentConfig
    out_dir: str
    scene_slots: int
    replica_dir: str = REPLICA_DIR


@dataclass
class ReplicaOutcome:
    sample_id: str
    replica: int
    entry: AugmentedManifestEntry
    rendered_frames: int = 0
    rejections: List[Tuple[int, str, str]] = field(default_factory=list)
    passthrough: bool = False


def _safe_parts(sample_id: str) -> List[str]:
    return [p if p != '..' else '__' for p in PurePosixPath(sample_id).parts if p not in ('/', '.')]


def mirrored_path(sample_id: str, replica: int = 0, suffix: Optional[str] = None,
                  replica_dir: str = REPLICA_DIR) -> str:
    """Output-relative POSIX path for a sample (replica 0) or one of its replicas.

    Originals keep their id; replica r of ``a/b.png`` goes to
    ``<replica_dir>/a/b.png/r<r>.png``. Absolute prefixes and parent
    references are neutralized so nothing is written outside the output
    directory.
    """
    parts = _safe_parts(sample_id)
    if replica == 0:
        return str(PurePosixPath(*parts))
    return str(PurePosixPath(replica_dir, *parts, f"r{replica}{suffix or '.png'}"))


def choose_replica_dir(sample_ids: Sequence[str]) -> str:
    """First of aug, aug1, aug2, ... that no input id starts with.

    Re-augmenting an output tree then never writes a replica onto one of
    the previous run's files.
    """
    taken = {parts[0] for parts in map(_safe_parts, sample_ids) if parts}
    name, k = REPLICA_DIR, 0
    while name in taken:
        k += 1
        name = f"{REPLICA_DIR}{k}"
    return name


def check_output_paths(samples: Sequence[TextLineSample], plan: Sequence[ReplicaSlot], replica_dir: str,
                       manifest_name: str = MANIFEST_NAME) -> None:
    """Reject a run before anything is written if two outputs share a path.

    Raises:
        OutputCollisionError: With every colliding path and its owners
    """
    owners: Dict[str, List[str]] = {manifest_name: ['the output manifest']}
    for sample in samples:
        owners.setdefault(mirrored_path(sample.id), []).append(sample.id)
        for slot in plan:
            rel = mirrored_path(sample.id, slot.replica, replica_dir=replica_dir)
            owners.setdefault(rel, []).append(f"{sample.id} replica {slot.replica}")
    clashes = [f"{rel} ({', '.join(names)})" for rel, names in sorted(owners.items()) if len(names) > 1]
    if clashes:
        raise OutputCollisionError(f"{len(clashes)} output path(s) would be written twice: "
                                   + '; '.join(clashes[:5]))


def _augment_replica(task: ReplicaTask) -> ReplicaOutcome:
    """Render/extract attempts for one replica; runs inside worker processes."""
    sample, slot, config = task.sample, task.slot, task.config
    out_dir = Path(task.out_dir)
    image = read_image(sample.absolute_path)
    outcome = ReplicaOutcome(sample.id, slot.replica, entry=None)

    for attempt in range(config.max_attempts):
        try:
            frame = render_replica_frame(image, config, sample.id, slot, attempt, task.scene_slots)
        except BehindCameraError as e:
            outcome.rejections.append((attempt, REASON_BEHIND_CAMERA, str(e)))
            continue
        except DegeneratePoseError as e:
            outcome.rejections.append((attempt, REASON_DEGENERATE, str(e)))
            continue
        outcome.rendered_frames += 1
        result = extract_line(frame, sample.height)
        if not result.accepted:
            outcome.rejections.append((attempt, result.reason, result.message))
            continue

        rel = mirrored_path(sample.id, slot.replica, replica_dir=task.replica_dir)
        write_png(result.image, out_dir / rel)
        prov = frame.provenance
        outcome.entry = AugmentedManifestEntry(
            id=rel,
            image_path=rel,
            transcript=sample.transcript,
            difficulty=sample.difficulty,
            origin=ORIGIN_AUGMENTED,
            source_id=sample.id,
            replica=slot.replica,
            frame=prov.frame,
            camera=prov.camera,
            radius_m=prov.radius,
            psi_deg=prov.psi,
            seed=prov.seed,
        )
        return outcome

    # Unaugmentable: pass the original through under the replica's name
    rel = mirrored_path(sample.id, slot.replica, suffix=PurePosixPath(sample.id).suffix,
                        replica_dir=task.replica_dir)
    target = out_dir / rel
    target.parent.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(sample.absolute_path, target)
    outcome.passthrough = True
    outcome.entry = AugmentedManifestEntry(
        id=rel,
        image_path=rel,
        transcript=sample.transcript,
        difficulty=sample.difficulty,
        origin=ORIGIN_ORIGINAL,
        source_id=sample.id,
        replica=slot.replica,
    )
    return outcome


class AugmentSummary:
    """Container for the results of one augmentation run."""

    def __init__(self, seed: int = 0, enlargement_factor: int = 1):
        self.seed = seed
        self.enlargement_factor = enlargement_factor
        self.entries: List[AugmentedManifestEntry] = []
        self.original_counts: Dict[str, int] = {name: 0 for name in DIFFICULTIES}
        self.augmented = 0
        self.passthrough = 0
        self.rejections = 0
        self.rejection_reasons: Counter = Counter()
        self.rendered_frames = 0
        self.wall_time = 0.0
        self.manifest_path: Optional[str] = None
        self.warnings: List[str] = []

    @property
    def originals(self) -> int:
        return sum(self.original_counts.values())

    @property
    def total_entries(self) -> int:
        return len(self.entries)

    def output_counts(self) -> Dict[str, int]:
        return class_counts(self.entries)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'seed': self.seed,
            'enlargement_factor': self.enlargement_factor,
            'originals': self.originals,
            'augmented': self.augmented,
            'passthrough': self.passthrough,
            'rejections': self.rejections,
            'rejection_reasons': dict(sorted(self.rejection_reasons.items())),
            'rendered_frames': self.rendered_frames,
            'total_entries': self.total_entries,
            'original_counts': dict(self.original_counts),
            'output_counts': self.output_counts(),
            'wall_time': self.wall_time,
            'manifest_path': self.manifest_path,
            'warnings': self.warnings,
        }


class AugmentEngine:
    """Core engine for dataset augmentation."""

    def __init__(self, config: Optional[AugmentConfig] = None):
        self.config = config or AugmentConfig.default()
        self._progress_callback: Optional[Callable[[str, Optional[float]], None]] = None
        self._callback_lock = threading.Lock()

    def set_progress_callback(self, callback: Callable[[str, Optional[float]], None]) -> None:
        """Set callback function for progress updates (thread-safe).

        Args:
            callback: Function that takes (message: str, progress: Optional[float] [0-1])
        """
        with self._callback_lock:
            self._progress_callback = callback

    def _update_progress(self, message: str, progress: Optional[float] = None) -> None:
        with self._callback_lock:
            if self._progress_callback:
                try:
                    self._progress_callback(message, progress)
                except Exception as e:
                    # Don't let callback errors abort the run
                    print(f"Warning: Progress callback error: {e}", file=sys.stderr)

    def _copy_originals(self, samples: Sequence[TextLineSample], out_dir: Path) -> List[AugmentedManifestEntry]:
        entries = []
        for sample in samples:
            rel = mirrored_path(sample.id)
            target = out_dir / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(sample.absolute_path, target)
            entries.append(AugmentedManifestEntry(
                id=rel,
                image_path=rel,
                transcript=sample.transcript,
                difficulty=sample.difficulty,
                origin=ORIGIN_ORIGINAL,
                source_id=sample.id,
                replica=0,
            ))
        return entries

    def _run_tasks(self, tasks: List[ReplicaTask]) -> List[ReplicaOutcome]:
        outcomes = []
        total = len(tasks)
        if self.config.workers == 1 or total <= 1:
            for done, task in enumerate(tasks, start=1):
                outcomes.append(_augment_replica(task))
                self._update_progress(f"Augmented {done}/{total} replicas", done / total)
            return outcomes

        with ProcessPoolExecutor(max_workers=min(self.config.workers, total)) as executor:
            futures = [executor.submit(_augment_replica, task) for task in tasks]
            for done, future in enumerate(as_completed(futures), start=1):
                outcomes.append(future.result())
                self._update_progress(f"Augmented {done}/{total} replicas", done / total)
        return outcomes

    def run(self, samples: Sequence[TextLineSample], out_dir: Union[str, Path],
            manifest_name: str = MANIFEST_NAME) -> AugmentSummary:
        """Augment a dataset into ``out_dir``.

        Output is a pure function of (samples, config): entries are merged in
        sample-id then replica order, so worker count and completion order
        never change a byte. The manifest is written last and atomically.

        Raises:
            OutputCollisionError: Two outputs would share a path (nothing is written)
            OSError: On I/O failures (no manifest is left behind)
        """
        started = time.monotonic()
        config = self.config
        out_dir = Path(out_dir)
        ordered = sorted(samples, key=lambda s: s.id)
        plan = replica_plan(config.enlargement_factor, config.trajectory.frames_per_scene)
        replica_dir = choose_replica_dir([s.id for s in ordered])
        check_output_paths(ordered, plan, replica_dir, manifest_name)
        out_dir.mkdir(parents=True, exist_ok=True)

        summary = AugmentSummary(seed=config.seed, enlargement_factor=config.enlargement_factor)
        summary.original_counts = class_counts(ordered)

        self._update_progress(f"Copying {len(ordered)} original lines...", 0.0)
        entries: Dict[Tuple[str, int], AugmentedManifestEntry] = {
            (sample.id, 0): entry for sample, entry in zip(ordered, self._copy_originals(ordered, out_dir))
        }

        scene_slots = max((slot.scene_slot for slot in plan), default=0) + 1
        tasks = [ReplicaTask(sample, slot, config, str(out_dir), scene_slots, replica_dir)
                 for sample in ordered for slot in plan]
        if tasks:
            logger.info("Rendering %d replicas of %d samples with %d worker(s)",
                        len(tasks), len(ordered), config.workers)

        outcomes = sorted(self._run_tasks(tasks), key=lambda o: (o.sample_id, o.replica))
        for outcome in outcomes:
            for attempt, reason, message in outcome.rejections:
                logger.warning("Rejected %s replica %d attempt %d [%s]: %s",
                               outcome.sample_id, outcome.replica, attempt + 1, reason, message)
                summary.rejection_reasons[reason] += 1
            summary.rejections += len(outcome.rejections)
            summary.rendered_frames += outcome.rendered_frames
            if outcome.passthrough:
                message = (f"Sample {outcome.sample_id} replica {outcome.replica} is unaugmentable after "
                           f"{config.max_attempts} attempts; original passed through")
                logger.warning(message)
                summary.warnings.append(message)
                summary.passthrough += 1
            else:
                summary.augmented += 1
            entries[(outcome.sample_id, outcome.replica)] = outcome.entry

        summary.entries = [entries[key] for key in sorted(entries)]
        manifest_path = out_dir / manifest_name
        write_manifest(summary.entries, manifest_path)
        summary.manifest_path = str(manifest_path)
        summary.wall_time = time.monotonic() - started
        self._update_progress("Augmentation completed!", 1.0)
        return summary


def augment_dataset(samples: Sequence[TextLineSample], config: AugmentConfig, out_dir: Union[str, Path],
                    progress_callback: Optional[Callable[[str, Optional[float]], None]] = None) -> AugmentSummary:
    """Run the augmentation engine once."""
    engine = AugmentEngine(config)
    if progress_callback:
        engine.set_progress_callback(progress_callback)
    return engine.run(samples, out_dir)


def take_fraction(samples: Sequence[TextLineSample], fraction: float, seed: int) -> List[TextLineSample]:
    """Stratified subset: round(fraction * count) samples of every difficulty class.

    Selection within a class is a seeded permutation; the result keeps the
    input order.

    Raises:
        ValueError: If fraction is not in (0, 1]
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    chosen = []
    for difficulty in DIFFICULTIES:
        members = [i for i, s in enumerate(samples) if s.difficulty == difficulty]
        if not members:
            continue
        n = int(np.floor(fraction * len(members) + 0.5))
        rng = derive_rng(seed, difficulty, 0, stream='take-fraction')
        picks = rng.permutation(len(members))[:n]
        chosen.extend(members[i] for i in picks)
    return [samples[i] for i in sorted(chosen)]
