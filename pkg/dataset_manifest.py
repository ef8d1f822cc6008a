#!/usr/bin/env python3
"""
Dataset Manifest Module

Reading and writing of text-line manifests and their images.

Input manifest: UTF-8, one sample per line, ``image_path<TAB>difficulty<TAB>transcript``
with image paths relative to the manifest's directory. Output manifests add
origin and provenance columns and start with a ``#`` header line; extra
columns are ignored when an output manifest is loaded as input again. In a
file without that header, extra columns are reported as warnings since the
transcript most likely contained a TAB.
"""

import logging
import os
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Dict, Iterator, List, Optional, Sequence, Union

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)

DIFFICULTIES = ('easy', 'medium', 'hard', 'unknown')
ORIGIN_ORIGINAL = 'original'
ORIGIN_AUGMENTED = 'augmented'

OUTPUT_COLUMNS = (
    'image_path', 'difficulty', 'transcript', 'origin', 'source_id',
    'replica', 'frame', 'camera', 'radius_m', 'psi_deg', 'seed',
)

# Pillow modes kept as-is; everything else is converted to L or RGB
_KEPT_MODES = ('L', 'LA', 'RGB', 'RGBA')

# first line written by write_manifest
OUTPUT_HEADER = '# ' + '\t'.join(OUTPUT_COLUMNS)


class ManifestParseError(ValueError):
    """A manifest line does not follow the column format."""

    def __init__(self, path: Union[str, Path], line_number: int, message: str):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


class SampleError(ValueError):
    """A sample's image is missing, unreadable or its label is unusable."""


@dataclass(frozen=True)
class TextLineSample:
    id: str
    image_path: str
    transcript: str
    difficulty: str
    height: int
    width: int = 0
    root: str = ''
    line_number: int = 0

    @property
    def absolute_path(self) -> Path:
        return Path(self.root) / Path(*PurePosixPath(self.image_path).parts)


@dataclass(frozen=True)
class AugmentedManifestEntry:
    id: str
    image_path: str
    transcript: str
    difficulty: str
    origin: str = ORIGIN_ORIGINAL
    source_id: Optional[str] = None
    replica: Optional[int] = None
    frame: Optional[int] = None
    camera: Optional[str] = None
    radius_m: Optional[float] = None
    psi_deg: Optional[float] = None
    seed: Optional[int] = None

    def to_row(self) -> List[str]:
        def fmt(value) -> str:
            if value is None:
                return ''
            if isinstance(value, float):
                return repr(value)
            return str(value)
        return [fmt(getattr(self, key)) for key in OUTPUT_COLUMNS]


@dataclass
class ManifestLoadResult:
    """Samples of a manifest plus the per-sample problems that were skipped."""

    samples: List[TextLineSample] = field(default_factory=list)
    sample_errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def __iter__(self) -> Iterator[TextLineSample]:
        return iter(self.samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index):
        return self.samples[index]

    def by_id(self) -> Dict[str, TextLineSample]:
        return {s.id: s for s in self.samples}


def read_image(path: Union[str, Path]) -> np.ndarray:
    """Decode an image to an 8-bit HxW or HxWxC array.

    Raises:
        SampleError: If the file is missing, undecodable or empty
    """
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode not in _KEPT_MODES:
                img = img.convert('RGB' if img.mode in ('P', 'CMYK', 'YCbCr', 'HSV') else 'L')
            arr = np.asarray(img, dtype=np.uint8).copy()
    except (OSError, ValueError, Image.DecompressionBombError) as e:
        raise SampleError(f"cannot decode image {path}: {e}") from e
    if arr.size == 0:
        raise SampleError(f"image {path} is empty")
    return arr


def write_png(image: np.ndarray, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(image)).save(path, format='PNG')


def posix_path(path: Union[str, Path]) -> str:
    """Manifest form of a relative path: always '/' separated."""
    return str(path).replace(os.sep, '/') if os.sep != '/' else str(path)


def _split_line(raw: str) -> List[str]:
    return raw.rstrip('\r\n').split('\t')


def load_manifest(path: Union[str, Path], strict: bool = False, decode_images: bool = True,
                  allow_empty_transcripts: bool = False) -> ManifestLoadResult:
    """Parse a manifest and measure its images.

    Args:
        path: Manifest file (UTF-8)
        strict: Raise on the first sample error instead of collecting it
        decode_images: Decode each image to learn its size (skipped for evaluation)
        allow_empty_transcripts: Accept samples whose transcript is empty

    Returns:
        ManifestLoadResult with the usable samples and collected sample errors

    Raises:
        ManifestParseError: Malformed line, unknown difficulty or duplicate id
        SampleError: Only with ``strict``
    """
    path = Path(path)
    root = path.parent
    result = ManifestLoadResult()
    seen: Dict[str, int] = {}
    output_format = False

    with open(path, 'r', encoding='utf-8') as f:
        for line_number, raw in enumerate(f, start=1):
            if raw.rstrip('\r\n') == OUTPUT_HEADER:
                output_format = True
            if not raw.strip() or raw.startswith('#'):
                continue
            fields = _split_line(raw)
            if len(fields) < 3:
                raise ManifestParseError(path, line_number,
                                         f"expected image_path<TAB>difficulty<TAB>transcript, got {len(fields)} field(s)")
            if len(fields) > 3 and not output_format:
                # a TAB inside a transcript cannot be told apart from a column break
                message = (f"{path}:{line_number}: {len(fields)} fields, transcript cut at the "
                           f"first TAB to '{fields[2]}'")
                logger.warning(message)
                result.warnings.append(message)
            image_path, difficulty, transcript = fields[0], fields[1].strip().lower(), fields[2]
            if not image_path:
                raise ManifestParseError(path, line_number, "empty image path")
            if difficulty not in DIFFICULTIES:
                raise ManifestParseError(path, line_number,
                                         f"unknown difficulty '{fields[1]}', expected one of {', '.join(DIFFICULTIES)}")
            sample_id = posix_path(image_path)
            if sample_id in seen:
                raise ManifestParseError(path, line_number,
                                         f"duplicate id '{sample_id}' (first on line {seen[sample_id]})")
            seen[sample_id] = line_number

            try:
                if not transcript and not allow_empty_transcripts:
                    raise SampleError(f"{path}:{line_number}: empty transcript for '{sample_id}'")
                width = height = 0
                if decode_images:
                    image = read_image(root / Path(*PurePosixPath(sample_id).parts))
                    height, width = image.shape[:2]
            except SampleError as e:
                if strict:
                    raise
                logger.warning("Skipping sample: %s", e)
                result.sample_errors.append(str(e))
                continue

            result.samples.append(TextLineSample(
                id=sample_id,
                image_path=sample_id,
                transcript=transcript,
                difficulty=difficulty,
                height=height,
                width=width,
                root=str(root),
                line_number=line_number,
            ))

    if not result.samples:
        message = f"Manifest {path} contains no usable samples"
        logger.warning(message)
        result.warnings.append(message)
    return result


def _atomic_write_lines(lines: Sequence[str], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f'.{path.name}.', suffix='.tmp', dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as f:
            for line in lines:
                f.write(line + '\n')
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def write_manifest(entries: Sequence[AugmentedManifestEntry], path: Union[str, Path]) -> int:
    """Write an output manifest atomically (temp file + rename).

    Returns:
        Number of entries written
    """
    lines = [OUTPUT_HEADER]
    for entry in entries:
        if '\t' in entry.transcript or '\n' in entry.transcript:
            raise ValueError(f"transcript of '{entry.id}' contains a TAB or newline")
        lines.append('\t'.join(entry.to_row()))
    _atomic_write_lines(lines, Path(path))
    return len(entries)


def load_augmented_manifest(path: Union[str, Path]) -> List[AugmentedManifestEntry]:
    """Read back every column written by ``write_manifest``."""
    path = Path(path)
    entries = []

    def opt(value: str, cast):
        return cast(value) if value != '' else None

    with open(path, 'r', encoding='utf-8') as f:
        for line_number, raw in enumerate(f, start=1):
            if not raw.strip() or raw.startswith('#'):
                continue
            fields = _split_line(raw)
            if len(fields) < 3:
                raise ManifestParseError(path, line_number, f"expected at least 3 fields, got {len(fields)}")
            fields += [''] * (len(OUTPUT_COLUMNS) - len(fields))
            try:
                entries.append(AugmentedManifestEntry(
                    id=fields[0],
                    image_path=fields[0],
                    difficulty=fields[1],
                    transcript=fields[2],
                    origin=fields[3] or ORIGIN_ORIGINAL,
                    source_id=opt(fields[4], str),
                    replica=opt(fields[5], int),
                    frame=opt(fields[6], int),
                    camera=opt(fields[7], str),
                    radius_m=opt(fields[8], float),
                    psi_deg=opt(fields[9], float),
                    seed=opt(fields[10], int),
                ))
            except ValueError as e:
                raise ManifestParseError(path, line_number, f"bad provenance column: {e}") from e
    return entries


def write_sample_manifest(samples: Sequence[TextLineSample], path: Union[str, Path]) -> int:
    """Write samples in the 3-column input format, paths relative to ``path``."""
    path = Path(path)
    out_dir = path.parent.resolve()
    lines = []
    for sample in samples:
        rel = os.path.relpath(sample.absolute_path.resolve(), out_dir)
        lines.append('\t'.join([posix_path(rel), sample.difficulty, sample.transcript]))
    _atomic_write_lines(lines, path)
    return len(lines)


def class_counts(items) -> Dict[str, int]:
    """Count samples or entries per difficulty class, in class order."""
    counts = Counter(item.difficulty for item in items)
    return {name: counts.get(name, 0) for name in DIFFICULTIES}

