#!/usr/bin/env python3
"""
Scene Render Module

Produces an augmented frame: the source text-line image is inverse-warped
through the plane homography onto a black background and shaded with a
Lambertian light model (sun, point, spot and area lights plus an ambient
floor, all of which may be combined).
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from raster_ops import bilinear_sample, restore_shape, round_to_u8
from scene_geometry import (
    FrameView, Homography, InvalidSpecError, Quad2D, WORLD_DOWN, WORLD_X, project_quad,
)

UNIT_TOLERANCE = 1e-9
DEFAULT_AREA_SAMPLES = 16


def _unit(values, name: str) -> Tuple[float, float, float]:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.shape != (3,) or abs(np.linalg.norm(arr) - 1.0) > UNIT_TOLERANCE:
        raise InvalidSpecError(f"'{name}' must be a unit 3-vector, got {values!r}")
    return tuple(float(v) for v in arr)


def _point(values, name: str) -> Tuple[float, float, float]:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise InvalidSpecError(f"'{name}' must be a 3-vector, got {values!r}")
    return tuple(float(v) for v in arr)


def _non_negative(value, name: str) -> float:
    if not isinstance(value, (int, float)) or value < 0:
        raise InvalidSpecError(f"'{name}' must be a non-negative number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class SunLight:
    """Homogeneous directional light; ``direction`` is where the light travels."""

    direction: Tuple[float, float, float]
    irradiance: float = 1.0
    kind: str = field(default='sun', init=False)

    def __post_init__(self):
        object.__setattr__(self, 'direction', _unit(self.direction, 'direction'))
        object.__setattr__(self, 'irradiance', _non_negative(self.irradiance, 'irradiance'))


@dataclass(frozen=True)
class PointLight:
    position: Tuple[float, float, float]
    power: float = 1.0
    kind: str = field(default='point', init=False)

    def __post_init__(self):
        object.__setattr__(self, 'position', _point(self.position, 'position'))
        object.__setattr__(self, 'power', _non_negative(self.power, 'power'))


@dataclass(frozen=True)
class SpotLight:
    position: Tuple[float, float, float]
    direction: Tuple[float, float, float]
    cone_half_angle: float
    blend: float = 0.15
    power: float = 1.0
    kind: str = field(default='spot', init=False)

    def __post_init__(self):
        object.__setattr__(self, 'position', _point(self.position, 'position'))
        object.__setattr__(self, 'direction', _unit(self.direction, 'direction'))
        if not 0 < self.cone_half_angle <= 90:
            raise InvalidSpecError(f"'cone_half_angle' must be in (0, 90], got {self.cone_half_angle!r}")
        if not 0 <= self.blend <= 1:
            raise InvalidSpecError(f"'blend' must be in [0, 1], got {self.blend!r}")
        object.__setattr__(self, 'power', _non_negative(self.power, 'power'))


@dataclass(frozen=True)
class AreaLight:
    center: Tuple[float, float, float]
    normal: Tuple[float, float, float]
    width: float
    height: float
    radiance: float = 1.0
    sample_count: int = DEFAULT_AREA_SAMPLES
    kind: str = field(default='area', init=False)

    def __post_init__(self):
        object.__setattr__(self, 'center', _point(self.center, 'center'))
        object.__setattr__(self, 'normal', _unit(self.normal, 'normal'))
        _non_negative(self.width, 'width')
        _non_negative(self.height, 'height')
        object.__setattr__(self, 'radiance', _non_negative(self.radiance, 'radiance'))
        if not isinstance(self.sample_count, int) or self.sample_count < 1:
            raise InvalidSpecError(f"'sample_count' must be an integer >= 1, got {self.sample_count!r}")


LIGHT_TYPES = {
    'sun': SunLight,
    'point': PointLight,
    'spot': SpotLight,
    'area': AreaLight,
}


def light_from_dict(data: Dict[str, Any]):
    """Build a light from its JSON form ``{"type": "sun", ...}``.

    Direction and normal vectors are normalized here so configuration files
    may use any length.
    """
    data = dict(data)
    kind = data.pop('type', None)
    if kind not in LIGHT_TYPES:
        raise InvalidSpecError(f"unknown light type {kind!r}; expected one of {sorted(LIGHT_TYPES)}")
    for key in ('direction', 'normal'):
        if key in data:
            vec = np.asarray(data[key], dtype=np.float64).reshape(-1)
            norm = np.linalg.norm(vec)
            if vec.shape != (3,) or norm == 0:
                raise InvalidSpecError(f"light '{key}' must be a non-zero 3-vector, got {data[key]!r}")
            data[key] = tuple(vec / norm)
    try:
        return LIGHT_TYPES[kind](**data)
    except TypeError as e:
        raise InvalidSpecError(f"invalid {kind} light: {e}") from e


def light_to_dict(light) -> Dict[str, Any]:
    result = {'type': light.kind}
    for key, value in light.__dict__.items():
        if key == 'kind':
            continue
        result[key] = list(value) if isinstance(value, tuple) else value
    return result


def area_sample_points(light: AreaLight, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Stratified sample positions over the light rectangle.

    Cells of a ceil(sqrt(n))-column grid are visited row by row; with ``rng``
    each sample is jittered inside its cell, otherwise cell centers are used.
    """
    n = light.sample_count
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    idx = np.arange(n)
    col, row = idx % cols, idx // cols
    if rng is None:
        jitter = np.full((n, 2), 0.5)
    else:
        jitter = rng.random((n, 2))
    s = (col + jitter[:, 0]) / cols - 0.5
    t = (row + jitter[:, 1]) / rows - 0.5

    normal = np.array(light.normal)
    u = np.cross(normal, WORLD_DOWN)
    if np.linalg.norm(u) < 1e-6:
        u = np.cross(normal, WORLD_X)
    u = u / np.linalg.norm(u)
    v = np.cross(normal, u)
    return np.array(light.center) + (s * light.width)[:, None] * u + (t * light.height)[:, None] * v


def _point_contribution(light_pos: np.ndarray, power: float, points: np.ndarray, normal: np.ndarray):
    to_light = light_pos - points
    dist2 = np.sum(to_light * to_light, axis=-1)
    dist = np.sqrt(dist2)
    with np.errstate(divide='ignore', invalid='ignore'):
        cosine = np.maximum(0.0, np.sum(to_light * normal, axis=-1) / dist)
        value = power * cosine / dist2
    return np.where(dist2 > 0, value, 0.0), to_light, dist


def _spot_gate(light: SpotLight, to_light: np.ndarray, dist: np.ndarray) -> np.ndarray:
    axis = np.array(light.direction)
    with np.errstate(divide='ignore', invalid='ignore'):
        cos_angle = np.sum(-to_light * axis, axis=-1) / dist
    angle = np.degrees(np.arccos(np.clip(np.nan_to_num(cos_angle), -1.0, 1.0)))
    outer = light.cone_half_angle
    inner = outer * (1.0 - light.blend)
    if outer == inner:
        return (angle <= outer).astype(np.float64)
    t = np.clip((outer - angle) / (outer - inner), 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def shading_factor(lights: Sequence, ambient: float, point, normal,
                   rng: Optional[np.random.Generator] = None):
    """Lambertian shading factor clamped to [0, 1].

    Args:
        lights: Light specs (any mix of variants)
        ambient: Ambient floor in [0, 1]
        point: Plane point(s), shape (3,) or (..., 3)
        normal: Unit surface normal facing the viewer
        rng: Sub-stream for jittering area-light samples

    Returns:
        float for a single point, otherwise an array of shape point.shape[:-1]
    """
    points = np.asarray(point, dtype=np.float64)
    scalar = points.ndim == 1
    points = np.atleast_2d(points)
    normal = np.asarray(normal, dtype=np.float64)
    total = np.full(points.shape[:-1], float(ambient))

    for light in lights:
        if isinstance(light, SunLight):
            cosine = max(0.0, -float(np.dot(light.direction, normal)))
            total = total + light.irradiance * cosine
        elif isinstance(light, SpotLight):
            value, to_light, dist = _point_contribution(np.array(light.position), light.power, points, normal)
            total = total + value * _spot_gate(light, to_light, dist)
        elif isinstance(light, PointLight):
            value, _, _ = _point_contribution(np.array(light.position), light.power, points, normal)
            total = total + value
        elif isinstance(light, AreaLight):
            acc = np.zeros(points.shape[:-1])
            for sample in area_sample_points(light, rng):
                value, _, _ = _point_contribution(sample, light.radiance, points, normal)
                acc = acc + value
            total = total + acc / light.sample_count
        else:
            raise InvalidSpecError(f"unsupported light {light!r}")

    factor = np.clip(total, 0.0, 1.0)
    return float(factor[0]) if scalar else factor


@dataclass(frozen=True)
class FrameProvenance:
    sample_id: str
    replica: int
    frame: int
    camera: str
    radius: float
    psi: float
    seed: int


@dataclass(frozen=True, eq=False)
class AugmentedFrame:
    image: np.ndarray
    quad: Quad2D
    provenance: Optional[FrameProvenance] = None

    @property
    def width(self) -> int:
        return int(self.image.shape[1])

    @property
    def height(self) -> int:
        return int(self.image.shape[0])


def render_frame(image: np.ndarray, view: FrameView, h: Homography,
                 provenance: Optional[FrameProvenance] = None) -> AugmentedFrame:
    """Warp and shade a source line into a black frame.

    Each output pixel center is mapped back through H^-1; when the preimage
    falls inside the source rectangle the source is sampled bilinearly and
    multiplied by the shading factor at the matching plane point.

    Raises:
        BehindCameraError: A source corner does not project in front of the camera
    """
    src_h, src_w = image.shape[:2]
    intr = view.intrinsics
    quad = project_quad(h, (src_w, src_h))

    channels = 1 if image.ndim == 2 else image.shape[2]
    out = np.zeros((intr.height, intr.width, channels), dtype=np.uint8)

    pts = quad.points
    x0 = max(0, int(math.floor(pts[:, 0].min())))
    x1 = min(intr.width, int(math.ceil(pts[:, 0].max())))
    y0 = max(0, int(math.floor(pts[:, 1].min())))
    y1 = min(intr.height, int(math.ceil(pts[:, 1].max())))

    if x1 > x0 and y1 > y0:
        gx, gy = np.meshgrid(np.arange(x0, x1) + 0.5, np.arange(y0, y1) + 0.5)
        inv = h.inverse().matrix
        w = inv[2, 0] * gx + inv[2, 1] * gy + inv[2, 2]
        with np.errstate(divide='ignore', invalid='ignore'):
            su = (inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2]) / w
            sv = (inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2]) / w
        inside = (w > 0) & (su >= 0) & (su < src_w) & (sv >= 0) & (sv < src_h)

        if np.any(inside):
            su_in, sv_in = su[inside], sv[inside]
            sampled = bilinear_sample(image, su_in - 0.5, sv_in - 0.5)
            world = view.plane.source_to_world(su_in, sv_in)
            rng = np.random.default_rng([view.shading_seed, view.frame_index])
            factor = shading_factor(view.lights, view.ambient, world, view.plane.normal, rng)
            window = out[y0:y1, x0:x1]
            window[inside] = round_to_u8(sampled * np.atleast_1d(factor)[:, None])

    return AugmentedFrame(image=restore_shape(out, image), quad=quad, provenance=provenance)
