#!/usr/bin/env python3
"""
Line Extraction Module

Turns a rendered frame back into a training line: containment check,
minimum-area enclosing rotated rectangle, rotation compensation, crop and
aspect-preserving bicubic resize. Only the rotation is undone; any shear the
perspective introduced stays in the extracted line.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from raster_ops import bilinear_sample, raster_size, resize_bicubic, restore_shape, round_to_u8
from scene_geometry import Quad2D
from scene_render import AugmentedFrame

# Angles below this are treated as no rotation at all
ZERO_ANGLE = 1e-9
WINDOW_MARGIN = 2

# Rejection reason codes
REASON_OUT_OF_FRAME = 'out-of-frame'
REASON_BEHIND_CAMERA = 'behind-camera'
REASON_DEGENERATE = 'degenerate-geometry'
REASON_EXTRACTION = 'extraction'


class DegenerateGeometryError(ValueError):
    """Collinear or coincident points have no enclosing rectangle."""


class ExtractionError(ValueError):
    """The line cannot be cut out of the raster."""


@dataclass(frozen=True)
class RotatedRect:
    center: Tuple[float, float]
    width: float
    height: float
    angle: float

    def corners(self) -> np.ndarray:
        a = math.radians(self.angle)
        u = np.array([math.cos(a), math.sin(a)])
        v = np.array([-math.sin(a), math.cos(a)])
        c = np.array(self.center)
        hw, hh = self.width / 2.0, self.height / 2.0
        return np.array([c - hw * u - hh * v, c + hw * u - hh * v, c + hw * u + hh * v, c - hw * u + hh * v])

    @property
    def area(self) -> float:
        return self.width * self.height


class ExtractionResult:
    """Container for one extraction attempt."""

    def __init__(self, image: Optional[np.ndarray] = None, rect: Optional[RotatedRect] = None,
                 reason: Optional[str] = None, message: str = ""):
        self.image = image
        self.rect = rect
        self.reason = reason
        self.message = message

    @property
    def accepted(self) -> bool:
        return self.image is not None and self.reason is None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'accepted': self.accepted,
            'reason': self.reason,
            'message': self.message,
            'size': list(raster_size(self.image)) if self.image is not None else None,
        }


def check_containment(quad: Quad2D, frame_w: int, frame_h: int) -> bool:
    """True iff every corner lies within the closed index bounds of the frame."""
    return all(0 <= x <= frame_w - 1 and 0 <= y <= frame_h - 1 for x, y in quad.corners)


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone chain hull, counter-clockwise, without collinear points."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=np.float64))))
    if len(pts) < 3:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _canonical_angle(angle: float) -> float:
    """Fold an angle into (-90, 90]."""
    angle = math.fmod(angle, 180.0)
    if angle <= -90.0:
        angle += 180.0
    elif angle > 90.0:
        angle -= 180.0
    return angle


def min_area_rect(quad) -> RotatedRect:
    """Minimum-area enclosing rectangle by rotating calipers.

    One side of the optimum is collinear with a hull edge, so every hull edge
    direction is tried. The result is canonicalized to width >= height with
    the angle of the width side in (-90, 90].

    Args:
        quad: Quad2D or an (N, 2) point array

    Raises:
        DegenerateGeometryError: If the points are collinear
    """
    points = quad.points if isinstance(quad, Quad2D) else np.asarray(quad, dtype=np.float64)
    hull = _convex_hull(points)
    if len(hull) < 3:
        raise DegenerateGeometryError("need at least three non-collinear points")
    extent = np.ptp(hull, axis=0).max()
    hull_area = 0.5 * abs(np.sum(hull[:, 0] * np.roll(hull[:, 1], -1) - np.roll(hull[:, 0], -1) * hull[:, 1]))
    if hull_area <= 1e-12 * max(extent, 1.0) ** 2:
        raise DegenerateGeometryError("points are collinear")

    best = None
    edges = np.roll(hull, -1, axis=0) - hull
    for edge in edges:
        length = math.hypot(edge[0], edge[1])
        if length == 0:
            continue
        u = edge / length
        v = np.array([-u[1], u[0]])
        pu = hull @ u
        pv = hull @ v
        w = pu.max() - pu.min()
        h = pv.max() - pv.min()
        area = w * h
        if best is None or area < best[0] - 1e-12 * max(area, 1.0):
            mid_u = (pu.max() + pu.min()) / 2.0
            mid_v = (pv.max() + pv.min()) / 2.0
            center = mid_u * u + mid_v * v
            best = (area, center, w, h, math.degrees(math.atan2(u[1], u[0])))

    _, center, w, h, angle = best
    if w < h:
        w, h = h, w
        angle += 90.0
    return RotatedRect(center=(float(center[0]), float(center[1])), width=float(w), height=float(h),
                       angle=_canonical_angle(angle))


def compensate_rotation(frame: np.ndarray, rect: RotatedRect) -> np.ndarray:
    """Rotate the frame by -rect.angle about rect.center (bilinear, zero fill).

    The output has the input's dimensions; the rect's width side ends up
    horizontal.
    """
    if abs(rect.angle) <= ZERO_ANGLE:
        return frame.copy()
    height, width = frame.shape[:2]
    a = math.radians(rect.angle)
    c, s = math.cos(a), math.sin(a)
    cx, cy = rect.center

    gx, gy = np.meshgrid(np.arange(width) + 0.5 - cx, np.arange(height) + 0.5 - cy)
    sx = cx + c * gx - s * gy
    sy = cy + s * gx + c * gy
    valid = (sx >= 0) & (sx <= width) & (sy >= 0) & (sy <= height)

    sampled = bilinear_sample(frame, sx - 0.5, sy - 0.5)
    sampled[~valid] = 0.0
    return restore_shape(round_to_u8(sampled), frame)


def crop_rect(compensated: np.ndarray, rect: RotatedRect) -> np.ndarray:
    """Cut the axis-aligned round(width) x round(height) box centred on rect.center.

    Raises:
        ExtractionError: If the box leaves the raster
    """
    width = int(math.floor(rect.width + 0.5))
    height = int(math.floor(rect.height + 0.5))
    x0 = int(math.floor(rect.center[0] - rect.width / 2.0 + 0.5))
    y0 = int(math.floor(rect.center[1] - rect.height / 2.0 + 0.5))
    frame_h, frame_w = compensated.shape[:2]
    if width < 1 or height < 1:
        raise ExtractionError(f"crop of {width}x{height} pixels is empty")
    if x0 < 0 or y0 < 0 or x0 + width > frame_w or y0 + height > frame_h:
        raise ExtractionError(
            f"crop [{x0}, {x0 + width}) x [{y0}, {y0 + height}) exceeds raster {frame_w}x{frame_h}")
    return compensated[y0:y0 + height, x0:x0 + width].copy()


def resize_to_height(line: np.ndarray, target_height: int) -> np.ndarray:
    """Aspect-preserving Catmull-Rom resize; a no-op at scale 1.

    Raises:
        ExtractionError: If the input is empty or the target is not positive
    """
    if line is None or line.size == 0 or line.shape[0] == 0 or line.shape[1] == 0:
        raise ExtractionError("cannot resize an empty line")
    if target_height < 1:
        raise ExtractionError(f"target height must be >= 1, got {target_height}")
    in_h, in_w = line.shape[:2]
    if in_h == target_height:
        return line.copy()
    out_w = max(1, int(math.floor(in_w * target_height / in_h + 0.5)))
    return resize_bicubic(line, out_w, target_height)


def _extraction_window(quad: Quad2D, rect: RotatedRect, frame_w: int, frame_h: int) -> Tuple[int, int, int, int]:
    cx, cy = rect.center
    box = np.array([[cx - rect.width / 2.0, cy - rect.height / 2.0], [cx + rect.width / 2.0, cy + rect.height / 2.0]])
    pts = np.vstack([quad.points, rect.corners(), box])
    x0 = max(0, int(math.floor(pts[:, 0].min())) - WINDOW_MARGIN)
    y0 = max(0, int(math.floor(pts[:, 1].min())) - WINDOW_MARGIN)
    x1 = min(frame_w, int(math.ceil(pts[:, 0].max())) + WINDOW_MARGIN)
    y1 = min(frame_h, int(math.ceil(pts[:, 1].max())) + WINDOW_MARGIN)
    return x0, y0, x1, y1


def extract_line(frame: AugmentedFrame, target_height: int) -> ExtractionResult:
    """Containment -> rectangle -> rotation compensation -> crop -> resize.

    The compensation runs on an integer-translated window around the quad and
    its rectangle, which holds every pixel the crop can read. Failures come back as
    rejections with a reason code instead of exceptions.
    """
    if not check_containment(frame.quad, frame.width, frame.height):
        return ExtractionResult(reason=REASON_OUT_OF_FRAME, message="text quad not fully inside the frame")
    try:
        rect = min_area_rect(frame.quad)
    except DegenerateGeometryError as e:
        return ExtractionResult(reason=REASON_DEGENERATE, message=str(e))

    x0, y0, x1, y1 = _extraction_window(frame.quad, rect, frame.width, frame.height)
    window = frame.image[y0:y1, x0:x1]
    local = RotatedRect(center=(rect.center[0] - x0, rect.center[1] - y0),
                        width=rect.width, height=rect.height, angle=rect.angle)
    try:
        upright = compensate_rotation(window, local)
        line = crop_rect(upright, local)
        line = resize_to_height(line, target_height)
    except ExtractionError as e:
        return ExtractionResult(rect=rect, reason=REASON_EXTRACTION, message=str(e))
    return ExtractionResult(image=line, rect=rect)
