#!/usr/bin/env python3
"""
Scene Geometry Module

Cameras, poses, the circular trajectory of the text plane and the projective
math that maps a planar text-line image into a rendered frame.

World frame convention: x right, y down (world-up is -Y), z forward. Image
coordinates are continuous, pixel (i, j) covers [i, i+1) x [j, j+1).
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from augment_core import AugmentConfig


WORLD_DOWN = np.array([0.0, 1.0, 0.0])
WORLD_X = np.array([1.0, 0.0, 0.0])

# Orthonormality tolerance for rotations and plane axes
ORTHO_TOLERANCE = 1e-9
# Below this the projected reference axis is treated as parallel to the view
DEGENERATE_AXIS = 1e-6
MIN_HOMOGENEOUS_W = 1e-12


class InvalidSpecError(ValueError):
    """Camera, resolution or trajectory parameters are out of their domain."""


class DegeneratePoseError(ValueError):
    """A pose cannot be constructed (e.g. plane center on the camera)."""


class BehindCameraError(ValueError):
    """Some part of the text plane lies at non-positive depth."""


def _vec3(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise InvalidSpecError(f"'{name}' must be a 3-vector, got {values!r}")
    if not np.all(np.isfinite(arr)):
        raise InvalidSpecError(f"'{name}' must be finite, got {values!r}")
    return arr


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class CameraSpec:
    """Physical camera: sensor and lens in millimetres, placement in metres."""

    name: str
    sensor_width: float
    sensor_height: float
    focal_length: float
    position: Tuple[float, float, float]
    look_at: Tuple[float, float, float]

    def __post_init__(self):
        for key in ('sensor_width', 'sensor_height', 'focal_length'):
            value = getattr(self, key)
            if not isinstance(value, (int, float)) or not value > 0:
                raise InvalidSpecError(f"Camera '{self.name}': '{key}' must be positive, got {value!r}")
        position = _vec3(self.position, 'position')
        look_at = _vec3(self.look_at, 'look_at')
        if np.linalg.norm(look_at - position) == 0:
            raise InvalidSpecError(f"Camera '{self.name}': position and look_at coincide")
        object.__setattr__(self, 'position', tuple(float(v) for v in position))
        object.__setattr__(self, 'look_at', tuple(float(v) for v in look_at))


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    @property
    def matrix(self) -> np.ndarray:
        """3x3 pixel-space projection matrix K."""
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])


@dataclass(frozen=True, eq=False)
class RigidPose:
    """World-to-camera transform: p_cam = rotation @ p_world + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise InvalidSpecError(f"rotation must be 3x3, got shape {r.shape}")
        if np.max(np.abs(r.T @ r - np.eye(3))) > ORTHO_TOLERANCE or abs(np.linalg.det(r) - 1.0) > ORTHO_TOLERANCE:
            raise InvalidSpecError("rotation must be orthonormal with det = +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, 'rotation', r)
        object.__setattr__(self, 'translation', t)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation


@dataclass(frozen=True)
class TrajectorySpec:
    center: Tuple[float, float, float]
    radius_min: float
    radius_max: float
    rotation_min: float
    rotation_max: float
    frames_per_scene: int
    tilt: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, 'center', tuple(float(v) for v in _vec3(self.center, 'center')))
        if not 0 < self.radius_min <= self.radius_max:
            raise InvalidSpecError(
                f"trajectory radius must satisfy 0 < radius_min <= radius_max, "
                f"got [{self.radius_min}, {self.radius_max}]")
        if self.rotation_min > self.rotation_max:
            raise InvalidSpecError(
                f"trajectory rotation_min ({self.rotation_min}) exceeds rotation_max ({self.rotation_max})")
        if not isinstance(self.frames_per_scene, int) or self.frames_per_scene < 1:
            raise InvalidSpecError(f"frames_per_scene must be a positive integer, got {self.frames_per_scene!r}")


@dataclass(frozen=True, eq=False)
class PlanePose:
    """Placement of the text plane; origin is the top-left corner of the image."""

    origin: np.ndarray
    ex: np.ndarray
    ey: np.ndarray
    pixel_scale: float

    def __post_init__(self):
        ex = np.asarray(self.ex, dtype=np.float64)
        ey = np.asarray(self.ey, dtype=np.float64)
        if abs(ex @ ey) > ORTHO_TOLERANCE or abs(np.linalg.norm(ex) - 1) > ORTHO_TOLERANCE \
                or abs(np.linalg.norm(ey) - 1) > ORTHO_TOLERANCE:
            raise InvalidSpecError("plane axes ex, ey must be orthonormal")
        if not self.pixel_scale > 0:
            raise InvalidSpecError(f"pixel_scale must be positive, got {self.pixel_scale!r}")
        for key, value in (('origin', self.origin), ('ex', ex), ('ey', ey)):
            arr = np.array(value, dtype=np.float64).reshape(3)
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)

    @property
    def normal(self) -> np.ndarray:
        """Front-facing unit normal (toward the viewer of upright text)."""
        return np.cross(self.ey, self.ex)

    def source_to_world(self, u, v) -> np.ndarray:
        """World points for source pixel coordinates (broadcasting)."""
        u = np.asarray(u, dtype=np.float64)[..., None]
        v = np.asarray(v, dtype=np.float64)[..., None]
        return self.origin + u * self.pixel_scale * self.ex + v * self.pixel_scale * self.ey


@dataclass(frozen=True)
class Homography:
    m: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in np.asarray(self.m, dtype=np.float64).reshape(-1))
        if len(values) != 9:
            raise InvalidSpecError(f"homography needs 9 values, got {len(values)}")
        object.__setattr__(self, 'm', values)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> 'Homography':
        return cls(tuple(np.asarray(matrix, dtype=np.float64).reshape(9)))

    @classmethod
    def identity(cls) -> 'Homography':
        return cls.from_matrix(np.eye(3))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.m).reshape(3, 3)

    def inverse(self) -> 'Homography':
        return Homography.from_matrix(np.linalg.inv(self.matrix))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 2) points homogeneously; raises on w <= 1e-12."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        homog = np.hstack([pts, np.ones((len(pts), 1))]) @ self.matrix.T
        w = homog[:, 2]
        if np.any(w <= MIN_HOMOGENEOUS_W):
            raise BehindCameraError("point maps to non-positive homogeneous coordinate")
        return homog[:, :2] / w[:, None]


@dataclass(frozen=True)
class Quad2D:
    """Corners ordered top-left, top-right, bottom-right, bottom-left of the source."""

    corners: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        pts = np.asarray(self.corners, dtype=np.float64)
        if pts.shape != (4, 2):
            raise InvalidSpecError(f"quad needs 4 corners, got shape {pts.shape}")
        object.__setattr__(self, 'corners', tuple((float(x), float(y)) for x, y in pts))

    @property
    def points(self) -> np.ndarray:
        return np.array(self.corners)

    def signed_area(self) -> float:
        """Shoelace area; positive for clockwise-on-screen (y-down) order."""
        p = self.points
        x, y = p[:, 0], p[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def is_convex(self) -> bool:
        p = self.points
        signs = []
        for i in range(4):
            a, b, c = p[i], p[(i + 1) % 4], p[(i + 2) % 4]
            u, v = b - a, c - b
            signs.append(u[0] * v[1] - u[1] * v[0])
        return all(s > 0 for s in signs) or all(s < 0 for s in signs)


@dataclass(frozen=True)
class SceneInstance:
    """One fully sampled scene; all frames share camera, lights and circle."""

    camera: CameraSpec
    lights: tuple
    ambient: float
    trajectory: TrajectorySpec
    radius: float
    psi: float
    frames_per_scene: int
    pixel_scale: float
    render_width: int
    render_height: int
    shading_seed: int


@dataclass(frozen=True, eq=False)
class FrameView:
    """Everything needed to render one frame of a scene."""

    intrinsics: Intrinsics
    camera_pose: RigidPose
    plane: PlanePose
    lights: tuple
    ambient: float
    frame_index: int
    shading_seed: int
    source_dims: Tuple[int, int]

    @property
    def camera_position(self) -> np.ndarray:
        return self.camera_pose.center


def intrinsics_from_spec(camera: CameraSpec, render_width: int, render_height: int) -> Intrinsics:
    """Derive pixel-space intrinsics from sensor/focal parameters.

    Args:
        camera: Physical camera description
        render_width: Output width in pixels
        render_height: Output height in pixels

    Returns:
        Intrinsics with the principal point at the frame center

    Raises:
        InvalidSpecError: If any dimension is non-positive
    """
    for key in ('sensor_width', 'sensor_height', 'focal_length'):
        value = getattr(camera, key)
        if not value > 0:
            raise InvalidSpecError(f"'{key}' must be positive, got {value}")
    if not (isinstance(render_width, int) and isinstance(render_height, int)) \
            or render_width < 1 or render_height < 1:
        raise InvalidSpecError(f"render size must be at least 1x1, got {render_width}x{render_height}")

    return Intrinsics(
        fx=camera.focal_length * render_width / camera.sensor_width,
        fy=camera.focal_length * render_height / camera.sensor_height,
        cx=render_width / 2.0,
        cy=render_height / 2.0,
        width=render_width,
        height=render_height,
    )


def camera_pose(camera: CameraSpec) -> RigidPose:
    """Look-at pose: camera x right, y down, z along the view direction."""
    position = np.array(camera.position)
    forward = _normalize(np.array(camera.look_at) - position)
    right = np.cross(WORLD_DOWN, forward)
    if np.linalg.norm(right) < DEGENERATE_AXIS:
        # looking straight up or down
        right = WORLD_X - (WORLD_X @ forward) * forward
    right = _normalize(right)
    down = np.cross(forward, right)
    rotation = np.vstack([right, down, forward])
    return RigidPose(rotation=rotation, translation=-rotation @ position)


def _rotation_x(degrees: float) -> np.ndarray:
    a = math.radians(degrees)
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rotation_z(degrees: float) -> np.ndarray:
    a = math.radians(degrees)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def trajectory_position(traj: TrajectorySpec, radius: float, psi: float, frame_index: int) -> np.ndarray:
    """Plane center for one frame on the tilted, rotated circle.

    The circle starts parallel to the image plane, is tipped by ``traj.tilt``
    about the horizontal axis and then rotated by ``psi`` about the optical
    axis (world +Z) through its center. Frames are spaced uniformly over one
    revolution starting at angle 0.

    Raises:
        IndexError: If frame_index is outside [0, frames_per_scene)
    """
    if not 0 <= frame_index < traj.frames_per_scene:
        raise IndexError(f"frame_index {frame_index} outside [0, {traj.frames_per_scene})")
    if radius == 0:
        return np.array(traj.center, dtype=np.float64)
    theta = 2.0 * math.pi * frame_index / traj.frames_per_scene
    local = np.array([radius * math.cos(theta), radius * math.sin(theta), 0.0])
    offset = _rotation_z(psi) @ (_rotation_x(traj.tilt) @ local)
    return np.array(traj.center, dtype=np.float64) + offset


def billboard_pose(camera_position, plane_center, source_dims: Tuple[int, int], pixel_scale: float) -> PlanePose:
    """Orient the text plane so that it faces the camera with upright text.

    Args:
        camera_position: Camera center (world, metres)
        plane_center: Where the middle of the text line is placed
        source_dims: (width, height) of the source image in pixels
        pixel_scale: Metres per source pixel

    Raises:
        DegeneratePoseError: If the plane center coincides with the camera
    """
    camera_position = np.asarray(camera_position, dtype=np.float64)
    plane_center = np.asarray(plane_center, dtype=np.float64)
    to_camera = camera_position - plane_center
    distance = np.linalg.norm(to_camera)
    if distance == 0:
        raise DegeneratePoseError("plane center coincides with the camera position")
    normal = to_camera / distance

    down_in_plane = WORLD_DOWN - (WORLD_DOWN @ normal) * normal
    if np.linalg.norm(down_in_plane) < DEGENERATE_AXIS:
        ex = _normalize(WORLD_X - (WORLD_X @ normal) * normal)
        ey = np.cross(ex, normal)
    else:
        ey = _normalize(down_in_plane)
        ex = np.cross(normal, ey)

    width, height = source_dims
    origin = plane_center - (width / 2.0) * pixel_scale * ex - (height / 2.0) * pixel_scale * ey
    return PlanePose(origin=origin, ex=ex, ey=ey, pixel_scale=pixel_scale)


def plane_homography(intr: Intrinsics, pose: RigidPose, plane: PlanePose,
                     source_dims: Optional[Tuple[int, int]] = None) -> Homography:
    """Closed-form H = K [r1 | r2 | t] for the textured plane.

    Args:
        intr: Camera intrinsics
        pose: World-to-camera pose
        plane: Text plane placement
        source_dims: Source (width, height); when given, all four corners
            must have positive depth

    Raises:
        BehindCameraError: If a plane corner lies at non-positive depth
    """
    r = pose.rotation
    r1 = r @ plane.ex * plane.pixel_scale
    r2 = r @ plane.ey * plane.pixel_scale
    t = pose.to_camera(plane.origin)

    if source_dims is not None:
        w, h = source_dims
        corners = plane.source_to_world(np.array([0, w, w, 0]), np.array([0, 0, h, h]))
        depths = pose.to_camera(corners)[:, 2]
        if np.any(depths <= 0):
            raise BehindCameraError("text plane corner at non-positive depth")
    elif t[2] <= 0:
        raise BehindCameraError("text plane origin at non-positive depth")

    matrix = intr.matrix @ np.column_stack([r1, r2, t])
    if abs(np.linalg.det(matrix)) <= MIN_HOMOGENEOUS_W:
        raise BehindCameraError("text plane seen edge-on (singular homography)")
    return Homography.from_matrix(matrix)


def project_quad(h: Homography, source_dims: Tuple[int, int]) -> Quad2D:
    """Map the four source corners through H."""
    w, h_px = source_dims
    corners = np.array([[0.0, 0.0], [w, 0.0], [w, h_px], [0.0, h_px]])
    return Quad2D(tuple(map(tuple, h.apply(corners))))


def sample_scene(config: 'AugmentConfig', rng: np.random.Generator) -> SceneInstance:
    """Draw camera, radius and curve rotation for one scene.

    Draw order is fixed (camera, radius, psi, shading seed) so equal stream
    states give bit-identical scenes.
    """
    if not config.cameras:
        raise InvalidSpecError("camera list is empty")
    traj = config.trajectory
    camera = config.cameras[int(rng.integers(len(config.cameras)))]
    radius = float(rng.uniform(traj.radius_min, traj.radius_max))
    psi = float(rng.uniform(traj.rotation_min, traj.rotation_max))
    shading_seed = int(rng.integers(0, 2 ** 63 - 1))
    return SceneInstance(
        camera=camera,
        lights=tuple(config.lights),
        ambient=config.ambient,
        trajectory=traj,
        radius=radius,
        psi=psi,
        frames_per_scene=traj.frames_per_scene,
        pixel_scale=config.pixel_scale,
        render_width=config.render_width,
        render_height=config.render_height,
        shading_seed=shading_seed,
    )


def scene_frame_view(scene: SceneInstance, frame_index: int, source_dims: Tuple[int, int]) -> Tuple[FrameView, Homography]:
    """Place the plane for one frame and compute its homography.

    Raises:
        IndexError: frame outside the scene
        DegeneratePoseError, BehindCameraError: pose cannot be imaged
    """
    intr = intrinsics_from_spec(scene.camera, scene.render_width, scene.render_height)
    pose = camera_pose(scene.camera)
    center = trajectory_position(scene.trajectory, scene.radius, scene.psi, frame_index)
    plane = billboard_pose(pose.center, center, source_dims, scene.pixel_scale)
    h = plane_homography(intr, pose, plane, source_dims)
    view = FrameView(
        intrinsics=intr,
        camera_pose=pose,
        plane=plane,
        lights=scene.lights,
        ambient=scene.ambient,
        frame_index=frame_index,
        shading_seed=scene.shading_seed,
        source_dims=tuple(source_dims),
    )
    return view, h
