#!/usr/bin/env python3
"""
Test script for line extraction.

Covers containment, the minimum-area rectangle, rotation compensation,
cropping, resizing and the full extraction pipeline on rendered frames.
"""

import math

import numpy as np

from line_extract import (
    REASON_OUT_OF_FRAME, DegenerateGeometryError, ExtractionError, RotatedRect, check_containment,
    compensate_rotation, crop_rect, extract_line, min_area_rect, resize_to_height,
)
from raster_ops import psnr, resize_bicubic
from scene_geometry import (
    CameraSpec, FrameView, Quad2D, billboard_pose, camera_pose, intrinsics_from_spec, plane_homography,
)
from scene_render import AugmentedFrame, SunLight, render_frame


def synthetic_frame(source, center=(0.0, 0.0, 2.0), scale=0.002):
    """Render `source` on a billboard seen by a 1000 px focal camera at the origin."""
    cam = CameraSpec('pinhole', 1.92, 1.08, 1.0, (0.0, 0.0, 0.0), (0.0, 0.0, 1.0))
    intr = intrinsics_from_spec(cam, 1920, 1080)
    pose = camera_pose(cam)
    dims = (source.shape[1], source.shape[0])
    plane = billboard_pose(pose.center, center, dims, scale)
    h = plane_homography(intr, pose, plane, dims)
    view = FrameView(intr, pose, plane, (SunLight((0.0, 0.0, 1.0), 1.0),), 0.0, 0, 0, dims)
    return render_frame(source, view, h)


def bar_image(width, height, center, bar_w, bar_h, angle):
    """White rotated bar on black, angle in degrees (y axis points down)."""
    a = math.radians(angle)
    gx, gy = np.meshgrid(np.arange(width) + 0.5 - center[0], np.arange(height) + 0.5 - center[1])
    along = gx * math.cos(a) + gy * math.sin(a)
    across = -gx * math.sin(a) + gy * math.cos(a)
    mask = (np.abs(along) <= bar_w / 2.0) & (np.abs(across) <= bar_h / 2.0)
    return np.where(mask, 255, 0).astype(np.uint8)


def angle_gap(a, b):
    return abs((a - b + 90.0) % 180.0 - 90.0)


def test_containment():
    """Test closed index-bound containment."""
    print("🧪 Testing containment...")
    inside = Quad2D(((0, 0), (1919, 0), (1919, 1079), (0, 1079)))
    assert check_containment(inside, 1920, 1080)
    assert not check_containment(Quad2D(((0, 0), (1920, 0), (1919, 1079), (0, 1079))), 1920, 1080)
    assert not check_containment(Quad2D(((-0.01, 5), (50, 5), (50, 20), (0, 20))), 1920, 1080)
    print("✅ Containment verified")


def test_min_area_rect_axis_aligned():
    print("\n🧪 Testing axis-aligned rectangle...")
    rect = min_area_rect(Quad2D(((10, 20), (110, 20), (110, 40), (10, 40))))
    assert np.allclose(rect.center, (60.0, 30.0))
    assert math.isclose(rect.width, 100.0) and math.isclose(rect.height, 20.0)
    assert abs(rect.angle) <= 1e-9

    # tall input is canonicalized to width >= height
    tall = min_area_rect(np.array([[0, 0], [10, 0], [10, 80], [0, 80]]))
    assert math.isclose(tall.width, 80.0) and math.isclose(tall.height, 10.0)
    assert math.isclose(abs(tall.angle), 90.0)
    assert -90.0 < tall.angle <= 90.0
    print("✅ Axis-aligned rectangle verified")


def test_min_area_rect_random_rectangles():
    print("\n🧪 Testing rectangle recovery on 1000 random rectangles...")
    rng = np.random.default_rng(17)
    for _ in range(1000):
        h = rng.uniform(5, 50)
        w = h + rng.uniform(5, 300)
        angle = rng.uniform(-90, 90)
        center = rng.uniform(100, 900, 2)
        truth = RotatedRect(center=tuple(center), width=w, height=h, angle=angle)
        rect = min_area_rect(truth.corners())
        assert angle_gap(rect.angle, angle) <= 0.2
        assert math.isclose(rect.width, w, rel_tol=1e-6)
        assert math.isclose(rect.height, h, rel_tol=1e-6)
        assert np.allclose(rect.center, center, atol=1e-6)
        assert -90.0 < rect.angle <= 90.0

    # the rectangle encloses every input point
    points = rng.uniform(0, 100, size=(4, 2))
    try:
        rect = min_area_rect(points)
    except DegenerateGeometryError:
        pass
    else:
        a = math.radians(rect.angle)
        u = np.array([math.cos(a), math.sin(a)])
        v = np.array([-math.sin(a), math.cos(a)])
        d = points - np.array(rect.center)
        assert np.all(np.abs(d @ u) <= rect.width / 2 + 1e-6)
        assert np.all(np.abs(d @ v) <= rect.height / 2 + 1e-6)
    print("✅ Random rectangles recovered")


def test_min_area_rect_degenerate():
    print("\n🧪 Testing degenerate point sets...")
    for points in ([[0, 0], [1, 1], [2, 2], [3, 3]], [[5, 5], [5, 5], [5, 5], [5, 5]]):
        try:
            min_area_rect(np.array(points, dtype=float))
        except DegenerateGeometryError:
            pass
        else:
            raise AssertionError(f"degenerate points accepted: {points}")
    print("✅ Collinear points rejected")


def test_compensation_round_trip():
    print("\n🧪 Testing rotation compensation round trip...")
    gx, gy = np.meshgrid(np.arange(200), np.arange(200))
    smooth = (128 + 100 * np.sin(gx / 7.0) * np.cos(gy / 9.0)).astype(np.uint8)

    zero = RotatedRect(center=(100.0, 100.0), width=50.0, height=10.0, angle=0.0)
    assert np.array_equal(compensate_rotation(smooth, zero), smooth)

    forward = RotatedRect(center=(100.0, 100.0), width=50.0, height=10.0, angle=23.0)
    backward = RotatedRect(center=(100.0, 100.0), width=50.0, height=10.0, angle=-23.0)
    restored = compensate_rotation(compensate_rotation(smooth, forward), backward)
    assert restored.shape == smooth.shape

    core = (gx + 0.5 - 100) ** 2 + (gy + 0.5 - 100) ** 2 <= 60 ** 2
    mae = np.mean(np.abs(restored[core].astype(float) - smooth[core].astype(float)))
    assert mae <= 2.0, f"round trip error {mae:.3f}"
    print(f"✅ Round trip mean absolute error {mae:.3f}")


def test_compensation_levels_a_rotated_bar():
    print("\n🧪 Testing angle recovery on a 17 degree bar...")
    image = bar_image(800, 600, (400.0, 300.0), 600.0, 40.0, 17.0)
    ys, xs = np.nonzero(image)
    rect = min_area_rect(np.column_stack([xs + 0.5, ys + 0.5]))
    assert angle_gap(rect.angle, 17.0) <= 0.25

    level = compensate_rotation(image, rect)
    rows, cols = np.nonzero(level > 127)
    assert rows.max() - rows.min() + 1 <= 46
    assert cols.max() - cols.min() + 1 >= 596
    print(f"✅ Bar re-measured at {rect.angle:.3f} degrees and levelled")


def test_crop_rect():
    print("\n🧪 Testing crop...")
    raster = np.arange(60 * 100).reshape(60, 100)
    rect = RotatedRect(center=(50.0, 30.0), width=40.0, height=10.0, angle=0.0)
    assert np.array_equal(crop_rect(raster, rect), raster[25:35, 30:70])

    for bad in (RotatedRect((5.0, 30.0), 40.0, 10.0, 0.0), RotatedRect((50.0, 30.0), 0.2, 0.2, 0.0)):
        try:
            crop_rect(raster, bad)
        except ExtractionError:
            pass
        else:
            raise AssertionError(f"bad crop accepted: {bad}")
    print("✅ Crop verified")


def test_resize_to_height():
    print("\n🧪 Testing aspect-preserving resize...")
    line = np.random.default_rng(1).integers(0, 256, size=(20, 100), dtype=np.uint8)
    assert np.array_equal(resize_to_height(line, 20), line)

    doubled = resize_to_height(line, 40)
    assert doubled.shape == (40, 200)

    odd = resize_to_height(np.zeros((47, 333), dtype=np.uint8), 32)
    assert odd.shape == (32, 227)
    assert abs(227 / 32 - 333 / 47) <= 1 / 32

    flat = np.full((20, 101, 3), 77, dtype=np.uint8)
    resized = resize_to_height(flat, 32)
    assert resized.shape == (32, 162, 3)
    assert np.all(resized == 77)

    for bad_line, target in ((line, 0), (np.zeros((0, 10), dtype=np.uint8), 20)):
        try:
            resize_to_height(bad_line, target)
        except ExtractionError:
            pass
        else:
            raise AssertionError("invalid resize accepted")
    print("✅ Resize verified")


def test_identity_extraction():
    print("\n🧪 Testing frontal extraction reproduces the source...")
    source = np.random.default_rng(42).integers(0, 256, size=(20, 100), dtype=np.uint8)
    frame = synthetic_frame(source)
    result = extract_line(frame, 20)
    assert result.accepted, result.message
    assert result.image.shape == source.shape
    assert psnr(result.image, source) >= 40.0
    assert result.to_dict()['size'] == [100, 20]

    taller = extract_line(frame, 40)
    assert taller.accepted and taller.image.shape == (40, 200)
    print("✅ Identity extraction verified")


def test_out_of_frame_rejection():
    print("\n🧪 Testing out-of-frame rejection...")
    source = np.full((20, 2000), 200, dtype=np.uint8)
    frame = synthetic_frame(source)
    result = extract_line(frame, 20)
    assert not result.accepted
    assert result.reason == REASON_OUT_OF_FRAME
    assert result.image is None
    print("✅ Lines leaving the frame are rejected")


def test_rotated_frame_extraction():
    print("\n🧪 Testing extraction of a rotated line...")
    image = bar_image(800, 600, (400.0, 300.0), 600.0, 40.0, -12.0)
    truth = RotatedRect(center=(400.0, 300.0), width=600.0, height=40.0, angle=-12.0)
    frame = AugmentedFrame(image=image, quad=Quad2D(tuple(map(tuple, truth.corners()))))
    result = extract_line(frame, 40)
    assert result.accepted, result.message
    assert angle_gap(result.rect.angle, -12.0) <= 1e-6
    assert result.image.shape == (40, 600)
    assert result.image[4:-4, 4:-4].mean() > 240
    print("✅ Rotated line levelled and cropped")


def test_shear_survives_extraction():
    print("\n🧪 Testing that perspective shear is kept...")
    gx = np.arange(200)
    stripes = np.tile(np.where((gx // 10) % 2 == 0, 230, 30).astype(np.uint8), (40, 1))
    frame = synthetic_frame(stripes, center=(0.6, 0.3, 1.5))

    p = frame.quad.points
    top, left = p[1] - p[0], p[3] - p[0]
    corner = math.degrees(math.acos(top @ left / (np.linalg.norm(top) * np.linalg.norm(left))))
    assert abs(corner - 90.0) > 1.0, f"corner angle {corner:.2f} is not sheared"

    result = extract_line(frame, 40)
    assert result.accepted, result.message
    oracle = resize_bicubic(stripes, result.image.shape[1], 40)
    diff = np.mean(np.abs(result.image.astype(float) - oracle.astype(float)))
    assert diff > 1.0
    print(f"✅ Shear kept (corner {corner:.2f} degrees, mean difference {diff:.1f})")


def main():
    """Run all line extraction tests."""
    print("✂️  Line Extraction Test Suite")
    print("=" * 50)

    try:
        test_containment()
        test_min_area_rect_axis_aligned()
        test_min_area_rect_random_rectangles()
        test_min_area_rect_degenerate()
        test_compensation_round_trip()
        test_compensation_levels_a_rotated_bar()
        test_crop_rect()
        test_resize_to_height()
        test_identity_extraction()
        test_out_of_frame_rejection()
        test_rotated_frame_extraction()
        test_shear_survives_extraction()

        print("\n🎉 All line extraction tests passed!")

    except Exception as e:
        print(f"\n❌ Test failed with error: {e}")
        return 1

    return 0


if __name__ == "__main__":
    exit(main())
