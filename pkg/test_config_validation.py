#!/usr/bin/env python3
"""
Test script for configuration validation system.

Tests AugmentConfig loading and the standalone ConfigValidator.
"""

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from augment_core import AugmentConfig, ConfigError
from config_validator import ConfigValidator, main as validator_main


def write_temp_config(document):
    with tempfile.NamedTemporaryFile(mode='w', suffix='.json', delete=False) as f:
        if isinstance(document, str):
            f.write(document)
        else:
            json.dump(document, f, indent=2)
        return f.name


def test_valid_config():
    """Test loading valid configuration."""
    print("🧪 Testing valid configuration...")

    valid_config = {
        "cameras": [
            {"name": "full-frame", "sensor_width": 36, "sensor_height": 24, "focal_length": 50,
             "position": [0, 0, -1], "look_at": [0, 0, 0]}
        ],
        "lights": [{"type": "point", "position": [0, -1, -1], "power": 2.0}],
        "ambient": 0.2,
        "render": {"width": 640, "height": 360},
        "trajectory": {"radius_min": 0.05, "radius_max": 0.1, "frames_per_scene": 4},
        "seed": 1234,
        "enlargement_factor": 3
    }

    temp_file = write_temp_config(valid_config)
    try:
        config = AugmentConfig.from_file(temp_file)
        print("✅ Valid configuration loaded successfully")

        assert config.render_width == 640 and config.render_height == 360
        assert config.seed == 1234
        assert config.enlargement_factor == 3
        assert len(config.cameras) == 1 and config.cameras[0].name == 'full-frame'
        assert config.trajectory.frames_per_scene == 4
        # untouched keys keep their defaults
        assert config.pixel_scale == AugmentConfig.DEFAULT_CONFIG['render']['pixel_scale']
        assert config.trajectory.tilt == 20.0
        assert config.max_attempts == 8
        print("✅ Configuration values verified")

        is_valid, errors, _ = ConfigValidator.validate_config_file(temp_file)
        assert is_valid, errors
    finally:
        os.unlink(temp_file)


def test_invalid_values():
    """Test configuration with invalid values."""
    print("\n🧪 Testing invalid configuration values...")

    invalid_config = {
        "ambient": 1.5,                      # Too high
        "enlargement_factor": 0,             # Too low
        "workers": 2.5,                      # Not an integer
        "seed": True,                        # Wrong type
        "render": {"width": -10},            # Too low
        "trajectory": {"frames_per_scene": "ten"}
    }

    try:
        AugmentConfig.from_dict(invalid_config)
    except ConfigError as e:
        print("Expected validation errors:")
        for error in e.errors:
            print(f"  - {error}")
        joined = " ".join(e.errors)
        for key in ('ambient', 'enlargement_factor', 'workers', 'seed', 'render.width',
                    'trajectory.frames_per_scene'):
            assert f"'{key}'" in joined, key
    else:
        raise AssertionError("invalid configuration accepted")

    is_valid, errors = ConfigValidator.validate_config(invalid_config)
    assert not is_valid and len(errors) >= 6
    print("✅ Every invalid value reported")


def test_unknown_keys():
    """Test configuration with unknown keys."""
    print("\n🧪 Testing configuration with unknown keys...")

    config_with_unknown = {
        "seed": 7,
        "unknown_setting": "should be ignored",
        "render": {"width": 800, "dpi": 300}
    }

    warnings = []
    config = AugmentConfig.from_dict(config_with_unknown, warnings)
    assert config.seed == 7 and config.render_width == 800
    assert any("unknown_setting" in w for w in warnings)
    assert any("render.dpi" in w for w in warnings)
    print("✅ Unknown keys ignored with a warning")

    # the standalone validator is strict about them
    is_valid, errors = ConfigValidator.validate_config(config_with_unknown)
    assert not is_valid and len(errors) == 2
    print("✅ Validator flags unknown keys")


def test_logical_consistency():
    """Test logical consistency validation."""
    print("\n🧪 Testing logical consistency validation...")

    for inconsistent in (
        {"trajectory": {"radius_min": 0.6, "radius_max": 0.3}},
        {"trajectory": {"rotation_min": 30, "rotation_max": -30}},
        {"cameras": [{"name": "a", "sensor_width": 36, "sensor_height": 24, "focal_length": 50,
                      "position": [0, 0, -1], "look_at": [0, 0, -1]}]},
        {"cameras": [
            {"name": "a", "sensor_width": 36, "sensor_height": 24, "focal_length": 50,
             "position": [0, 0, -1], "look_at": [0, 0, 0]},
            {"name": "a", "sensor_width": 23.5, "sensor_height": 15.6, "focal_length": 35,
             "position": [0, 0, -1], "look_at": [0, 0, 0]}]},
        {"cameras": []},
        {"lights": [{"type": "sun", "direction": [0, 0, 0]}]},
    ):
        try:
            AugmentConfig.from_dict(inconsistent)
        except ConfigError:
            pass
        else:
            raise AssertionError(f"inconsistent configuration accepted: {inconsistent}")

    # no lights at all is allowed: ambient only
    assert AugmentConfig.from_dict({"lights": []}).lights == ()
    print("✅ Logical consistency properly enforced")


def test_malformed_json():
    """Test handling of malformed JSON."""
    print("\n🧪 Testing malformed JSON handling...")

    temp_file = write_temp_config('{\n  "seed": 1,\n  invalid json\n}')
    try:
        AugmentConfig.from_file(temp_file)
    except ConfigError as e:
        print(f"Expected error message: {e}")
        assert "line 3" in str(e)
    else:
        raise AssertionError("malformed JSON accepted")
    finally:
        os.unlink(temp_file)

    try:
        AugmentConfig.from_file("/nonexistent/augment.json")
    except ConfigError:
        pass
    else:
        raise AssertionError("missing file accepted")
    print("✅ Malformed JSON reported with its position")


def test_overrides():
    print("\n🧪 Testing command-line overrides...")
    config = AugmentConfig.default()
    changed = config.with_overrides(enlargement_factor=5, seed=99)
    assert changed.enlargement_factor == 5 and changed.seed == 99
    assert changed.workers == config.workers
    assert config.enlargement_factor == 2

    for bad in ({'enlargement_factor': 0}, {'workers': 0}, {'seed': -1}):
        try:
            config.with_overrides(**bad)
        except ConfigError:
            pass
        else:
            raise AssertionError(f"bad override accepted: {bad}")
    print("✅ Overrides validated")


def test_sample_config_and_schema():
    print("\n🧪 Testing sample configuration and schema...")
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / 'augment.json'
        assert AugmentConfig.create_sample_config(path)
        assert not AugmentConfig.create_sample_config(path)
        assert AugmentConfig.from_file(path) == AugmentConfig.default()
        assert validator_main([str(path)]) == 0

        broken = Path(tmp) / 'broken.json'
        broken.write_text(json.dumps({"ambient": -1}), encoding='utf-8')
        assert validator_main([str(broken)]) == 1

    default = AugmentConfig.default()
    reloaded = AugmentConfig.from_dict(default.to_dict())
    assert reloaded.cameras == default.cameras and reloaded.trajectory == default.trajectory
    assert np.allclose(reloaded.lights[0].direction, default.lights[0].direction)

    doc = ConfigValidator.get_schema_documentation()
    for key in ('trajectory.tilt', 'render.pixel_scale', 'cameras', 'lights'):
        assert f"\n{key}:" in doc
    assert ConfigValidator.validate_config(ConfigValidator.create_valid_config_template())[0]
    assert validator_main(["--schema"]) == 0
    assert validator_main([]) == 1
    print("✅ Sample configuration and schema verified")


def main():
    """Run all configuration validation tests."""
    print("🔧 Configuration Validation Test Suite")
    print("=" * 50)

    try:
        test_valid_config()
        test_invalid_values()
        test_unknown_keys()
        test_logical_consistency()
        test_malformed_json()
        test_overrides()
        test_sample_config_and_schema()

        print("\n🎉 All configuration validation tests passed!")
        print("✅ Configuration validation system is working correctly")

    except Exception as e:
        print(f"\n❌ Test failed with error: {e}")
        return 1

    return 0


if __name__ == "__main__":
    exit(main())
