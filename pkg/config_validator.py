#!/usr/bin/env python3
"""
Configuration Validation Module

Provides schema validation and type checking for augmentation configuration
files without running an augmentation.
"""

import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from augment_core import AugmentConfig, ConfigError, config_value


def _build_schema() -> Dict[str, Any]:
    """Build schema dynamically from AugmentConfig.VALIDATION_RULES.

    This keeps the validator in sync with the core config.
    """
    schema = {}

    descriptions = {
        'ambient': 'Ambient light floor added to every pixel (0 = black shadows)',
        'seed': 'Master seed; every random draw derives from it',
        'enlargement_factor': 'Output size as a multiple of the input (1 = copy-through)',
        'workers': 'Number of worker processes',
        'max_attempts': 'Render attempts per replica before the original is passed through',
        'render.width': 'Rendered frame width (pixels)',
        'render.height': 'Rendered frame height (pixels)',
        'render.pixel_scale': 'Size of one source pixel on the text plane (meters)',
        'trajectory.radius_min': 'Smallest circle radius (meters)',
        'trajectory.radius_max': 'Largest circle radius (meters)',
        'trajectory.rotation_min': 'Smallest curve rotation about the optical axis (degrees)',
        'trajectory.rotation_max': 'Largest curve rotation about the optical axis (degrees)',
        'trajectory.frames_per_scene': 'Frames along the circle of one scene',
        'trajectory.tilt': 'Out-of-plane tilt of the circle (degrees)',
    }

    for key, (min_val, max_val) in AugmentConfig.VALIDATION_RULES.items():
        # Determine type from default value to avoid hardcoding
        default_value = config_value(AugmentConfig.DEFAULT_CONFIG, key)
        field_type = int if isinstance(default_value, int) else (int, float)
        schema[key] = {
            'type': field_type,
            'min': min_val,
            'max': max_val,
            'description': descriptions.get(key, f'Configuration for {key}'),
        }

    # Structured sections (not in VALIDATION_RULES)
    schema['cameras'] = {
        'type': list,
        'description': 'Cameras drawn uniformly per scene: {name, sensor_width, sensor_height (mm), '
                       'focal_length (mm), position [x, y, z], look_at [x, y, z] (meters)}',
    }
    schema['lights'] = {
        'type': list,
        'description': 'Lights added together: sun {direction, irradiance}, point {position, power}, '
                       'spot {position, direction, cone_half_angle, blend, power}, '
                       'area {center, normal, width, height, radiance, sample_count}',
    }
    schema['trajectory.center'] = {
        'type': list,
        'description': 'Fixed center of the circular trajectory [x, y, z] (meters)',
    }
    return schema


class ConfigValidator:
    """Configuration validator with schema checking."""

    _schema_cache: Optional[Dict[str, Any]] = None

    @classmethod
    def get_schema(cls) -> Dict[str, Any]:
        """Get the validation schema, building it lazily on first access."""
        if cls._schema_cache is None:
            cls._schema_cache = _build_schema()
        return cls._schema_cache

    @classmethod
    def validate_config(cls, config: Dict[str, Any]) -> Tuple[bool, List[str]]:
        """Validate configuration against schema.

        Unknown keys are errors here, while the engine only warns about them.

        Returns:
            Tuple of (is_valid, error_messages)
        """
        errors: List[str] = []
        if not isinstance(config, dict):
            return False, [f"Configuration must be a JSON object, got {type(config).__name__}"]

        _, unknown = AugmentConfig.merge_with_defaults(config)
        errors.extend(unknown)
        try:
            AugmentConfig.from_dict(config)
        except ConfigError as e:
            errors.extend(e.errors)
        return len(errors) == 0, errors

    @classmethod
    def validate_config_file(cls, file_path: Union[str, Path]) -> Tuple[bool, List[str], Dict[str, Any]]:
        """Validate configuration file.

        Returns:
            Tuple of (is_valid, error_messages, config_dict)
        """
        file_path = Path(file_path)

        if not file_path.exists():
            return False, [f"Configuration file {file_path} does not exist"], {}

        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                config = json.load(f)
        except json.JSONDecodeError as e:
            return False, [f"Invalid JSON in configuration file: {e}"], {}
        except OSError as e:
            return False, [f"Error reading configuration file: {e}"], {}

        is_valid, errors = cls.validate_config(config)
        return is_valid, errors, config

    @classmethod
    def get_schema_documentation(cls) -> str:
        """Get human-readable schema documentation."""
        doc_lines = ["Configuration Schema:", "=" * 50]

        for key, rules in cls.get_schema().items():
            type_info = rules['type'] if isinstance(rules['type'], tuple) else (rules['type'],)
            type_names = [t.__name__ for t in type_info]

            doc_lines.append(f"\n{key}:")
            doc_lines.append(f"  Type: {' or '.join(type_names)}")
            if 'min' in rules and 'max' in rules:
                doc_lines.append(f"  Range: min: {rules['min']}, max: {rules['max']}")
            default = config_value(AugmentConfig.DEFAULT_CONFIG, key)
            if default is not None and not isinstance(default, list):
                doc_lines.append(f"  Default: {default}")
            doc_lines.append(f"  Description: {rules['description']}")

        return "\n".join(doc_lines)

    @classmethod
    def create_valid_config_template(cls) -> Dict[str, Any]:
        """Configuration template with the default values."""
        return json.loads(json.dumps(AugmentConfig.DEFAULT_CONFIG))


def main(argv: Optional[List[str]] = None) -> int:
    """CLI interface for configuration validation."""
    args = sys.argv[1:] if argv is None else argv

    if not args:
        print("Usage: python config_validator.py <config_file>")
        print("       python config_validator.py --schema")
        return 1

    if args[0] == "--schema":
        print(ConfigValidator.get_schema_documentation())
        return 0

    config_file = args[0]
    is_valid, errors, config = ConfigValidator.validate_config_file(config_file)

    if is_valid:
        print(f"✅ Configuration file {config_file} is valid!")
        print(f"Loaded {len(config)} configuration sections.")
    else:
        print(f"❌ Configuration file {config_file} has errors:")
        for error in errors:
            print(f"  - {error}")
        return 1

    return 0


if __name__ == "__main__":
    sys.exit(main())
