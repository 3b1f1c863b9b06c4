import json
import logging
from dataclasses import dataclass

from engine.channel_model import ConfigValidationError, SystemConfig

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("n_tx", "users", "rx_antennas", "layers", "noise_var", "scheme", "seed")
DEFAULTS = {
    "receiver": "matched_filter",
    "layer_noise": "antenna_sum",
    "feedback_iters": 10,
    "drops": 10000,
    "output_path": "samples.csv",
    "emit_cdf": False,
    "emit_plot_script": False,
}
INT_KEYS = ("n_tx", "users", "feedback_iters", "drops", "seed")
LIST_KEYS = ("rx_antennas", "layers")
OUTPUT_KEYS = ("output_path", "emit_cdf", "emit_plot_script")


class ConfigParseError(ValueError):
    """The document is not valid JSON, has the wrong shape, or carries an unknown key."""


@dataclass(frozen=True)
class OutputOptions:
    output_path: str = "samples.csv"
    emit_cdf: bool = False
    emit_plot_script: bool = False


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _check_types(doc):
    for key in INT_KEYS:
        if key in doc and not _is_int(doc[key]):
            raise ConfigValidationError(f"{key} must be an integer, got {doc[key]!r}")
    for key in LIST_KEYS:
        if not isinstance(doc[key], list) or not all(_is_int(x) for x in doc[key]):
            raise ConfigValidationError(f"{key} must be a list of integers, got {doc[key]!r}")
    if isinstance(doc["noise_var"], bool) or not isinstance(doc["noise_var"], (int, float)):
        raise ConfigValidationError(f"noise_var must be a number, got {doc['noise_var']!r}")
    for key in ("scheme", "receiver", "layer_noise", "output_path"):
        if not isinstance(doc[key], str):
            raise ConfigValidationError(f"{key} must be a string, got {doc[key]!r}")
    for key in ("emit_cdf", "emit_plot_script"):
        if not isinstance(doc[key], bool):
            raise ConfigValidationError(f"{key} must be true or false, got {doc[key]!r}")


def parse_config(text):
    """
    Parses a JSON configuration document:
    1. JSON syntax errors become ConfigParseError with line and column
    2. unknown keys are rejected
    3. defaults fill omitted optional keys
    4. types and every SystemConfig invariant are checked (ConfigValidationError)
    Returns (SystemConfig, OutputOptions).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        logger.error(f"Config is not valid JSON: {e}")
        raise ConfigParseError(f"line {e.lineno} column {e.colno}: {e.msg}") from e

    if not isinstance(doc, dict):
        raise ConfigParseError("config document must be a JSON object")

    known = set(REQUIRED_KEYS) | set(DEFAULTS)
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigParseError(f"unknown key(s): {', '.join(unknown)}")
    missing = [k for k in REQUIRED_KEYS if k not in doc]
    if missing:
        raise ConfigValidationError(f"missing required key(s): {', '.join(missing)}")

    merged = {**DEFAULTS, **doc}
    _check_types(merged)

    config = SystemConfig(**{k: v for k, v in merged.items() if k not in OUTPUT_KEYS})
    options = OutputOptions(**{k: merged[k] for k in OUTPUT_KEYS})
    return config, options


def load_config(path):
    """Reads and parses a config file; IO failures carry the path."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        logger.error(f"Cannot read config '{path}': {e}")
        raise OSError(f"cannot read config '{path}': {e.strerror or e}") from e
    return parse_config(text)
