"""Reading and writing the flat ``key = value`` experiment configuration format."""
import difflib
import logging
import os
import tempfile
from typing import Any, Dict, Mapping, Optional

from dotenv import dotenv_values
from pydantic import ValidationError

from ns3l_lab.errors import ConfigError
from ns3l_lab.models.config import ExperimentConfig, field_names

LOG = logging.getLogger(__name__)


def _check_keys(keys) -> None:
    known = field_names()
    for key in keys:
        if key not in known:
            close = difflib.get_close_matches(key, known, n=1)
            hint = f'; did you mean {close[0]!r}?' if close else ''
            raise ConfigError(f'unknown config key {key!r}{hint}')


def _validation_message(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        key = '.'.join(str(loc) for loc in item['loc']) or 'config'
        parts.append(f'{key}: {item["msg"]}')
    return '; '.join(parts)


def parse_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """
    Builds an experiment configuration from a file and/or command-line overrides.

    Args:
        path: Optional path to a flat ``key = value`` file (``#`` comments allowed).
        overrides: Values that take precedence over the file; ``None`` entries are ignored.

    Returns:
        ExperimentConfig: The validated configuration.

    Raises:
        ConfigError: Unknown keys, unreadable file or invalid values.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f'config file not found: {path}')
        values.update(dotenv_values(path, interpolate=False))
    if overrides:
        values.update({key: value for key, value in overrides.items() if value is not None})
    _check_keys(values)
    try:
        config = ExperimentConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigError(_validation_message(e)) from e
    LOG.debug('Parsed config: %s', config)
    return config


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list, frozenset)):
        return ','.join(_format_value(item) for item in value)
    if hasattr(value, 'value'):
        return str(value.value)
    return str(value)


def emit_config(config: ExperimentConfig) -> str:
    """Serializes a configuration so that ``parse_config`` reads it back unchanged."""
    lines = []
    for key in field_names():
        value = getattr(config, key)
        if value is None:
            continue
        lines.append(f'{key} = {_format_value(value)}')
    return '\n'.join(lines) + '\n'


def write_text_atomic(path: str, text: str) -> None:
    """Writes through a temporary file in the same directory, then renames."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except OSError:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
