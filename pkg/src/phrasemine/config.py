"""Key=value config files for the CLI.

Every flag has a config-file equivalent under the same name with dashes
allowed (e.g. ``cache-size = 200000``). Flags override the file; the file
overrides defaults. Environment variables PHRASEMINE_BACKEND_URL and
PHRASEMINE_SEED sit between flags and the file.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError


def read_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip().strip('"').strip("'")
        if not key:
            raise ConfigError(f"{path}:{line_no}: empty key")
        values[key] = value
    return values
