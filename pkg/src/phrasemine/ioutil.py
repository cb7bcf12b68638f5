"""Output helpers: atomic file writes and the per-output config echo.

Every pipeline output is written to a temporary file in the same directory
and renamed into place on success, so interrupted runs never leave partial
outputs behind and every subcommand is restartable.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, TextIO


@contextmanager
def atomic_writer(path: str | Path) -> Iterator[TextIO]:
    """Write to `path` atomically; '-' streams to stdout instead."""
    if str(path) == "-":
        yield sys.stdout
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(
        dir=path.parent, prefix=f".{path.name}.", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fp:
            yield fp
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def write_config_echo(output_path: str | Path, resolved: dict) -> None:
    """Record the effective configuration alongside an output file."""
    if str(output_path) == "-":
        return
    echo_path = Path(str(output_path) + ".config.json")
    with atomic_writer(echo_path) as fp:
        json.dump(resolved, fp, ensure_ascii=False, sort_keys=True, indent=2)
        fp.write("\n")
