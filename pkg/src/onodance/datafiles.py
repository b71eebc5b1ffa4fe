"""Locating and reading the versioned data files shipped with the package.

The environment variable ONOMA_DATA_DIR, when set, names a directory searched
before the packaged defaults, so individual files can be overridden without
reinstalling.
"""
from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

ENV_VAR = "ONOMA_DATA_DIR"


def data_path(name: str) -> Path:
    """Resolve a data file name to a concrete path."""
    override = os.environ.get(ENV_VAR)
    if override:
        candidate = Path(override) / name
        if candidate.is_file():
            return candidate
    packaged = resources.files("onodance") / "data" / name
    return Path(str(packaged))


def read_text(name: str) -> str:
    return data_path(name).read_text(encoding="utf-8")


def read_tsv(name: str) -> tuple[str, list[list[str]]]:
    """Read a tab-separated data file.

    Returns (version, rows). The version comes from a leading
    ``# version: <id>`` comment; other ``#`` lines and blanks are skipped.
    """
    version = "unversioned"
    rows = []
    for line in read_text(name).splitlines():
        line = line.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if body.lower().startswith("version:"):
                version = body.split(":", 1)[1].strip()
            continue
        rows.append(line.split("\t"))
    return version, rows
