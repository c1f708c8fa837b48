"""Bundled fixture files (scene descriptions and fiducial CSVs)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled fixture; raises FileNotFoundError if absent."""
    path = Path(str(resources.files(__package__) / name))
    if not path.is_file():
        raise FileNotFoundError(f"no bundled fixture named {name!r}")
    return path


def resolve_scene(name_or_path: str) -> Path:
    """A scene argument is a filesystem path first, a bundled fixture second."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    return fixture_path(name_or_path)
