"""
Versioned, byte-stable checkpoint container.

A checkpoint is an uncompressed zip archive holding `manifest.json` and one `.npy` entry per
tensor. Entries are written in sorted order with a fixed timestamp and sorted JSON keys, so the
same content always produces the same bytes.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path
from typing import Any

import numpy as np

from gestalt.errors import MissingPathError, ParseError

CHECKPOINT_FORMAT_VERSION = 1
MANIFEST_ENTRY = "manifest.json"
TENSOR_PREFIX = "tensors/"
_FIXED_DATE = (1980, 1, 1, 0, 0, 0)


def _entry(name: str) -> zipfile.ZipInfo:
    info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    info.create_system = 3
    return info


def checkpoint_bytes(tensors: dict[str, np.ndarray], manifest: dict[str, Any]) -> bytes:
    document = {"format_version": CHECKPOINT_FORMAT_VERSION, **manifest, "tensors": sorted(tensors)}
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w") as archive:
        archive.writestr(_entry(MANIFEST_ENTRY), json.dumps(document, sort_keys=True, indent=2))
        for name in sorted(tensors):
            array_buffer = io.BytesIO()
            np.lib.format.write_array(array_buffer, np.ascontiguousarray(tensors[name]), allow_pickle=False)
            archive.writestr(_entry(f"{TENSOR_PREFIX}{name}.npy"), array_buffer.getvalue())
    return buffer.getvalue()


def save_checkpoint(path: Path, tensors: dict[str, np.ndarray], manifest: dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_bytes(tensors, manifest))


def load_checkpoint(path: Path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    """Returns (tensors, manifest). The manifest still carries format_version and the tensor list."""
    if not path.exists():
        raise MissingPathError(path, "checkpoint")
    try:
        with zipfile.ZipFile(path) as archive:
            manifest = json.loads(archive.read(MANIFEST_ENTRY))
            if manifest.get("format_version") != CHECKPOINT_FORMAT_VERSION:
                raise ParseError(path, 0, f"unsupported checkpoint format {manifest.get('format_version')}")
            tensors = {
                name: np.lib.format.read_array(io.BytesIO(archive.read(f"{TENSOR_PREFIX}{name}.npy")), allow_pickle=False)
                for name in manifest["tensors"]
            }
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as e:
        raise ParseError(path, 0, f"not a gestalt checkpoint: {e}") from None
    return tensors, manifest
