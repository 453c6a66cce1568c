import hashlib
import json
import os
import re
import threading
from pathlib import Path
from typing import Any

TEXT_ENCODING = "utf-8"


def sanitize_file_part(file_part: str) -> str:
    """Keep only alphanumeric characters and dash, underscore. Replace dot and whitespace with underscore."""
    return re.sub(r"[^a-zA-Z0-9-_]", "", re.sub(r"[.\s]", "_", file_part))


def build_real_sub_path(base_path: Path, sub_path: Path | str) -> Path:
    """Combine base_path and sub_path, enforcing that the resulting path is a sub path of base_path."""
    full_path = base_path / sub_path
    if not is_real_subpath(full_path, base_path):
        raise ValueError(f"{sub_path} escapes the base path {base_path}")
    return full_path


def is_real_subpath(path: Path, base_path: Path):
    """Check if path is a real subpath of base_path."""
    path_resolved = path.resolve()
    base_path_resolved = base_path.resolve()
    return path_resolved != base_path_resolved and path_resolved.is_relative_to(base_path_resolved)


def compute_sha256(file_path: Path) -> str:
    sha256 = hashlib.sha256()
    with open(file_path, "rb") as file:
        while chunk := file.read(8192):
            sha256.update(chunk)
    return sha256.hexdigest()


def hash_json(data: Any) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace) of data."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode(TEXT_ENCODING)).hexdigest()


def write_text_atomic(path: Path, text: str) -> None:
    """Write text to path so that readers see either the old content or the complete new content."""
    path.parent.mkdir(parents=True, exist_ok=True)
    temporary_path = path.with_name(f".{path.name}.{os.getpid()}_{threading.get_ident()}.tmp")
    temporary_path.write_text(text, encoding=TEXT_ENCODING)
    os.replace(temporary_path, path)
