"""Small file helpers: atomic writes, JSON round-trips, digests.

All writers go through a write-to-temp-then-rename step so that a failed
run never leaves a partially written output behind.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write text to path atomically (temp file + rename), UTF-8, LF endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str | Path, obj: Any) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def sha256_of_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_of_json(obj: Any) -> str:
    """Digest of the canonical (sorted-keys) JSON encoding of obj."""
    return sha256_of_bytes(json.dumps(obj, sort_keys=True).encode("utf-8"))


def sha256_of_file(path: str | Path) -> str:
    with open(path, "rb") as fh:
        return sha256_of_bytes(fh.read())
