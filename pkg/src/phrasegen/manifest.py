"""Append-only run manifest with content-hashed artifacts, plus a lock
file so only one command mutates an output directory at a time."""

import hashlib
import json
import os
from contextlib import contextmanager
from pathlib import Path

MANIFEST_NAME = "manifest.jsonl"


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    def __init__(self, out_dir):
        self.path = Path(out_dir) / MANIFEST_NAME
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def record(self, stage, artifacts=None, **info):
        entry = {
            "index": self._next_index(),
            "stage": stage,
            "artifacts": {
                name: file_hash(p) for name, p in (artifacts or {}).items()
            },
            "info": info,
        }
        with open(self.path, "a") as f:
            f.write(json.dumps(entry, sort_keys=True) + "\n")
        return entry

    def entries(self):
        if not self.path.exists():
            return []
        return [json.loads(line) for line in self.path.read_text().splitlines()]

    def _next_index(self):
        return len(self.entries())


@contextmanager
def output_lock(out_dir):
    """One command at a time per output directory."""
    lock = Path(out_dir) / ".lock"
    lock.parent.mkdir(parents=True, exist_ok=True)
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RuntimeError(
            f"output directory {out_dir} is locked by another command "
            f"(remove {lock} if that command crashed)") from None
    try:
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def missing_artifact(name, path, producing_command):
    return FileNotFoundError(
        f"{name} not found at {path}; run `phrasegen {producing_command}` first")
