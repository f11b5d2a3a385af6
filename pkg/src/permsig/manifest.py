"""Run manifests: enough recorded state to replay any command bit-for-bit.

No wall-clock or OS entropy appears anywhere in the pipeline, so replaying
the recorded argv reproduces byte-identical primary outputs.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

TOOL_NAME = "permsig"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def dataset_digest(data_path, schema_path) -> str:
    return f"{file_digest(data_path)}:{file_digest(schema_path)}"


def write_manifest(path, command: str, argv: list[str], options: dict,
                   input_digests: dict, outputs: list) -> None:
    from . import __version__

    manifest = {
        "tool": TOOL_NAME,
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "options": options,
        "input_digests": dict(input_digests),
        "outputs": [str(o) for o in outputs],
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
