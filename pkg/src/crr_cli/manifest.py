from __future__ import annotations

import hashlib
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Mapping

DIST_NAME = "clustered-crr"


def tool_version() -> str:
    try:
        return version(DIST_NAME)
    except PackageNotFoundError:
        return "0+unknown"


def file_digest(path: str | Path, chunk: int = 1 << 20) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while block := fh.read(chunk):
            h.update(block)
    return h.hexdigest()


def _wall_clock() -> str:
    # SOURCE_DATE_EPOCH pins the stamp for byte-identical reruns
    epoch = os.getenv("SOURCE_DATE_EPOCH")
    if epoch and epoch.strip().isdigit():
        moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        moment = datetime.now(tz=timezone.utc)
    return moment.isoformat(timespec="seconds")


@dataclass(frozen=True)
class RunManifest:
    command: str
    flags: dict[str, Any]
    seed: int | None = None
    inputs: dict[str, str] = field(default_factory=dict)
    version: str = field(default_factory=tool_version)
    wall_clock: str = field(default_factory=_wall_clock)

    @classmethod
    def for_run(
        cls,
        command: str,
        flags: Mapping[str, Any],
        seed: int | None = None,
        inputs: Mapping[str, str | Path] | None = None,
    ) -> "RunManifest":
        """Manifest for one command; ``inputs`` maps a role to a path that gets hashed."""
        digests = {role: file_digest(path) for role, path in (inputs or {}).items()}
        clean = {k: (v.value if hasattr(v, "value") else v) for k, v in flags.items()}
        clean = {k: (str(v) if isinstance(v, Path) else v) for k, v in clean.items()}
        return cls(command=command, flags=clean, seed=seed, inputs=digests)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def reproducible_view(self) -> dict[str, Any]:
        """Everything that determines the numbers; the wall clock is left out."""
        out = self.to_dict()
        out.pop("wall_clock")
        return out
