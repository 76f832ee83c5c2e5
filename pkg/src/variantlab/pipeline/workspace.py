"""Isolated per-run workspaces.

Each agent run gets its own working directory so file edits in one run
cannot leak into another. The validator is provisioned fresh by default
so reproduction never depends on state a previous stage left behind.
"""

from __future__ import annotations

import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol


@dataclass(frozen=True)
class Workspace:
    root: Path
    checkout: Path


class WorkspaceDriver(Protocol):
    def provision(self, label: str) -> Workspace: ...

    def release(self, workspace: Workspace) -> None: ...


class LocalSandboxDriver:
    """Temp-directory workspaces, optionally seeded with a checkout copy."""

    def __init__(self, checkout_source: Path | None = None, root: Path | None = None):
        self._source = checkout_source
        self._root = root

    def provision(self, label: str) -> Workspace:
        safe = "".join(c if c.isalnum() or c in "-_" else "-" for c in label)[:60]
        base = Path(tempfile.mkdtemp(prefix=f"vlab-{safe}-", dir=self._root))
        checkout = base / "checkout"
        if self._source is not None:
            shutil.copytree(self._source, checkout, symlinks=True)
        else:
            checkout.mkdir()
        return Workspace(root=base, checkout=checkout)

    def release(self, workspace: Workspace) -> None:
        shutil.rmtree(workspace.root, ignore_errors=True)
