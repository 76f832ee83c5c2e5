"""Loader for the bundled end-to-end walkthrough fixture.

The fixture drives one seed through every pipeline shape with a scripted
backend and a scripted execution runner, so the whole system can be
exercised deterministically: same scripts, same simulated clock, same
persisted records on every replay. Tests and the demo service mode both
build their wiring from here.

Fixture conventions:
  - "{{name}}" inside any string is replaced by fixture strings[name],
    so large shared texts (the PoC) are stored once.
  - a turn may carry "text_json" instead of "text"; the loader expands
    placeholders inside the object and serializes it, which keeps
    JSON-in-JSON escaping out of the authored file.
  - checkout files are sparse: chunks of real lines pinned at absolute
    line numbers, blank-filled between, so code sits at the line numbers
    the transcripts talk about.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from variantlab import assets
from variantlab.corpus.fetch import ArtifactBundle, FixtureFetcher
from variantlab.corpus.models import Seed
from variantlab.corpus.ingest import parse_export
from variantlab.executor.classify import RawRunResult
from variantlab.executor.run import BuildMatrix, ScriptedRunner, poc_fingerprint
from variantlab.pipeline.backend import ScriptedBackend

_PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")


def _expand(value: Any, strings: dict[str, str]) -> Any:
    if isinstance(value, str):
        return _PLACEHOLDER_RE.sub(lambda m: strings[m.group(1)], value)
    if isinstance(value, list):
        return [_expand(item, strings) for item in value]
    if isinstance(value, dict):
        return {key: _expand(item, strings) for key, item in value.items()}
    return value


@dataclass(frozen=True)
class WalkthroughFixture:
    raw: dict[str, Any]

    @property
    def seed_export(self) -> str:
        return self.raw["seed_export"] + "\n"

    def seed(self) -> Seed:
        seeds, rejections = parse_export(self.seed_export)
        if rejections or len(seeds) != 1:
            raise ValueError("walkthrough fixture must carry exactly one clean seed record")
        return seeds[0]

    def backend(self) -> ScriptedBackend:
        """A fresh scripted backend; replay cursors start at zero."""
        scripts: dict[str, list[dict[str, Any]]] = {}
        for key, turns in self.raw["scripts"].items():
            expanded: list[dict[str, Any]] = []
            for turn in turns:
                turn = dict(_expand(turn, self.raw["strings"]))
                if "text_json" in turn:
                    turn["text"] = json.dumps(turn.pop("text_json"), indent=2)
                expanded.append(turn)
            scripts[key] = expanded
        return ScriptedBackend(scripts)

    def runner(self) -> ScriptedRunner:
        results: dict[str, RawRunResult] = {}
        for item in self.raw["executions"]:
            item = _expand(item, self.raw["strings"])
            results[poc_fingerprint(item["poc"], item["build"])] = RawRunResult(
                exit_code=item["exit_code"],
                signal=item["signal"],
                stdout=item["stdout"],
                stderr=item["stderr"],
                duration=float(item["duration"]),
            )
        return ScriptedRunner(results)

    def matrix(self) -> BuildMatrix:
        return BuildMatrix.from_dict(self.raw["matrix"])

    def fetcher(self) -> FixtureFetcher:
        art = self.raw["artifacts"]
        bundle = ArtifactBundle(
            discussion=art.get("discussion"),
            patches=art.get("patches"),
            review=art.get("review"),
            poc=art.get("poc"),
        )
        return FixtureFetcher({self.seed().source: bundle})

    def materialize_checkout(self, root: Path) -> Path:
        """Write the sparse checkout under root/checkout and return it."""
        checkout = Path(root) / "checkout"
        for spec in self.raw["checkout"]:
            target = checkout / spec["path"]
            target.parent.mkdir(parents=True, exist_ok=True)
            length = max(chunk["at"] + len(chunk["lines"]) - 1 for chunk in spec["chunks"])
            lines = [""] * length
            for chunk in spec["chunks"]:
                for offset, line in enumerate(chunk["lines"]):
                    lines[chunk["at"] - 1 + offset] = line
            target.write_text("\n".join(lines) + "\n")
        return checkout

    @property
    def poc(self) -> str:
        return self.raw["strings"]["poc"]


def load_walkthrough() -> WalkthroughFixture:
    return WalkthroughFixture(raw=assets.load_fixture("walkthrough"))
