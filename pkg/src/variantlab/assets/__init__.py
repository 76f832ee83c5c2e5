"""Bundled prompt texts and replayable fixtures.

Prompt files are versioned as a set: PROMPT_VERSION changes whenever any
prompt text changes, and cached pre-analyses are keyed on it so a prompt
edit invalidates stale cache entries.
"""

from __future__ import annotations

import json
from importlib import resources
from typing import Any

PROMPT_VERSION = "v1"


def load_prompt(name: str) -> str:
    ref = resources.files("variantlab.assets") / "prompts" / f"{name}.txt"
    return ref.read_text(encoding="utf-8")


def load_fixture(name: str) -> dict[str, Any]:
    ref = resources.files("variantlab.assets") / "fixtures" / f"{name}.json"
    return json.loads(ref.read_text(encoding="utf-8"))
