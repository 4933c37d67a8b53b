"""Configuration files and the shipped role/prompt libraries.

A configuration file is YAML with these top-level keys (all optional):

``role_library``
    Name of a shipped role set: ``code``, ``math``, ``general`` or ``nine_roles``.
``roles``
    Explicit list of roles (``name``, ``prompt``, ``may_terminate``, ``cost``,
    ``description``). Replaces the library roles when both are given.
``system_prompt``
    Template with ``{prev_nodes}`` and ``{next_avail_nodes}`` placeholders.
``engine``
    ``EngineConfig`` fields, with a nested ``reward`` mapping.
``llm``
    ``LlmSettings`` fields for the HTTP backend.

Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .agents.http import LlmSettings
from .agents.protocol import placeholders, REQUIRED_PLACEHOLDERS
from .core import EngineConfig, RoleSet, RoleSpec, validate_role_set
from .errors import ConfigError, MissingPlaceholder

LIBRARIES = ("code", "math", "general", "nine_roles")
TOP_LEVEL_KEYS = {"role_library", "roles", "system_prompt", "engine", "llm"}


@dataclass(frozen=True)
class RoleLibrary:
    name: str
    system_prompt: str
    roles: RoleSet


@dataclass(frozen=True)
class Settings:
    roles: RoleSet
    system_prompt: str
    engine: EngineConfig = field(default_factory=EngineConfig)
    llm: LlmSettings = field(default_factory=LlmSettings)


def read_yaml(path: str | os.PathLike[str]) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc


def load_library(name: str) -> RoleLibrary:
    if name not in LIBRARIES:
        raise ConfigError(f"unknown role library {name!r}; choose from {', '.join(LIBRARIES)}")
    text = resources.files("priorflow.data.prompts").joinpath(f"{name}.yaml").read_text()
    doc = yaml.safe_load(text)
    roles = RoleSet.from_list(doc["roles"])
    return RoleLibrary(name, doc["system"], roles)


def check_template(template: str) -> None:
    fields = placeholders(template)
    for p in REQUIRED_PLACEHOLDERS:
        if p not in fields:
            raise MissingPlaceholder(f"system prompt lacks {{{p}}}")


def settings_from_dict(doc: Mapping[str, Any] | None) -> Settings:
    doc = doc or {}
    if not isinstance(doc, Mapping):
        raise ConfigError("configuration must be a mapping at the top level")
    unknown = set(doc) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {sorted(unknown)}")

    library = load_library(doc.get("role_library", "code"))
    roles = library.roles
    if "roles" in doc:
        if not isinstance(doc["roles"], list):
            raise ConfigError("'roles' must be a list")
        roles = validate_role_set([RoleSpec.from_dict(r) for r in doc["roles"]])
    system_prompt = doc.get("system_prompt", library.system_prompt)
    check_template(system_prompt)

    try:
        engine = EngineConfig.from_dict(doc.get("engine") or {})
        llm = LlmSettings.from_dict(doc.get("llm") or {})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    engine.reward.check_roles(roles)
    return Settings(roles, system_prompt, engine, llm)


def load_settings(path: str | os.PathLike[str] | None = None) -> Settings:
    return settings_from_dict(read_yaml(path) if path is not None else {})


def override_engine(engine: EngineConfig, **changes: Any) -> EngineConfig:
    """Apply non-None overrides (command-line flags win over file values)."""
    changes = {k: v for k, v in changes.items() if v is not None}
    return replace(engine, **changes) if changes else engine
