"""JSON run-configuration files with full defaulting.

A config file is a JSON object whose keys are RunConfig fields; the
nested "model", "task" and "teacher" objects take ModelConfig /
TaskConfig / TeacherConfig fields.  Everything is optional - missing
keys take the documented defaults - and unknown keys are rejected so
typos cannot silently change a run.
"""

from __future__ import annotations

import dataclasses
import json

from .errors import ConfigError
from .model import ModelConfig
from .training import RunConfig, TaskConfig, TeacherConfig


def _build(cls, payload: dict, where: str):
    if not isinstance(payload, dict):
        raise ConfigError(f"{where}: expected an object, got {type(payload).__name__}")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(payload) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}; allowed: {sorted(allowed)}")
    kwargs = dict(payload)
    for key, value in kwargs.items():
        if isinstance(value, list):
            kwargs[key] = tuple(value)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def run_config_from_dict(payload: dict) -> RunConfig:
    if not isinstance(payload, dict):
        raise ConfigError("config root must be a JSON object")
    payload = dict(payload)
    nested = {}
    if "model" in payload:
        nested["model"] = _build(ModelConfig, payload.pop("model"), "model")
    if "task" in payload:
        nested["task"] = _build(TaskConfig, payload.pop("task"), "task")
    if "teacher" in payload:
        nested["teacher"] = _build(TeacherConfig, payload.pop("teacher"), "teacher")
    cfg = _build(RunConfig, payload, "run config")
    return dataclasses.replace(cfg, **nested) if nested else cfg


def load_run_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return run_config_from_dict(payload)


def config_template() -> dict:
    """Complete config with every key at its default value."""
    cfg = RunConfig()

    def as_dict(obj):
        return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}

    payload = as_dict(cfg)
    payload["model"] = as_dict(cfg.model)
    payload["task"] = as_dict(cfg.task)
    payload["teacher"] = as_dict(cfg.teacher)
    return payload
