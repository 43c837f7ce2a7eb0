"""Service configuration: thresholds, scales, bind address, auth tokens."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import (
    DEFAULT_BOTTOM_THRESHOLD,
    DEFAULT_SCALE_K_PER_MS,
    DEFAULT_SCALE_T_PER_MS,
)
from .errors import ForumTraceError
from .repository import Principal, Role
from .sync import DEFAULT_MAX_CLOCK_SKEW_MS

DEFAULT_IDLE_CUTOFF_MS = 1_800_000  # 30 minutes


@dataclass
class ServiceConfig:
    db_path: str = "forumtrace.db"
    host: str = "127.0.0.1"
    port: int = 8765
    bottom_threshold: float = DEFAULT_BOTTOM_THRESHOLD
    idle_cutoff_ms: int = DEFAULT_IDLE_CUTOFF_MS
    max_clock_skew_ms: int = DEFAULT_MAX_CLOCK_SKEW_MS
    scale_k_per_ms: float = DEFAULT_SCALE_K_PER_MS
    scale_t_per_ms: float = DEFAULT_SCALE_T_PER_MS
    tokens: dict[str, Principal] = field(default_factory=dict)

    def principal_for(self, token: str) -> Principal | None:
        return self.tokens.get(token)


class ConfigError(ForumTraceError):
    """The configuration file is missing or malformed."""


def config_from_doc(doc: dict) -> ServiceConfig:
    try:
        tokens = {
            token: Principal(role=Role(entry["role"]), actor_id=entry.get("actor_id"))
            for token, entry in doc.get("tokens", {}).items()
        }
        return ServiceConfig(
            db_path=doc.get("db_path", "forumtrace.db"),
            host=doc.get("host", "127.0.0.1"),
            port=int(doc.get("port", 8765)),
            bottom_threshold=float(doc.get("bottom_threshold", DEFAULT_BOTTOM_THRESHOLD)),
            idle_cutoff_ms=int(doc.get("idle_cutoff_ms", DEFAULT_IDLE_CUTOFF_MS)),
            max_clock_skew_ms=int(
                doc.get("max_clock_skew_ms", DEFAULT_MAX_CLOCK_SKEW_MS)
            ),
            scale_k_per_ms=float(doc.get("scale_k_per_ms", DEFAULT_SCALE_K_PER_MS)),
            scale_t_per_ms=float(doc.get("scale_t_per_ms", DEFAULT_SCALE_T_PER_MS)),
            tokens=tokens,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config document: {exc}") from exc


def load_config(path: str | Path) -> ServiceConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_doc(doc)
