"""Declarative application configuration shared by all CLI subcommands."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .datagen import ExtractionConfig
from .executor import ExecutorConfig
from .ntriples import IngestConfig


class ConfigError(Exception):
    """Unusable configuration (bad values or missing referenced files)."""


@dataclass(frozen=True)
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    page_size: int = 100

    def to_dict(self) -> dict:
        return {"host": self.host, "port": self.port, "page_size": self.page_size}

    @classmethod
    def from_dict(cls, d: dict) -> "ServerConfig":
        return cls(
            host=d.get("host", "127.0.0.1"),
            port=d.get("port", 8765),
            page_size=d.get("page_size", 100),
        )


@dataclass(frozen=True)
class AppConfig:
    """Paths plus per-module settings; round-trips through JSON unchanged."""

    store_path: str | None = None
    corpus_path: str | None = None
    index_path: str | None = None
    registry_path: str | None = None
    lexicon_path: str | None = None
    ingest: IngestConfig = field(default_factory=IngestConfig)
    executor: ExecutorConfig = field(default_factory=ExecutorConfig)
    server: ServerConfig = field(default_factory=ServerConfig)
    datagen: ExtractionConfig = field(default_factory=ExtractionConfig)

    def to_dict(self) -> dict:
        return {
            "store_path": self.store_path,
            "corpus_path": self.corpus_path,
            "index_path": self.index_path,
            "registry_path": self.registry_path,
            "lexicon_path": self.lexicon_path,
            "ingest": self.ingest.to_dict(),
            "executor": self.executor.to_dict(),
            "server": self.server.to_dict(),
            "datagen": self.datagen.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AppConfig":
        return cls(
            store_path=d.get("store_path"),
            corpus_path=d.get("corpus_path"),
            index_path=d.get("index_path"),
            registry_path=d.get("registry_path"),
            lexicon_path=d.get("lexicon_path"),
            ingest=IngestConfig.from_dict(d.get("ingest", {})),
            executor=ExecutorConfig.from_dict(d.get("executor", {})),
            server=ServerConfig.from_dict(d.get("server", {})),
            datagen=ExtractionConfig.from_dict(d.get("datagen", {})),
        )

    @classmethod
    def load(cls, path: str | Path) -> "AppConfig":
        base = Path(path).parent
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        config = cls.from_dict(raw)
        return config.resolved_against(base)

    def resolved_against(self, base: Path) -> "AppConfig":
        """Make relative paths relative to the config file location."""

        def resolve(p: str | None) -> str | None:
            if p is None:
                return None
            candidate = Path(p)
            return str(candidate if candidate.is_absolute() else base / candidate)

        return AppConfig(
            store_path=resolve(self.store_path),
            corpus_path=resolve(self.corpus_path),
            index_path=resolve(self.index_path),
            registry_path=resolve(self.registry_path),
            lexicon_path=resolve(self.lexicon_path),
            ingest=self.ingest,
            executor=self.executor,
            server=self.server,
            datagen=self.datagen,
        )

    def require(self, *names: str) -> None:
        """Validate that the named paths are set and exist on disk."""
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"config is missing {name}")
            if not Path(value).exists():
                raise ConfigError(f"{name} points to a missing file: {value}")
