"""Service configuration (TOML file) and component wiring."""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..detox import DetoxConfig, GateScope
from ..gateway import (
    DEFAULT_EMBEDDING_DIM,
    EmbeddingMode,
    GenerationParams,
    MockGateway,
    ProviderScript,
    RemoteConfig,
    RemoteGateway,
)
from ..prompting import DEFAULT_TOKEN_BUDGET, load_bundled_template, load_template
from ..redaction import default_rules, load_rules
from ..safety_index import VectorIndex, load_index
from .manager import SessionManager
from .store import FileEventStore, MemoryEventStore

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """Config file missing, unparseable, or holding bad values."""


@dataclass(frozen=True)
class ProviderSettings:
    mode: str = "mock"  # "mock" or "remote"
    base_url: str = ""
    chat_model: str = "gpt-3.5-turbo-16k"
    embedding_model: str = "text-embedding-ada-002"
    api_key_env: str = "REPLYPLUS_API_KEY"
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    script_path: str = ""
    timeout_seconds: float = 30.0
    retry_attempts: int = 3


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8700
    auth_token: str = ""
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    alpha: float = 0.2
    k: int = 1
    max_attempts: int = 3
    scope: str = "whole_report"
    template_path: str = ""
    index_path: str = ""
    store_path: str = ""
    rules_path: str = ""
    token_budget: int = DEFAULT_TOKEN_BUDGET
    temperature: float = 0.7
    max_output_tokens: int = 2048

    def detox_config(self) -> DetoxConfig:
        try:
            scope = GateScope(self.scope)
        except ValueError as exc:
            raise ConfigError(f"unknown gate scope {self.scope!r}") from exc
        return DetoxConfig(alpha=self.alpha, k=self.k, max_attempts=self.max_attempts, scope=scope)


def parse_config(text: str) -> ServiceConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(exc)) from exc
    server = data.get("server", {})
    provider = data.get("provider", {})
    detox = data.get("detox", {})
    paths = data.get("paths", {})
    prompting = data.get("prompting", {})
    try:
        return ServiceConfig(
            host=server.get("host", "127.0.0.1"),
            port=int(server.get("port", 8700)),
            auth_token=server.get("auth_token", ""),
            provider=ProviderSettings(
                mode=provider.get("mode", "mock"),
                base_url=provider.get("base_url", ""),
                chat_model=provider.get("chat_model", "gpt-3.5-turbo-16k"),
                embedding_model=provider.get("embedding_model", "text-embedding-ada-002"),
                api_key_env=provider.get("api_key_env", "REPLYPLUS_API_KEY"),
                embedding_dim=int(provider.get("embedding_dim", DEFAULT_EMBEDDING_DIM)),
                script_path=provider.get("script_path", ""),
                timeout_seconds=float(provider.get("timeout_seconds", 30.0)),
                retry_attempts=int(provider.get("retry_attempts", 3)),
            ),
            alpha=float(detox.get("alpha", 0.2)),
            k=int(detox.get("k", 1)),
            max_attempts=int(detox.get("max_attempts", 3)),
            scope=detox.get("scope", "whole_report"),
            template_path=paths.get("template", ""),
            index_path=paths.get("index", ""),
            store_path=paths.get("store", ""),
            rules_path=paths.get("rules", ""),
            token_budget=int(prompting.get("token_budget", DEFAULT_TOKEN_BUDGET)),
            temperature=float(prompting.get("temperature", 0.7)),
            max_output_tokens=int(prompting.get("max_output_tokens", 2048)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ServiceConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _load_script(path: str) -> ProviderScript:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read provider script {path}: {exc}") from exc
    mode_raw = data.get("embedding_mode", "hash")
    try:
        mode = EmbeddingMode(mode_raw)
    except ValueError as exc:
        raise ConfigError(f"unknown embedding mode {mode_raw!r} in {path}") from exc
    table = {text: tuple(vec) for text, vec in data.get("table", {}).items()}
    return ProviderScript(
        completions=list(data.get("completions", [])), embedding_mode=mode, table=table
    )


def build_gateway(config: ServiceConfig):
    provider = config.provider
    if provider.mode == "mock":
        script = _load_script(provider.script_path) if provider.script_path else ProviderScript()
        return MockGateway(script=script, dim=provider.embedding_dim)
    if provider.mode == "remote":
        if not provider.base_url:
            raise ConfigError("provider.base_url required in remote mode")
        return RemoteGateway(
            RemoteConfig(
                base_url=provider.base_url,
                chat_model=provider.chat_model,
                embedding_model=provider.embedding_model,
                api_key_env=provider.api_key_env,
                timeout_seconds=provider.timeout_seconds,
                retry_attempts=provider.retry_attempts,
                embedding_dim=provider.embedding_dim,
            )
        )
    raise ConfigError(f"unknown provider mode {provider.mode!r}")


def resolve_rules(config: ServiceConfig):
    if config.rules_path:
        return load_rules(Path(config.rules_path).read_text(encoding="utf-8"))
    return default_rules()


def resolve_template(config: ServiceConfig):
    if config.template_path:
        return load_template(Path(config.template_path).read_text(encoding="utf-8"))
    return load_bundled_template()


def resolve_index(config: ServiceConfig, gateway) -> VectorIndex:
    if config.index_path and Path(config.index_path).exists():
        return load_index(config.index_path)
    if config.index_path:
        logger.warning("index file %s not found; gate runs with an empty index", config.index_path)
    return VectorIndex(dim=gateway.dim, entries=[])


def build_manager(config: ServiceConfig, **overrides) -> SessionManager:
    """Assemble a SessionManager from config; keyword overrides win.

    Override keys mirror the SessionManager constructor (gateway, index,
    template, rules, store, clock, id_factory) so tests can inject
    deterministic pieces.
    """
    gateway = overrides.pop("gateway", None) or build_gateway(config)
    rules = overrides.pop("rules", None)
    if rules is None:
        rules = resolve_rules(config)
    template = overrides.pop("template", None)
    if template is None:
        template = resolve_template(config)
    index = overrides.pop("index", None)
    if index is None:
        index = resolve_index(config, gateway)
    store = overrides.pop("store", None)
    if store is None:
        store = FileEventStore(config.store_path) if config.store_path else MemoryEventStore()
    return SessionManager(
        gateway=gateway,
        index=index,
        template=template,
        rules=rules,
        store=store,
        detox_config=config.detox_config(),
        params=GenerationParams(
            model_name=config.provider.chat_model,
            temperature=config.temperature,
            max_output_tokens=config.max_output_tokens,
        ),
        token_budget=config.token_budget,
        **overrides,
    )
