"""Run configuration: tuned defaults, config-file loading, client wiring.

Defaults follow the evaluation setup this engine targets: chunks of 3
lines with 1 probe-selected chunk, 15 results per retrieval path, top 10
kept after reranking, 48 generated tokens at temperature 0 within a
2048-token input budget.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .clients import EchoGenerator, OverlapPicker, StubEmbedder, StubProbe
from .pipeline import GenerationConfig, PipelineClients
from .retrieve import ALL_PATHS
from .wire import (
    WireEmbedderClient,
    WireGeneratorClient,
    WirePickerClient,
    WireProbeClient,
)

CONFIG_VERSION = 1
STUB_ENDPOINT = "stub"
ENDPOINT_ENV_VAR = "CODERAG_LM_ENDPOINT"


@dataclass(frozen=True)
class RunConfig:
    f: int = 3  # chunk length in lines
    m: int = 8  # probe generation steps
    g: int = 1  # probe-selected chunks
    j: int = 15  # results per retrieval path
    u: int = 10  # knowledge pieces kept after reranking
    w: int = 3  # rerank window size
    max_new_tokens: int = 48
    temperature: float = 0.0
    max_input_tokens: int = 2048
    paths: tuple[str, ...] = ALL_PATHS
    probe_endpoint: str = STUB_ENDPOINT
    embed_endpoint: str = STUB_ENDPOINT
    pick_endpoint: str = STUB_ENDPOINT
    generate_endpoint: str = STUB_ENDPOINT
    rerank_template_path: str = ""
    embed_dim: int = 64
    seed: int = 0
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)

    def __post_init__(self) -> None:
        for name in ("f", "m", "g", "j", "u", "w"):
            value = getattr(self, name)
            minimum = 0 if name == "g" else 1
            if value < minimum:
                raise ValueError(f"{name} must be >= {minimum}, got {value}")
        if self.w < 2:
            raise ValueError("window size w must be >= 2")
        if not self.u < 2 * self.j + 1:
            raise ValueError(f"u must be < 2j+1 (u={self.u}, j={self.j})")
        unknown = set(self.paths) - set(ALL_PATHS)
        if unknown:
            raise ValueError(f"unknown retrieval paths: {sorted(unknown)}")
        GenerationConfig(self.max_new_tokens, self.temperature, self.max_input_tokens)

    def generation(self) -> GenerationConfig:
        return GenerationConfig(
            max_new_tokens=self.max_new_tokens,
            temperature=self.temperature,
            max_input_tokens=self.max_input_tokens,
        )

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["paths"] = list(self.paths)
        out["version"] = CONFIG_VERSION
        return out


def load_config(path: str | Path) -> RunConfig:
    """Read a versioned JSON config file; missing keys take defaults."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    version = raw.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ValueError(f"unsupported config version {version}")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "paths" in raw:
        raw["paths"] = tuple(raw["paths"])
    return replace(RunConfig(), **raw)


def _endpoint(configured: str) -> str:
    """Explicit endpoint, else the environment fallback, else the stub."""
    if configured and configured != STUB_ENDPOINT:
        return configured
    return os.environ.get(ENDPOINT_ENV_VAR, "") or STUB_ENDPOINT


def make_clients(config: RunConfig) -> PipelineClients:
    probe_ep = _endpoint(config.probe_endpoint)
    embed_ep = _endpoint(config.embed_endpoint)
    pick_ep = _endpoint(config.pick_endpoint)
    gen_ep = _endpoint(config.generate_endpoint)

    template = None
    if config.rerank_template_path:
        template = Path(config.rerank_template_path).read_text("utf-8")

    return PipelineClients(
        probe=StubProbe() if probe_ep == STUB_ENDPOINT else WireProbeClient(probe_ep),
        embedder=(
            StubEmbedder(dim=config.embed_dim)
            if embed_ep == STUB_ENDPOINT
            else WireEmbedderClient(embed_ep)
        ),
        picker=(
            OverlapPicker()
            if pick_ep == STUB_ENDPOINT
            else WirePickerClient(pick_ep, template=template)
        ),
        generator=(
            EchoGenerator() if gen_ep == STUB_ENDPOINT else WireGeneratorClient(gen_ep)
        ),
    )


def clients_are_thread_safe(clients: PipelineClients) -> bool:
    return all(
        getattr(c, "thread_safe", False)
        for c in (clients.probe, clients.embedder, clients.picker, clients.generator)
    )
