"""Server configuration.

Model identifiers select implementations at startup:

- diffusion_model: "procedural" (built-in, deterministic, no weights) or
  "diffusers:<checkpoint>" to wrap a Stable-Diffusion-class pipeline.
- controlnet_model: "builtin-edge" for the procedural conditioner or
  "diffusers:<checkpoint>" for a ControlNet edge checkpoint.
- llm_model: "template" (built-in) or "transformers:<checkpoint>".

Checkpoint choice is deployment configuration, not code; the procedural
models keep the protocol fully testable without downloading weights.
"""

from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class ServerConfig:
    diffusion_model: str = "procedural"
    controlnet_model: str = "builtin-edge"
    llm_model: str = "template"
    device: str = "cpu"
    max_concurrency: int = 2
    max_queue: int = 16
    queue_timeout_s: float = 30.0
    port: int = 8531

    def __post_init__(self):
        if self.max_concurrency < 1:
            raise ValueError(f"max_concurrency must be >= 1, got {self.max_concurrency}")
        if self.max_queue < 0:
            raise ValueError(f"max_queue must be >= 0, got {self.max_queue}")

    @classmethod
    def from_env(cls, **overrides) -> "ServerConfig":
        env = os.environ
        fields = dict(
            diffusion_model=env.get("MESHPROMPT_BACKEND_DIFFUSION", "procedural"),
            controlnet_model=env.get("MESHPROMPT_BACKEND_CONTROLNET", "builtin-edge"),
            llm_model=env.get("MESHPROMPT_BACKEND_LLM", "template"),
            device=env.get("MESHPROMPT_BACKEND_DEVICE", "cpu"),
            max_concurrency=int(env.get("MESHPROMPT_BACKEND_CONCURRENCY", "2")),
            max_queue=int(env.get("MESHPROMPT_BACKEND_QUEUE", "16")),
            port=int(env.get("MESHPROMPT_BACKEND_PORT", "8531")),
        )
        fields.update(overrides)
        return cls(**fields)
