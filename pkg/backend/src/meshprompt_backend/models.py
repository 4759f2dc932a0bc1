"""Generation models behind the server endpoints.

The built-in models are procedural: they run a genuine iterative
denoising-style loop (``steps`` iterations, seeded, deterministic on a
device-independent integer PRNG) conditioned on the edge map, but use no
learned weights, so the full wire protocol is exercisable offline. Real
checkpoints are wrapped by the ``diffusers:``/``transformers:`` loaders,
which import their libraries lazily; which checkpoint to serve is purely
deployment configuration.
"""

from __future__ import annotations

import hashlib
import random

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    z = (x + _GOLDEN).astype(np.uint64)
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


def _noise_field(seed: int, tag: int, shape) -> np.ndarray:
    """Deterministic standard-ish noise in [-1, 1) from counter hashing."""
    n = int(np.prod(shape))
    counters = np.arange(n, dtype=np.uint64) ^ np.uint64(seed & (2**64 - 1)) ^ (np.uint64(tag) << np.uint64(40))
    with np.errstate(over="ignore"):
        bits = _splitmix64(counters)
    vals = (bits >> np.uint64(11)).astype(np.float64) / float(2**53)
    return (2.0 * vals - 1.0).reshape(shape)


class ProceduralDiffusionModel:
    """Weight-free stand-in for an edge-conditioned diffusion pipeline.

    Builds a smooth seeded color field as the denoising target, darkens it
    at the conditioning edges (scaled by conditioning_scale), and runs
    ``steps`` noise-annealing iterations from a seeded noise start. Output
    is a pure function of (edge map, prompt, seed, steps, scales).
    """

    name = "procedural"

    def generate(self, edge: np.ndarray, prompt: str, seed: int, steps: int,
                 guidance_scale: float, conditioning_scale: float) -> np.ndarray:
        h, w = edge.shape
        digest = hashlib.sha256(prompt.encode("utf-8")).digest()
        anchors = np.frombuffer(digest[:9], dtype=np.uint8).reshape(3, 3).astype(np.float64)

        yy, xx = np.mgrid[0:h, 0:w]
        phase = np.frombuffer(digest[9:13], dtype=np.uint8).astype(np.float64) / 255.0
        field = (
            np.sin(2.0 * np.pi * (xx / w * (1 + phase[0]) + phase[1]))
            + np.cos(2.0 * np.pi * (yy / h * (1 + phase[2]) + phase[3]))
        ) / 4.0 + 0.5  # smooth in [0, 1]
        contrast = min(2.0, 0.5 + guidance_scale / 10.0)
        field = np.clip((field - 0.5) * contrast + 0.5, 0.0, 1.0)

        target = (
            anchors[0][None, None, :] * (1.0 - field)[..., None]
            + anchors[1][None, None, :] * field[..., None]
        )
        shade = np.clip(1.0 - 0.85 * min(conditioning_scale, 1.0), 0.0, 1.0)
        target[edge == 255] = target[edge == 255] * shade + anchors[2][None, :] * 0.05

        z = 128.0 + 64.0 * _noise_field(seed, 0, (h, w, 3))
        for t in range(steps, 0, -1):
            sigma = 48.0 * t / steps
            z = z + (target - z) / t + sigma * _noise_field(seed, t, (h, w, 3)) * 0.25
        return np.clip(np.rint(z), 0, 255).astype(np.uint8)


_SETTINGS = (
    "in a quiet harbor town", "on a windswept ridge", "inside a bright studio",
    "at the edge of a pine forest", "along a rain-soaked boulevard",
    "in a terraced garden", "on a gravel riverbank", "under a motorway overpass",
    "in an open wheat field", "beside a frozen lake",
)
_WEATHER = (
    "under low silver clouds", "in hard noon light", "during a light drizzle",
    "at golden hour", "just after snowfall", "in drifting fog",
    "beneath a clear violet dusk", "in gusty spring air",
)
_COLORS = (
    "with warm ochre tones", "in cool blue-gray hues", "with saturated primary colors",
    "in muted earth tones", "with neon accents", "in soft pastel shades",
)


class TemplateLanguageModel:
    """Deterministic scene-description generator used in place of an LLM."""

    name = "template"

    def describe(self, instruction: str, seed: int, max_tokens: int) -> str:
        digest = hashlib.sha256(f"{seed}|{instruction}".encode("utf-8")).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        sentence = (
            f"A scene {rng.choice(_SETTINGS)} {rng.choice(_WEATHER)}, "
            f"{rng.choice(_COLORS)}."
        )
        tokens = sentence.split()
        if max_tokens < len(tokens):
            tokens = tokens[:max_tokens]
        return " ".join(tokens)


class DiffusersControlNetModel:
    """Wrapper for a real ControlNet-conditioned Stable-Diffusion pipeline.

    Requires the ``diffusers``/``torch`` stack and downloaded checkpoints;
    selected with diffusion_model = "diffusers:<checkpoint>" and
    controlnet_model = "diffusers:<checkpoint>".
    """

    def __init__(self, checkpoint: str, controlnet_checkpoint: str, device: str):
        try:
            import torch
            from diffusers import ControlNetModel, StableDiffusionControlNetPipeline
        except ImportError as exc:  # pragma: no cover - deployment-only path
            raise RuntimeError(
                "diffusers backend requested but the diffusers/torch stack is not installed"
            ) from exc
        controlnet = ControlNetModel.from_pretrained(controlnet_checkpoint)
        self._pipe = StableDiffusionControlNetPipeline.from_pretrained(
            checkpoint, controlnet=controlnet
        ).to(device)
        self._torch = torch
        self.name = f"diffusers:{checkpoint}"

    def generate(self, edge, prompt, seed, steps, guidance_scale, conditioning_scale):  # pragma: no cover
        from PIL import Image

        h, w = edge.shape
        conditioning = Image.fromarray(np.stack([edge] * 3, axis=-1))
        generator = self._torch.Generator(device=self._pipe.device).manual_seed(seed)
        out = self._pipe(
            prompt,
            image=conditioning,
            num_inference_steps=steps,
            guidance_scale=guidance_scale,
            controlnet_conditioning_scale=float(conditioning_scale),
            generator=generator,
            height=h,
            width=w,
        ).images[0]
        return np.asarray(out.convert("RGB"), dtype=np.uint8)


class TransformersLanguageModel:
    """Wrapper for a real causal language model served at /describe."""

    def __init__(self, checkpoint: str, device: str):
        try:
            from transformers import pipeline
        except ImportError as exc:  # pragma: no cover - deployment-only path
            raise RuntimeError(
                "transformers backend requested but transformers is not installed"
            ) from exc
        self._pipe = pipeline("text-generation", model=checkpoint, device_map=device)
        self.name = f"transformers:{checkpoint}"

    def describe(self, instruction, seed, max_tokens):  # pragma: no cover
        import torch

        torch.manual_seed(seed)
        out = self._pipe(instruction, max_new_tokens=max_tokens, do_sample=True)
        return out[0]["generated_text"][len(instruction):].strip()


def load_diffusion_model(config):
    if config.diffusion_model == "procedural":
        return ProceduralDiffusionModel()
    if config.diffusion_model.startswith("diffusers:"):
        if not config.controlnet_model.startswith("diffusers:"):
            raise ValueError("diffusers diffusion model needs a diffusers controlnet checkpoint")
        return DiffusersControlNetModel(
            config.diffusion_model.split(":", 1)[1],
            config.controlnet_model.split(":", 1)[1],
            config.device,
        )
    raise ValueError(f"unknown diffusion model {config.diffusion_model!r}")


def load_language_model(config):
    if config.llm_model == "template":
        return TemplateLanguageModel()
    if config.llm_model.startswith("transformers:"):
        return TransformersLanguageModel(config.llm_model.split(":", 1)[1], config.device)
    raise ValueError(f"unknown language model {config.llm_model!r}")
