"""Pipeline configuration: one YAML file, env-var overrides for endpoints.

Schema (all sections optional unless noted):

    dataset_name: demo            # required
    mesh_root: meshes             # required; CAD paths are relative to it
    output_dir: out               # required unless --out is passed
    images_per_class: 2500
    base_seed: 0
    workers: 1
    render:
      width: 512
      height: 512
      focal_length_mm: 35.0
      sensor_width_mm: 32.0
    canny: {low: 100.0, high: 200.0, sigma: 1.0}
    prompt_template: "a photo of {w}"
    llm:
      mock: true                  # false requires endpoint
      endpoint: http://host:port/describe
      timeout_s: 30.0
      max_tokens: 64
      instruction: null           # optional instruction-template override
    diffusion:
      mock: true                  # false requires endpoint
      endpoint: http://host:port
      timeout_s: 120.0
      retries: 3
      backoff_s: 0.5
      steps: 30
      guidance_scale: 7.5
      conditioning_scale: 1.0
    viewpoint_rules:              # optional; "default" catches unlisted classes
      printer: {azimuth: front, elevation: top}
      default: {azimuth: all, elevation: all, theta_std: 0.1745, distance: [4.0, 8.0]}
    classes:                      # required, at least one
      - name: school bus
        keywords: [yellow, vehicle]
        cad_models: [bus/b1.obj, bus/b2.obj]   # at least one each
        rule: {azimuth: all, elevation: all}    # optional per-class override

Environment overrides (endpoints only): MESHPROMPT_DIFFUSION_ENDPOINT,
MESHPROMPT_LLM_ENDPOINT.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .sampling import ViewpointRule

ENV_DIFFUSION_ENDPOINT = "MESHPROMPT_DIFFUSION_ENDPOINT"
ENV_LLM_ENDPOINT = "MESHPROMPT_LLM_ENDPOINT"


@dataclass(frozen=True)
class ClassSpec:
    name: str
    cad_models: tuple[str, ...]
    keywords: tuple[str, ...] = ()


@dataclass(frozen=True)
class RenderSettings:
    width: int = 512
    height: int = 512
    focal_length_mm: float = 35.0
    sensor_width_mm: float = 32.0


@dataclass(frozen=True)
class CannySettings:
    low: float = 100.0
    high: float = 200.0
    sigma: float = 1.0


@dataclass(frozen=True)
class LLMSettings:
    mock: bool = True
    endpoint: str | None = None
    timeout_s: float = 30.0
    max_tokens: int = 64
    instruction: str | None = None


@dataclass(frozen=True)
class DiffusionSettings:
    mock: bool = True
    endpoint: str | None = None
    timeout_s: float = 120.0
    retries: int = 3
    backoff_s: float = 0.5
    steps: int = 30
    guidance_scale: float = 7.5
    conditioning_scale: float = 1.0


@dataclass(frozen=True)
class PipelineConfig:
    dataset_name: str
    mesh_root: Path
    output_dir: Path
    classes: tuple[ClassSpec, ...]
    images_per_class: int = 2500
    base_seed: int = 0
    workers: int = 1
    render: RenderSettings = field(default_factory=RenderSettings)
    canny: CannySettings = field(default_factory=CannySettings)
    prompt_template: str = "a photo of {w}"
    llm: LLMSettings = field(default_factory=LLMSettings)
    diffusion: DiffusionSettings = field(default_factory=DiffusionSettings)
    viewpoint_rules: dict[str, ViewpointRule] = field(default_factory=dict)


def _parse_rule(obj: dict, where: str) -> ViewpointRule:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: rule must be a mapping, got {type(obj).__name__}")
    kwargs = {}
    if "azimuth" in obj:
        kwargs["azimuth_mode"] = str(obj["azimuth"])
    if "elevation" in obj:
        kwargs["elevation_mode"] = str(obj["elevation"])
    if "theta_std" in obj:
        kwargs["theta_std"] = float(obj["theta_std"])
    if "distance" in obj:
        rng = obj["distance"]
        if not (isinstance(rng, (list, tuple)) and len(rng) == 2):
            raise ConfigError(f"{where}: distance must be [min, max]")
        kwargs["distance_range"] = (float(rng[0]), float(rng[1]))
    unknown = set(obj) - {"azimuth", "elevation", "theta_std", "distance"}
    if unknown:
        raise ConfigError(f"{where}: unknown rule keys {sorted(unknown)}")
    try:
        return ViewpointRule(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _section(data: dict, key: str) -> dict:
    value = data.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"section {key!r} must be a mapping")
    return value


def load_config(path, output_override=None) -> PipelineConfig:
    """Parse and validate a pipeline config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")

    for key in ("dataset_name", "mesh_root", "classes"):
        if key not in data:
            raise ConfigError(f"missing required key {key!r}")
    if output_override is None and "output_dir" not in data:
        raise ConfigError("missing required key 'output_dir' (or pass --out)")

    images_per_class = int(data.get("images_per_class", 2500))
    if images_per_class < 1:
        raise ConfigError(f"images_per_class must be >= 1, got {images_per_class}")
    workers = int(data.get("workers", 1))
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")

    raw_classes = data["classes"]
    if not isinstance(raw_classes, list) or not raw_classes:
        raise ConfigError("classes must be a non-empty list")
    rules: dict[str, ViewpointRule] = {}
    for name, obj in _section(data, "viewpoint_rules").items():
        rules[str(name)] = _parse_rule(obj, f"viewpoint_rules[{name}]")

    classes = []
    seen = set()
    for i, entry in enumerate(raw_classes):
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError(f"classes[{i}] needs a 'name'")
        name = str(entry["name"])
        if name in seen:
            raise ConfigError(f"duplicate class {name!r}")
        seen.add(name)
        cads = entry.get("cad_models") or []
        if not isinstance(cads, list) or not cads:
            raise ConfigError(f"class {name!r} needs at least one CAD model")
        keywords = tuple(str(k) for k in entry.get("keywords") or [])
        if "rule" in entry:
            rules[name] = _parse_rule(entry["rule"], f"classes[{i}].rule")
        classes.append(ClassSpec(name=name, cad_models=tuple(str(c) for c in cads), keywords=keywords))

    render_raw = _section(data, "render")
    render = RenderSettings(
        width=int(render_raw.get("width", 512)),
        height=int(render_raw.get("height", 512)),
        focal_length_mm=float(render_raw.get("focal_length_mm", 35.0)),
        sensor_width_mm=float(render_raw.get("sensor_width_mm", 32.0)),
    )
    if render.width < 3 or render.height < 3:
        raise ConfigError("render dimensions must be at least 3x3")

    canny_raw = _section(data, "canny")
    canny = CannySettings(
        low=float(canny_raw.get("low", 100.0)),
        high=float(canny_raw.get("high", 200.0)),
        sigma=float(canny_raw.get("sigma", 1.0)),
    )
    if not (0.0 <= canny.low <= canny.high <= 255.0) or canny.sigma < 0:
        raise ConfigError(f"bad canny settings: {canny}")

    llm_raw = _section(data, "llm")
    llm = LLMSettings(
        mock=bool(llm_raw.get("mock", True)),
        endpoint=os.environ.get(ENV_LLM_ENDPOINT) or llm_raw.get("endpoint"),
        timeout_s=float(llm_raw.get("timeout_s", 30.0)),
        max_tokens=int(llm_raw.get("max_tokens", 64)),
        instruction=llm_raw.get("instruction"),
    )
    diff_raw = _section(data, "diffusion")
    diffusion = DiffusionSettings(
        mock=bool(diff_raw.get("mock", True)),
        endpoint=os.environ.get(ENV_DIFFUSION_ENDPOINT) or diff_raw.get("endpoint"),
        timeout_s=float(diff_raw.get("timeout_s", 120.0)),
        retries=int(diff_raw.get("retries", 3)),
        backoff_s=float(diff_raw.get("backoff_s", 0.5)),
        steps=int(diff_raw.get("steps", 30)),
        guidance_scale=float(diff_raw.get("guidance_scale", 7.5)),
        conditioning_scale=float(diff_raw.get("conditioning_scale", 1.0)),
    )
    if diffusion.steps < 1:
        raise ConfigError(f"diffusion steps must be >= 1, got {diffusion.steps}")
    if not llm.mock and not llm.endpoint:
        raise ConfigError("llm.mock is false but no endpoint configured")
    if not diffusion.mock and not diffusion.endpoint:
        raise ConfigError("diffusion.mock is false but no endpoint configured")

    base_seed = int(data.get("base_seed", 0))
    prompt_template = str(data.get("prompt_template", "a photo of {w}"))

    mesh_root = Path(data["mesh_root"])
    if not mesh_root.is_absolute():
        mesh_root = path.parent / mesh_root
    out_dir = Path(output_override) if output_override else Path(data["output_dir"])
    if not out_dir.is_absolute():
        out_dir = path.parent / out_dir if output_override is None else out_dir

    known = {
        "dataset_name", "mesh_root", "output_dir", "images_per_class", "base_seed",
        "workers", "render", "canny", "prompt_template", "llm", "diffusion",
        "viewpoint_rules", "classes",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    return PipelineConfig(
        dataset_name=str(data["dataset_name"]),
        mesh_root=mesh_root,
        output_dir=out_dir,
        classes=tuple(classes),
        images_per_class=images_per_class,
        base_seed=base_seed,
        workers=workers,
        render=render,
        canny=canny,
        prompt_template=prompt_template,
        llm=llm,
        diffusion=diffusion,
        viewpoint_rules=rules,
    )
