"""Synthetic training images with automatic 3D annotations.

Renders CAD meshes from sampled viewpoints, extracts Canny edge maps as
visual prompts, composes text prompts (optionally LLM-enriched), drives an
edge-conditioned diffusion backend over HTTP (or a deterministic mock),
and persists a self-certifying dataset manifest, plus the evaluation
tooling for geodesic pose error and top-1 accuracy.
"""

from .edgemap import EdgeMap, canny
from .errors import MeshPromptError
from .evaluation import accuracy_at, pose_error, top1_accuracy
from .generation import GenerationRequest, MockDiffusionBackend, RGBImage, generate_image
from .geometry import (
    CameraExtrinsics,
    CameraIntrinsics,
    Mesh,
    Viewpoint,
    load_mesh,
    project,
    viewpoint_to_extrinsics,
)
from .prompting import Prompt, build_prompt, request_description
from .renderer import GrayscaleImage, render_sketch, visible_vertices
from .sampling import SeededRng, ViewpointRule, rule_for_class, sample_viewpoint

__version__ = "0.1.0"

__all__ = [
    "CameraExtrinsics",
    "CameraIntrinsics",
    "EdgeMap",
    "GenerationRequest",
    "GrayscaleImage",
    "Mesh",
    "MeshPromptError",
    "MockDiffusionBackend",
    "Prompt",
    "RGBImage",
    "SeededRng",
    "Viewpoint",
    "ViewpointRule",
    "accuracy_at",
    "build_prompt",
    "canny",
    "generate_image",
    "load_mesh",
    "pose_error",
    "project",
    "render_sketch",
    "request_description",
    "rule_for_class",
    "sample_viewpoint",
    "top1_accuracy",
    "viewpoint_to_extrinsics",
]
