import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import numpy as np
import pytest

from meshprompt.dataset import MeshRepository, make_annotation
from meshprompt.edgemap import canny
from meshprompt.generation import GenerationRequest, MockDiffusionBackend
from meshprompt.geometry import CameraIntrinsics, Viewpoint, viewpoint_to_extrinsics
from meshprompt.prompting import build_prompt
from meshprompt.renderer import render_sketch, visible_vertices

from meshes import cube_obj, pyramid_obj, write_obj

SMALL_K = CameraIntrinsics(image_width=96, image_height=96)
EDGE_PARAMS = {"low": 40.0, "high": 90.0, "sigma": 1.0}
GEN_PARAMS = {"steps": 4, "guidance_scale": 7.5, "conditioning_scale": 1.0}


@pytest.fixture()
def mesh_repo(tmp_path):
    root = tmp_path / "meshes"
    write_obj(root, "cube.obj", cube_obj(side=1.0))
    write_obj(root, "pyramid.obj", pyramid_obj())
    return MeshRepository(root)


def build_item(repo, out_dir, source_id="cube.obj", class_name="cube", seq=0, seed=11,
               viewpoint=None, status="ok", intrinsics=SMALL_K):
    """Run the render -> edge -> mock-generate chain for one item and
    return its annotation record (files written under out_dir)."""
    from dataclasses import replace

    mesh = replace(repo.load(source_id), class_name=class_name)
    vp = viewpoint or Viewpoint(0.8, 0.3, 0.05, 5.0)
    xi = viewpoint_to_extrinsics(vp)
    sketch = render_sketch(mesh, intrinsics, xi)
    keypoints = visible_vertices(mesh, intrinsics, xi)
    edge = canny(sketch, **EDGE_PARAMS)
    prompt = build_prompt("a photo of {w}", class_name).rendered

    rel = Path(class_name) / Path(source_id).stem
    (Path(out_dir) / rel).mkdir(parents=True, exist_ok=True)
    edge_rel = str(rel / f"{seq:05d}.edge.png")
    image_rel = str(rel / f"{seq:05d}.png")
    edge.save_png(Path(out_dir) / edge_rel)
    if status == "ok":
        image = MockDiffusionBackend().generate(
            GenerationRequest(edge_map=edge, prompt=prompt, seed=seed, steps=GEN_PARAMS["steps"])
        )
        image.save_png(Path(out_dir) / image_rel)
    return make_annotation(
        mesh, vp, intrinsics, keypoints, prompt, seed, dict(GEN_PARAMS),
        seq=seq,
        image_path=image_rel if status == "ok" else None,
        edge_map_path=edge_rel,
        edge_params=dict(EDGE_PARAMS),
        status=status,
    )
