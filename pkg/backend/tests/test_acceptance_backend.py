"""Secondary acceptance: the adapter serves the real wire protocol to the
generation pipeline. Run with ``pytest tests/test_acceptance_backend.py -v -s``.
"""

import json
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest
import requests
import yaml

BACKEND_DIR = Path(__file__).resolve().parents[1]


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def live_server():
    port = free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "meshprompt_backend", "--port", str(port)],
        cwd=BACKEND_DIR,
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    base = f"http://127.0.0.1:{port}"
    try:
        deadline = time.time() + 30
        while time.time() < deadline:
            try:
                if requests.get(f"{base}/healthz", timeout=1).status_code == 200:
                    break
            except requests.exceptions.RequestException:
                time.sleep(0.1)
        else:
            raise RuntimeError("backend server did not come up")
        yield base
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def cube_obj_text():
    verts = [
        (-0.5, -0.5, -0.5), (0.5, -0.5, -0.5), (0.5, 0.5, -0.5), (-0.5, 0.5, -0.5),
        (-0.5, -0.5, 0.5), (0.5, -0.5, 0.5), (0.5, 0.5, 0.5), (-0.5, 0.5, 0.5),
    ]
    faces = [(1, 2, 3, 4), (5, 8, 7, 6), (1, 5, 6, 2), (4, 3, 7, 8), (1, 4, 8, 5), (2, 6, 7, 3)]
    lines = [f"v {x} {y} {z}" for x, y, z in verts]
    lines += ["f " + " ".join(str(i) for i in f) for f in faces]
    return "\n".join(lines) + "\n"


def pyramid_obj_text():
    verts = [(-0.5, 0, -0.5), (0.5, 0, -0.5), (0.5, 0, 0.5), (-0.5, 0, 0.5), (0, 1.0, 0)]
    faces = [(1, 4, 3, 2), (1, 2, 5), (2, 3, 5), (3, 4, 5), (4, 1, 5)]
    lines = [f"v {x} {y} {z}" for x, y, z in verts]
    lines += ["f " + " ".join(str(i) for i in f) for f in faces]
    return "\n".join(lines) + "\n"


def test_live_backend_end_to_end(live_server, tmp_path):
    """2 classes x 1 CAD x 2 images/class against the live adapter:
    4 ok records, every edge map re-derivable from its annotation."""
    meshes = tmp_path / "meshes"
    meshes.mkdir()
    (meshes / "cube.obj").write_text(cube_obj_text(), encoding="utf-8")
    (meshes / "pyramid.obj").write_text(pyramid_obj_text(), encoding="utf-8")

    config = {
        "dataset_name": "adapter-e2e",
        "mesh_root": "meshes",
        "output_dir": "out",
        "images_per_class": 2,
        "base_seed": 7,
        "render": {"width": 128, "height": 128},
        "canny": {"low": 40.0, "high": 90.0, "sigma": 1.0},
        "diffusion": {"mock": False, "endpoint": live_server, "steps": 6, "timeout_s": 60},
        "llm": {"mock": False, "endpoint": f"{live_server}/describe", "timeout_s": 30},
        "classes": [
            {"name": "box", "keywords": ["cubic"], "cad_models": ["cube.obj"]},
            {"name": "spike", "keywords": ["pointed"], "cad_models": ["pyramid.obj"]},
        ],
    }
    cfg = tmp_path / "config.yaml"
    cfg.write_text(yaml.safe_dump(config), encoding="utf-8")
    out = tmp_path / "out"

    proc = subprocess.run(
        [sys.executable, "-m", "meshprompt.cli", "generate",
         "--config", str(cfg), "--out", str(out), "--quiet"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr

    from meshprompt.dataset import MeshRepository, read_manifest, verify_roundtrip

    manifest = read_manifest(out)
    assert len(manifest.records) == 4
    assert all(r.ok for r in manifest.records)
    assert manifest.counts == {"box": 2, "spike": 2}

    repo = MeshRepository(meshes)
    assert all(verify_roundtrip(r, repo, out) for r in manifest.records)

    # generated images exist with the configured dimensions
    from PIL import Image

    for r in manifest.records:
        with Image.open(out / r.image_path) as im:
            assert im.size == (128, 128)
        # prompts were enriched by the live /describe endpoint
        assert len(r.prompt) > len(f"a photo of {r.class_name}, ")

    print("ACCEPTANCE live-backend-end-to-end: PASS (4 ok records, round-trip verified)")


def test_wire_protocol_golden_corpus_against_live_server(live_server):
    golden = sorted((Path(__file__).parent / "golden").glob("*.json"))
    assert len(golden) >= 5
    for path in golden:
        body = json.loads(path.read_text())
        resp = requests.post(f"{live_server}/generate", json=body, timeout=60)
        assert resp.status_code == 200, path.name
        assert set(resp.json()) == {"image_png_base64"}
    print("ACCEPTANCE live-backend-golden-corpus: PASS")
