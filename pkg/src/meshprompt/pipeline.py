"""End-to-end dataset generation.

For every class the configured CAD models are assigned round-robin until
``images_per_class`` items exist. Each item runs the full chain: sample a
viewpoint from the class rule, render the sketch, collect visible-vertex
keypoints, extract the edge map, compose the text prompt (with an optional
LLM description, falling back to the simple prompt when the service is
unavailable), call the diffusion backend, and persist image + edge map +
annotation. Item seeds are derived from (base_seed, class, cad, seq) with
a stable digest, so any item can be regenerated independently of worker
count or completion order, and a resumed run produces the same bytes as an
uninterrupted one.

Completed records are appended to ``journal.jsonl`` (flushed per line) so
an interrupted run can resume; the final ``manifest.jsonl`` is written
sorted by record id once all items finish. A failed generation becomes a
``failed:<category>`` record instead of aborting the batch.
"""

from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .config import ClassSpec, PipelineConfig
from .dataset import (
    MANIFEST_NAME,
    AnnotationRecord,
    Manifest,
    MeshRepository,
    make_annotation,
    record_from_json,
    record_id,
    record_to_json,
    write_manifest,
)
from .edgemap import canny
from .errors import DescriptionUnavailableError, GenerationError
from .generation import (
    GenerationRequest,
    HttpDiffusionBackend,
    MockDiffusionBackend,
    generate_image,
)
from .geometry import CameraIntrinsics, Mesh, viewpoint_to_extrinsics
from .prompting import DEFAULT_INSTRUCTION, HttpLLMClient, MockLLMClient, build_prompt, request_description
from .renderer import render_sketch, visible_vertices
from .sampling import SeededRng, rule_for_class, sample_viewpoint

JOURNAL_NAME = "journal.jsonl"


@dataclass(frozen=True)
class ItemSpec:
    class_spec: ClassSpec
    cad_id: str
    seq: int
    seed: int

    @property
    def id(self) -> str:
        return record_id(self.class_spec.name, self.cad_id, self.seq)


def derive_item_seed(base_seed: int, class_name: str, cad_id: str, seq: int) -> int:
    """Stable 63-bit per-item seed; independent of workers and run history."""
    digest = hashlib.sha256(f"{base_seed}|{class_name}|{cad_id}|{seq}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def plan_items(config: PipelineConfig) -> list[ItemSpec]:
    items = []
    for spec in config.classes:
        for seq in range(config.images_per_class):
            cad = spec.cad_models[seq % len(spec.cad_models)]
            items.append(
                ItemSpec(
                    class_spec=spec,
                    cad_id=cad,
                    seq=seq,
                    seed=derive_item_seed(config.base_seed, spec.name, cad, seq),
                )
            )
    return items


def load_journal(path) -> dict[str, AnnotationRecord]:
    """Best-effort parse of the journal; corrupt lines (for example a line
    truncated by a kill) are skipped and their items regenerated."""
    out: dict[str, AnnotationRecord] = {}
    path = Path(path)
    if not path.is_file():
        return out
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                record = record_from_json(json.loads(line))
            except Exception:
                continue
            out[record.id] = record
    return out


class _Journal:
    def __init__(self, path):
        self._fh = open(path, "a", encoding="utf-8")
        self._lock = threading.Lock()

    def append(self, record: AnnotationRecord) -> None:
        line = json.dumps(record_to_json(record), separators=(",", ":")) + "\n"
        with self._lock:
            self._fh.write(line)
            self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def _make_llm_client(config: PipelineConfig):
    if config.llm.mock:
        return MockLLMClient()
    return HttpLLMClient(
        config.llm.endpoint,
        timeout=config.llm.timeout_s,
        max_tokens=config.llm.max_tokens,
    )


def _make_backend(config: PipelineConfig):
    if config.diffusion.mock:
        return MockDiffusionBackend()
    return HttpDiffusionBackend(config.diffusion.endpoint, timeout=config.diffusion.timeout_s)


def run_item(
    config: PipelineConfig,
    item: ItemSpec,
    mesh: Mesh,
    intrinsics: CameraIntrinsics,
    llm_client,
    backend,
) -> AnnotationRecord:
    """Generate one item end to end and write its files."""
    spec = item.class_spec
    rng = SeededRng(item.seed)
    rule = rule_for_class(spec.name, config.viewpoint_rules)
    vp = sample_viewpoint(rule, rng)
    xi = viewpoint_to_extrinsics(vp)

    sketch = render_sketch(mesh, intrinsics, xi)
    keypoints = visible_vertices(mesh, intrinsics, xi)
    edge = canny(sketch, low=config.canny.low, high=config.canny.high, sigma=config.canny.sigma)

    rel_dir = Path(spec.name) / Path(item.cad_id).stem
    (config.output_dir / rel_dir).mkdir(parents=True, exist_ok=True)
    edge_rel = str(rel_dir / f"{item.seq:05d}.edge.png")
    image_rel = str(rel_dir / f"{item.seq:05d}.png")
    edge.save_png(config.output_dir / edge_rel)

    instruction = config.llm.instruction or DEFAULT_INSTRUCTION
    try:
        description = request_description(
            llm_client.with_seed(item.seed),
            config.prompt_template,
            spec.name,
            spec.keywords,
            instruction_template=instruction,
        )
    except DescriptionUnavailableError:
        description = None
    prompt = build_prompt(config.prompt_template, spec.name, spec.keywords, description)

    generator_params = {
        "steps": config.diffusion.steps,
        "guidance_scale": config.diffusion.guidance_scale,
        "conditioning_scale": config.diffusion.conditioning_scale,
    }
    edge_params = {"low": config.canny.low, "high": config.canny.high, "sigma": config.canny.sigma}
    request = GenerationRequest(
        edge_map=edge,
        prompt=prompt.rendered,
        seed=item.seed,
        steps=config.diffusion.steps,
        guidance_scale=config.diffusion.guidance_scale,
        conditioning_scale=config.diffusion.conditioning_scale,
    )

    try:
        image = generate_image(
            backend, request,
            retries=config.diffusion.retries,
            backoff_base=config.diffusion.backoff_s,
        )
    except GenerationError as exc:
        return make_annotation(
            mesh, vp, intrinsics, keypoints, prompt.rendered, item.seed, generator_params,
            seq=item.seq, image_path=None, edge_map_path=edge_rel,
            edge_params=edge_params, status=f"failed:{exc.category}",
        )

    image.save_png(config.output_dir / image_rel)
    return make_annotation(
        mesh, vp, intrinsics, keypoints, prompt.rendered, item.seed, generator_params,
        seq=item.seq, image_path=image_rel, edge_map_path=edge_rel,
        edge_params=edge_params, status="ok",
    )


@dataclass
class GenerationResult:
    manifest: Manifest
    generated: int
    reused: int
    failed: int


def generate_dataset(config: PipelineConfig, fresh: bool = False, log=None) -> GenerationResult:
    """Run the full pipeline; resumes from the journal unless ``fresh``.

    Meshes are all loaded (and validated) before any generation starts.
    """
    say = log or (lambda msg: None)
    repo = MeshRepository(config.mesh_root)
    meshes: dict[tuple[str, str], Mesh] = {}
    for spec in config.classes:
        for cad in spec.cad_models:
            raw = repo.load(cad)
            meshes[(spec.name, cad)] = replace(
                raw, class_name=spec.name, keywords=tuple(spec.keywords)
            )

    intrinsics = CameraIntrinsics(
        focal_length=config.render.focal_length_mm,
        sensor_width=config.render.sensor_width_mm,
        image_width=config.render.width,
        image_height=config.render.height,
    )

    config.output_dir.mkdir(parents=True, exist_ok=True)
    journal_path = config.output_dir / JOURNAL_NAME
    if fresh and journal_path.exists():
        journal_path.unlink()
    manifest_path = config.output_dir / MANIFEST_NAME
    if fresh and manifest_path.exists():
        manifest_path.unlink()

    items = plan_items(config)
    previous = {} if fresh else load_journal(journal_path)
    done: dict[str, AnnotationRecord] = {}
    pending: list[ItemSpec] = []
    for item in items:
        old = previous.get(item.id)
        if old is not None and old.ok and old.seed == item.seed:
            done[item.id] = old
        else:
            pending.append(item)
    say(f"{len(items)} items planned, {len(done)} reused from journal, {len(pending)} to generate")

    llm_client = _make_llm_client(config)
    backend = _make_backend(config)
    journal = _Journal(journal_path)
    new_records: list[AnnotationRecord] = []
    try:
        def work(item: ItemSpec) -> AnnotationRecord:
            record = run_item(
                config, item, meshes[(item.class_spec.name, item.cad_id)],
                intrinsics, llm_client, backend,
            )
            journal.append(record)
            say(f"{record.id}: {record.status}")
            return record

        if config.workers == 1:
            for item in pending:
                new_records.append(work(item))
        else:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                new_records.extend(pool.map(work, pending))
    finally:
        journal.close()

    records = sorted(
        list(done.values()) + new_records, key=lambda r: r.id
    )
    manifest = write_manifest(records, config.output_dir, config.dataset_name)
    failed = sum(1 for r in records if not r.ok)
    return GenerationResult(
        manifest=manifest, generated=len(new_records), reused=len(done), failed=failed
    )
