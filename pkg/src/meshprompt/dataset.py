"""Annotation records and dataset persistence.

Every generated image carries a ground-truth annotation: the exact
viewpoint and camera that produced its edge-map conditioning, the
world-to-camera rotation (recomputed from the viewpoint, never trusted
from the caller), the visible mesh vertices with their pixel positions,
and the full generation parameters. Because rendering and edge detection
are deterministic, an annotation is self-certifying: re-rendering from the
stored fields must reproduce the stored edge map bit for bit, which
``verify_roundtrip`` checks.

On disk a dataset is a directory of PNGs plus ``manifest.jsonl``: one JSON
header line (schema version, dataset name, per-class counts) followed by
one JSON record per line. Floats are serialized with full round-trip
precision so parsing returns bit-equal values. Failed generations stay in
the manifest with ``status: "failed:<category>"`` for exact batch
accounting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .edgemap import EdgeMap, canny
from .errors import ConsistencyError, ManifestParseError, ManifestVersionError
from .geometry import (
    CameraIntrinsics,
    Mesh,
    Viewpoint,
    load_mesh,
    require_rotation,
    viewpoint_to_extrinsics,
)
from .renderer import render_sketch

SCHEMA_VERSION = "1"
MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True, eq=False)
class AnnotationRecord:
    id: str
    status: str  # "ok" | "failed:<category>"
    class_name: str
    cad_source_id: str
    seq: int
    image_path: str | None
    edge_map_path: str | None
    viewpoint: Viewpoint
    rotation: np.ndarray  # world-to-camera, row-major
    intrinsics: CameraIntrinsics
    visible_keypoints: tuple[tuple[int, float, float], ...]
    prompt: str
    seed: int
    generator_params: dict
    edge_params: dict

    def __post_init__(self):
        object.__setattr__(self, "rotation", require_rotation(self.rotation))
        object.__setattr__(
            self,
            "visible_keypoints",
            tuple((int(i), float(u), float(v)) for i, u, v in self.visible_keypoints),
        )

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def record_id(class_name: str, cad_source_id: str, seq: int) -> str:
    return f"{class_name}/{Path(cad_source_id).stem}/{seq:05d}"


def make_annotation(
    mesh: Mesh,
    viewpoint: Viewpoint,
    intrinsics: CameraIntrinsics,
    keypoints,
    prompt: str,
    seed: int,
    generator_params: dict,
    *,
    seq: int,
    image_path: str | None,
    edge_map_path: str | None,
    edge_params: dict,
    status: str = "ok",
    rotation: np.ndarray | None = None,
) -> AnnotationRecord:
    """Build a record for one generated item.

    The stored rotation is always recomputed from the viewpoint; a caller
    may pass its own rotation only as a cross-check, and a mismatch beyond
    1e-9 raises ConsistencyError.
    """
    derived = viewpoint_to_extrinsics(viewpoint).rotation
    if rotation is not None:
        if np.max(np.abs(np.asarray(rotation, dtype=np.float64) - derived)) > 1e-9:
            raise ConsistencyError("supplied rotation does not match the viewpoint")
    if status == "ok" and image_path is None:
        raise ConsistencyError("ok records must reference an image file")
    return AnnotationRecord(
        id=record_id(mesh.class_name, mesh.source_id, seq),
        status=status,
        class_name=mesh.class_name,
        cad_source_id=mesh.source_id,
        seq=seq,
        image_path=image_path,
        edge_map_path=edge_map_path,
        viewpoint=viewpoint,
        rotation=derived,
        intrinsics=intrinsics,
        visible_keypoints=tuple(keypoints),
        prompt=prompt,
        seed=seed,
        generator_params=dict(generator_params),
        edge_params=dict(edge_params),
    )


def record_to_json(record: AnnotationRecord) -> dict:
    K = record.intrinsics
    return {
        "id": record.id,
        "status": record.status,
        "class_name": record.class_name,
        "cad_source_id": record.cad_source_id,
        "seq": record.seq,
        "image_path": record.image_path,
        "edge_map_path": record.edge_map_path,
        "viewpoint": {
            "azimuth": record.viewpoint.azimuth,
            "elevation": record.viewpoint.elevation,
            "theta": record.viewpoint.theta,
            "distance": record.viewpoint.distance,
        },
        "rotation": [float(x) for x in record.rotation.reshape(-1)],
        "intrinsics": {
            "focal_length": K.focal_length,
            "sensor_width": K.sensor_width,
            "image_width": K.image_width,
            "image_height": K.image_height,
            "principal_point": [K.principal_point[0], K.principal_point[1]],
        },
        "visible_keypoints": [[i, u, v] for i, u, v in record.visible_keypoints],
        "prompt": record.prompt,
        "seed": record.seed,
        "generator_params": record.generator_params,
        "edge_params": record.edge_params,
    }


def record_from_json(obj: dict) -> AnnotationRecord:
    vp = obj["viewpoint"]
    K = obj["intrinsics"]
    return AnnotationRecord(
        id=obj["id"],
        status=obj["status"],
        class_name=obj["class_name"],
        cad_source_id=obj["cad_source_id"],
        seq=int(obj["seq"]),
        image_path=obj["image_path"],
        edge_map_path=obj["edge_map_path"],
        viewpoint=Viewpoint(vp["azimuth"], vp["elevation"], vp["theta"], vp["distance"]),
        rotation=np.asarray(obj["rotation"], dtype=np.float64).reshape(3, 3),
        intrinsics=CameraIntrinsics(
            focal_length=K["focal_length"],
            sensor_width=K["sensor_width"],
            image_width=int(K["image_width"]),
            image_height=int(K["image_height"]),
            principal_point=tuple(K["principal_point"]),
        ),
        visible_keypoints=tuple((i, u, v) for i, u, v in obj["visible_keypoints"]),
        prompt=obj["prompt"],
        seed=int(obj["seed"]),
        generator_params=obj["generator_params"],
        edge_params=obj["edge_params"],
    )


@dataclass(eq=False)
class Manifest:
    dataset_name: str
    records: list = field(default_factory=list)
    schema_version: str = SCHEMA_VERSION

    @property
    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.records:
            out[r.class_name] = out.get(r.class_name, 0) + 1
        return dict(sorted(out.items()))

    @property
    def ok_records(self) -> list:
        return [r for r in self.records if r.ok]


def _dumps(obj: dict) -> str:
    # repr-based floats round-trip bit-exactly through json.loads
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True)


def write_manifest(records, out_dir, dataset_name: str) -> Manifest:
    """Write header + one record per line to <out_dir>/manifest.jsonl."""
    manifest = Manifest(dataset_name=dataset_name, records=list(records))
    header = {
        "schema_version": manifest.schema_version,
        "dataset_name": dataset_name,
        "counts": manifest.counts,
    }
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / MANIFEST_NAME
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dumps(header) + "\n")
        for record in manifest.records:
            fh.write(_dumps(record_to_json(record)) + "\n")
    return manifest


def read_manifest(path) -> Manifest:
    """Parse a manifest; raises on version mismatch or malformed lines."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ManifestParseError("empty manifest", line=1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestParseError(f"bad header: {exc}", line=1) from exc
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ManifestVersionError(
            f"manifest schema_version {version!r} unsupported (expected {SCHEMA_VERSION!r})"
        )
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            records.append(record_from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ManifestParseError(f"bad record: {exc}", line=lineno) from exc
    declared = header.get("counts", {})
    manifest = Manifest(dataset_name=header.get("dataset_name", ""), records=records)
    if declared and declared != manifest.counts:
        raise ManifestParseError(
            f"header counts {declared} do not match records {manifest.counts}", line=1
        )
    return manifest


class MeshRepository:
    """Loads and caches normalized meshes by their repository-relative id."""

    def __init__(self, root):
        self.root = Path(root)
        self._cache: dict[str, Mesh] = {}

    def load(self, source_id: str) -> Mesh:
        if source_id not in self._cache:
            mesh = load_mesh(self.root / source_id)
            self._cache[source_id] = replace(mesh, source_id=source_id)
        return self._cache[source_id]


def verify_roundtrip(record: AnnotationRecord, mesh_repository: MeshRepository, dataset_root) -> bool:
    """Re-derive the edge map from the stored annotation and compare.

    Returns True iff re-rendering with the stored viewpoint/intrinsics and
    re-running edge detection with the stored parameters reproduces the
    stored edge-map file pixel for pixel.
    """
    if not record.ok:
        raise ConsistencyError(f"cannot verify record with status {record.status!r}")
    if record.edge_map_path is None:
        raise FileNotFoundError("record has no edge-map path")
    edge_file = Path(dataset_root) / record.edge_map_path
    if not edge_file.is_file():
        raise FileNotFoundError(f"edge map missing: {edge_file}")
    stored = EdgeMap.load_png(edge_file)

    mesh = mesh_repository.load(record.cad_source_id)
    xi = viewpoint_to_extrinsics(record.viewpoint)
    sketch = render_sketch(mesh, record.intrinsics, xi)
    derived = canny(
        sketch,
        low=record.edge_params["low"],
        high=record.edge_params["high"],
        sigma=record.edge_params["sigma"],
    )
    return bool(np.array_equal(derived.pixels, stored.pixels))
