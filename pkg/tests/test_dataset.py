import json
import math
from dataclasses import replace

import numpy as np
import pytest

from meshprompt.dataset import (
    make_annotation,
    read_manifest,
    record_from_json,
    record_id,
    record_to_json,
    verify_roundtrip,
    write_manifest,
)
from meshprompt.errors import (
    ConsistencyError,
    ManifestParseError,
    ManifestVersionError,
)
from meshprompt.geometry import CameraIntrinsics, Viewpoint, viewpoint_to_extrinsics

from conftest import SMALL_K, build_item
from oracles import rodrigues


class TestMakeAnnotation:
    def test_rotation_recomputed_from_viewpoint(self, mesh_repo, tmp_path):
        record = build_item(mesh_repo, tmp_path / "out")
        expected = viewpoint_to_extrinsics(record.viewpoint).rotation
        assert np.array_equal(record.rotation, expected)
        R = record.rotation
        assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-9

    def test_mismatched_rotation_rejected(self, mesh_repo, tmp_path):
        mesh = mesh_repo.load("cube.obj")
        vp = Viewpoint(0.5, 0.2, 0.0, 5.0)
        wrong = rodrigues((0, 1, 0), 0.3) @ viewpoint_to_extrinsics(vp).rotation
        with pytest.raises(ConsistencyError):
            make_annotation(
                mesh, vp, SMALL_K, [], "a photo of cube", 1, {},
                seq=0, image_path="x.png", edge_map_path="x.edge.png",
                edge_params={}, rotation=wrong,
            )

    def test_matching_rotation_accepted(self, mesh_repo):
        mesh = mesh_repo.load("cube.obj")
        vp = Viewpoint(0.5, 0.2, 0.0, 5.0)
        rec = make_annotation(
            mesh, vp, SMALL_K, [], "a photo of cube", 1, {},
            seq=0, image_path="x.png", edge_map_path="x.edge.png",
            edge_params={}, rotation=viewpoint_to_extrinsics(vp).rotation,
        )
        assert rec.ok

    def test_failed_record_has_no_image(self, mesh_repo, tmp_path):
        record = build_item(mesh_repo, tmp_path / "out", status="failed:timeout")
        assert record.image_path is None
        assert record.edge_map_path is not None
        assert not record.ok

    def test_ok_record_requires_image_path(self, mesh_repo):
        mesh = mesh_repo.load("cube.obj")
        with pytest.raises(ConsistencyError):
            make_annotation(
                mesh, Viewpoint(0, 0, 0, 5), SMALL_K, [], "p", 1, {},
                seq=0, image_path=None, edge_map_path="e.png", edge_params={},
            )

    def test_record_id_layout(self):
        assert record_id("school bus", "buses/bus_01.obj", 7) == "school bus/bus_01/00007"

    def test_keypoints_visible_on_front_cube(self, mesh_repo, tmp_path):
        record = build_item(
            mesh_repo, tmp_path / "out", viewpoint=Viewpoint(0.0, 0.0, 0.0, 5.0)
        )
        assert sorted(i for i, _, _ in record.visible_keypoints) == [4, 5, 6, 7]


class TestManifestRoundtrip:
    def test_counts_and_line_layout(self, mesh_repo, tmp_path):
        out = tmp_path / "out"
        records = [
            build_item(mesh_repo, out, class_name="classA", seq=i, seed=i) for i in range(3)
        ] + [
            build_item(mesh_repo, out, source_id="pyramid.obj", class_name="classB", seq=i, seed=100 + i)
            for i in range(2)
        ]
        manifest = write_manifest(records, out, "demo")
        assert manifest.counts == {"classA": 3, "classB": 2}
        lines = (out / "manifest.jsonl").read_text().splitlines()
        assert len(lines) == 6  # header + 5 records
        header = json.loads(lines[0])
        assert header["schema_version"] == "1"
        assert header["counts"] == {"classA": 3, "classB": 2}

    def test_read_write_identity(self, mesh_repo, tmp_path):
        out = tmp_path / "out"
        vp = Viewpoint(math.pi / 3, 0.21, -0.07, 5.5)
        records = [build_item(mesh_repo, out, viewpoint=vp)]
        write_manifest(records, out, "demo")
        again = read_manifest(out)
        assert len(again.records) == 1
        r = again.records[0]
        # bit-exact float round-trip
        assert r.viewpoint.azimuth == records[0].viewpoint.azimuth == math.pi / 3
        assert r.viewpoint.theta == records[0].viewpoint.theta
        assert np.array_equal(r.rotation, records[0].rotation)
        assert r.visible_keypoints == records[0].visible_keypoints
        assert record_to_json(r) == record_to_json(records[0])

    def test_version_gate(self, mesh_repo, tmp_path):
        out = tmp_path / "out"
        write_manifest([build_item(mesh_repo, out)], out, "demo")
        path = out / "manifest.jsonl"
        lines = path.read_text().splitlines()
        header = json.loads(lines[0])
        header["schema_version"] = "999"
        path.write_text("\n".join([json.dumps(header)] + lines[1:]) + "\n")
        with pytest.raises(ManifestVersionError):
            read_manifest(path)

    def test_malformed_line_reports_number(self, mesh_repo, tmp_path):
        out = tmp_path / "out"
        write_manifest([build_item(mesh_repo, out)], out, "demo")
        path = out / "manifest.jsonl"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write("{not json\n")
        with pytest.raises(ManifestParseError) as err:
            read_manifest(path)
        assert err.value.line == 3

    def test_count_mismatch_detected(self, mesh_repo, tmp_path):
        out = tmp_path / "out"
        write_manifest([build_item(mesh_repo, out)], out, "demo")
        path = out / "manifest.jsonl"
        lines = path.read_text().splitlines()
        header = json.loads(lines[0])
        header["counts"] = {"cube": 5}
        path.write_text("\n".join([json.dumps(header)] + lines[1:]) + "\n")
        with pytest.raises(ManifestParseError):
            read_manifest(path)


class TestVerifyRoundtrip:
    def test_pipeline_records_verify(self, mesh_repo, tmp_path):
        out = tmp_path / "out"
        record = build_item(mesh_repo, out)
        assert verify_roundtrip(record, mesh_repo, out) is True

    def test_perturbed_azimuth_fails(self, mesh_repo, tmp_path):
        out = tmp_path / "out"
        record = build_item(mesh_repo, out)
        vp = record.viewpoint
        tampered = replace(
            record,
            viewpoint=Viewpoint(vp.azimuth + 0.05, vp.elevation, vp.theta, vp.distance),
            rotation=viewpoint_to_extrinsics(
                Viewpoint(vp.azimuth + 0.05, vp.elevation, vp.theta, vp.distance)
            ).rotation,
        )
        assert verify_roundtrip(tampered, mesh_repo, out) is False

    def test_missing_edge_file(self, mesh_repo, tmp_path):
        out = tmp_path / "out"
        record = build_item(mesh_repo, out)
        (out / record.edge_map_path).unlink()
        with pytest.raises(FileNotFoundError):
            verify_roundtrip(record, mesh_repo, out)

    def test_failed_record_rejected(self, mesh_repo, tmp_path):
        out = tmp_path / "out"
        record = build_item(mesh_repo, out, status="failed:connect")
        with pytest.raises(ConsistencyError):
            verify_roundtrip(record, mesh_repo, out)


class TestRecordJson:
    def test_round_trip_preserves_all_fields(self, mesh_repo, tmp_path):
        record = build_item(mesh_repo, tmp_path / "out", seq=3, seed=99)
        again = record_from_json(json.loads(json.dumps(record_to_json(record))))
        assert record_to_json(again) == record_to_json(record)
        assert again.id == record.id
        assert again.seed == 99
        assert again.generator_params == record.generator_params
        assert again.edge_params == record.edge_params
