"""Command-line behavior: exit codes, job-manifest skipping, and one
round trip through every subcommand."""

from __future__ import annotations

import json

import numpy as np
import pytest

from physparts.annotate import build_prompt, request_hash
from physparts.asset import load_asset, save_asset, validate_asset
from physparts.cli import EXIT_BACKEND, EXIT_OK, EXIT_VALIDATION, main
from physparts.cfm import load_checkpoint
from physparts.config import EstimationConfig
from physparts.fixtures import (
    base_cabinet,
    drawer_donor,
    laptop_hinge,
    tiny_appendage,
)
from physparts.kinematics import candidate_payload
from physparts.physfeat import load_voxel_grid


@pytest.fixture
def laptop_dir(tmp_path):
    asset, _ = laptop_hinge()
    d = tmp_path / "laptop"
    save_asset(asset, d)
    return d


class TestParsing:
    def test_help_exits_ok(self, capsys):
        assert main(["--help"]) == EXIT_OK
        assert "physparts" in capsys.readouterr().out

    def test_no_command_is_a_usage_error(self):
        assert main([]) == EXIT_VALIDATION

    def test_unknown_flag(self, tmp_path):
        assert main(["normalize", "in", "out", "--bogus"]) == EXIT_VALIDATION

    def test_missing_input_file(self, tmp_path):
        code = main(["normalize", str(tmp_path / "absent"),
                     str(tmp_path / "out")])
        assert code == EXIT_VALIDATION


class TestManifestSkip:
    def test_second_identical_run_is_skipped(self, laptop_dir, tmp_path, capsys):
        out = tmp_path / "norm"
        assert main(["normalize", str(laptop_dir), str(out)]) == EXIT_OK
        capsys.readouterr()
        assert main(["normalize", str(laptop_dir), str(out)]) == EXIT_OK
        assert "skipping" in capsys.readouterr().out
        manifest = json.loads((out / "job_manifest.json").read_text())
        assert manifest["status"] == "done"
        assert manifest["command"] == "normalize"

    def test_force_reruns(self, laptop_dir, tmp_path, capsys):
        out = tmp_path / "norm"
        main(["normalize", str(laptop_dir), str(out)])
        capsys.readouterr()
        assert main(["normalize", str(laptop_dir), str(out), "--force"]) == EXIT_OK
        assert "skipping" not in capsys.readouterr().out

    def test_changed_input_reruns(self, laptop_dir, tmp_path, capsys):
        out = tmp_path / "norm"
        main(["normalize", str(laptop_dir), str(out)])
        text = (laptop_dir / "asset.json").read_text()
        (laptop_dir / "asset.json").write_text(
            text.replace('"laptop"', '"notebook"'))
        capsys.readouterr()
        assert main(["normalize", str(laptop_dir), str(out)]) == EXIT_OK
        assert "skipping" not in capsys.readouterr().out

    def test_changed_seed_reruns(self, laptop_dir, tmp_path, capsys):
        out = tmp_path / "norm"
        main(["normalize", str(laptop_dir), str(out), "--seed", "1"])
        capsys.readouterr()
        assert main(["normalize", str(laptop_dir), str(out), "--seed", "2"]) \
            == EXIT_OK
        assert "skipping" not in capsys.readouterr().out

    def test_config_seed_lands_in_manifest(self, laptop_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 9}))
        out = tmp_path / "norm"
        assert main(["normalize", str(laptop_dir), str(out),
                     "--config", str(cfg)]) == EXIT_OK
        manifest = json.loads((out / "job_manifest.json").read_text())
        assert manifest["seed"] == 9


class TestStageCommands:
    def test_normalize_writes_a_canonical_asset(self, tmp_path):
        asset, _ = laptop_hinge()
        from dataclasses import replace
        small = replace(asset, parts=tuple(
            replace(p, mesh=p.mesh.transformed(np.eye(3) * 0.5, np.zeros(3)))
            for p in asset.parts))
        src = tmp_path / "src"
        save_asset(small, src)
        out = tmp_path / "out"
        assert main(["normalize", str(src), str(out)]) == EXIT_OK
        verts = load_asset(out).all_vertices()
        assert abs(np.abs(verts).max() - 1.0) < 1e-9

    def test_merge_absorbs_the_chip(self, tmp_path, capsys):
        asset, expect = tiny_appendage()
        src = tmp_path / "src"
        save_asset(asset, src)
        out = tmp_path / "out"
        assert main(["merge", str(src), str(out)]) == EXIT_OK
        assert "3 -> 2 parts" in capsys.readouterr().out
        merged = load_asset(out)
        assert len(merged.parts) == 2
        assert validate_asset(merged) == []

    def test_estimate_auto_select(self, laptop_dir, tmp_path):
        out = tmp_path / "est"
        code = main(["estimate", str(laptop_dir), str(out),
                     "--child", "2", "--parent", "1", "--kind", "C",
                     "--auto-select"])
        assert code == EXIT_OK

        con = json.loads((out / "constraint_2_1.json").read_text())
        assert con["kind"] == "C"
        d = np.asarray(con["direction"])
        assert abs(d @ np.array([1.0, 0.0, 0.0])) > np.cos(np.radians(5.0))

        # candidate payload is byte-identical to the library call
        expected = candidate_payload(load_asset(laptop_dir), 2, 1, "C",
                                     EstimationConfig())
        assert (out / "candidates_2_1.json").read_bytes() == expected

        final = load_asset(out)
        [c] = final.constraints
        assert c.finalized and c.kind == "C"

    def test_estimate_unknown_part(self, laptop_dir, tmp_path):
        code = main(["estimate", str(laptop_dir), str(tmp_path / "est"),
                     "--child", "9", "--parent", "1", "--kind", "C"])
        assert code == EXIT_VALIDATION

    def test_voxelize(self, laptop_dir, tmp_path):
        out = tmp_path / "vox"
        assert main(["voxelize", str(laptop_dir), str(out),
                     "--resolution", "16"]) == EXIT_OK
        grid = load_voxel_grid(out / "features.pvx")
        assert grid.resolution == 16
        assert len(grid) > 0

    def test_evaluate_self_is_perfect(self, laptop_dir, tmp_path):
        out = tmp_path / "eval"
        code = main(["evaluate", str(out), "--pred", str(laptop_dir),
                     "--gt", str(laptop_dir), "--points", "1000"])
        assert code == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["psnr_db"] == 100.0
        assert all(v == 0.0 for v in report["property_mae"].values())

    def test_cfm_toy(self, tmp_path):
        out = tmp_path / "cfm"
        code = main(["cfm-toy", str(out), "--model", "linear",
                     "--steps", "80", "--n-samples", "512"])
        assert code == EXIT_OK
        trace = json.loads((out / "trace.json").read_text())
        assert len(trace["trace"]) == 80
        assert trace["final"] < trace["initial"]
        model = load_checkpoint(out / "model.pcfm")
        assert model.dim == 2


ANNOTATION_REPLY = json.dumps({
    "object_name": "Laptop", "category": "Electronics", "dimension": "34*24*22",
    "parts": [
        {"label": 1, "material": "aluminum", "density": 2.7, "name": "base",
         "priority_rank": 1,
         "neighbors": [{"labels_of_movement_group": "1-2",
                        "movement_type": "C", "parent_label": 1,
                        "child_label": 2}]},
        {"label": 2, "material": "aluminum", "density": 2.7, "name": "lid",
         "priority_rank": 2,
         "neighbors": [{"labels_of_movement_group": "2-1",
                        "movement_type": "C", "parent_label": 1,
                        "child_label": 2}]},
    ],
})


class TestAnnotateCommand:
    def test_mock_round_trip(self, laptop_dir, tmp_path):
        responses = tmp_path / "responses"
        responses.mkdir()
        bundle = build_prompt(load_asset(laptop_dir))
        key = request_hash(bundle.system_text, bundle.images)
        (responses / f"{key}.txt").write_text(ANNOTATION_REPLY,
                                              encoding="utf-8")
        out = tmp_path / "ann"
        code = main(["annotate", str(laptop_dir), str(out),
                     "--backend", "mock", "--responses", str(responses)])
        assert code == EXIT_OK

        annotated = load_asset(out)
        assert annotated.absolute_scale == (34.0, 24.0, 22.0)
        assert annotated.parts[1].name == "lid"

        stubs = json.loads((out / "constraint_stubs.json").read_text())
        assert len(stubs) == 1 and stubs[0]["kind"] == "C"

        from physparts.annotate import ReviewLog
        assert ReviewLog(out / "review_log.jsonl").replay().status == "vlm_done"

    def test_mock_without_responses_is_a_backend_error(self, laptop_dir, tmp_path):
        code = main(["annotate", str(laptop_dir), str(tmp_path / "ann"),
                     "--backend", "mock"])
        assert code == EXIT_BACKEND

    def test_unanswerable_request_is_a_backend_error(self, laptop_dir, tmp_path):
        responses = tmp_path / "responses"
        responses.mkdir()  # empty: no canned reply matches
        code = main(["annotate", str(laptop_dir), str(tmp_path / "ann"),
                     "--backend", "mock", "--responses", str(responses)])
        assert code == EXIT_BACKEND


class TestProcgenCommand:
    def test_intra_composition(self, tmp_path):
        cab = tmp_path / "cabinet"
        save_asset(base_cabinet(), cab)
        donor_asset, part_ids = drawer_donor()
        donor = tmp_path / "drawer"
        save_asset(donor_asset, donor)
        out = tmp_path / "gen"
        code = main(["procgen", str(out), "--base", str(cab),
                     "--component", f"{donor}:2,3", "--mode", "intra"])
        assert code == EXIT_OK
        plans = json.loads((out / "plans.json").read_text())
        assert plans["count"] == 1
        composed = load_asset(out / "composed_000")
        assert validate_asset(composed) == []
        assert len(composed.parts) == 3

    def test_component_spec_needs_part_ids(self, tmp_path):
        cab = tmp_path / "cabinet"
        save_asset(base_cabinet(), cab)
        code = main(["procgen", str(tmp_path / "gen"), "--base", str(cab),
                     "--component", str(cab)])
        assert code == EXIT_VALIDATION
