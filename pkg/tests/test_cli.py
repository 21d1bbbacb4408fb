import json

import numpy as np
import pytest

from proglf import data, modelfile
from proglf.cli import main

SMALL_CFG = {
    "arch": {
        "input_dim": 24,
        "output_dim": 4,
        "num_weight_layers": 4,
        "lod_widths": [4, 8, 12, 16],
    },
    "train": {"batch_size": 256, "epochs": 1, "seed": 0},
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """synth -> train once; downstream commands reuse the artifacts."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "config.json"
    cfg.write_text(json.dumps(SMALL_CFG))
    assert main([
        "synth", "--out", str(root / "dataset"),
        "--views", "20", "--width", "32", "--height", "24", "--supersample", "1",
    ]) == 0
    assert main([
        "train", "--dataset", str(root / "dataset" / "manifest.json"),
        "--out", str(root / "run"), "--config", str(cfg), "--occupancy",
    ]) == 0
    return root


class TestPipeline:
    def test_synth_writes_manifest_and_pngs(self, workdir):
        manifest = json.loads((workdir / "dataset" / "manifest.json").read_text())
        assert len(manifest["cameras"]) == 20
        for entry in manifest["cameras"]:
            assert (workdir / "dataset" / entry["image"]).exists()

    def test_train_writes_checkpoint_and_log(self, workdir):
        blob = (workdir / "run" / "model.plfn").read_bytes()
        header, _ = modelfile.parse_header(blob)
        assert [c["k"] for c in header["chunks"]] == [1, 2, 3, 4]
        assert modelfile.load_occupancy(blob) is not None
        lines = (workdir / "run" / "train_log.jsonl").read_text().splitlines()
        assert all("loss" in json.loads(l) for l in lines)

    def test_eval_report(self, workdir, capsys):
        out = workdir / "report.json"
        assert main([
            "eval", "--checkpoint", str(workdir / "run" / "model.plfn"),
            "--dataset", str(workdir / "dataset" / "manifest.json"),
            "--split", "test", "--out", str(out),
        ]) == 0
        report = json.loads(out.read_text())
        assert set(report["mean"].keys()) == {"1", "2", "3", "4"}
        assert len(report["per_view"]) == 1
        for stats in report["mean"].values():
            assert "psnr_db" in stats and "ssim" in stats

    def test_render_frame(self, workdir):
        cam = data.orbit_camera(32, 24, 0.3, 0.1, 1.5)
        cam_path = workdir / "camera.json"
        cam_path.write_text(json.dumps(cam.to_dict()))
        out = workdir / "frames" / "frame.png"
        assert main([
            "render", "--checkpoint", str(workdir / "run" / "model.plfn"),
            "--camera", str(cam_path), "--out", str(out),
            "--policy", '{"mode": "fixed", "k": 2}',
        ]) == 0
        assert data.load_png(out).shape == (24, 32, 4)
        assert out.with_name("frame_lodmap.png").exists()
        timing = json.loads(out.with_name("frame_timing.json").read_text())
        assert timing["mac_counts"]["network"] > 0

    def test_bench_table(self, workdir):
        out = workdir / "bench.json"
        assert main([
            "bench", "--checkpoint", str(workdir / "run" / "model.plfn"),
            "--dataset", str(workdir / "dataset" / "manifest.json"),
            "--lods", "1", "4", "--scales", "0.5", "--reps", "3",
            "--out", str(out),
        ]) == 0
        rows = json.loads(out.read_text())
        assert len(rows) == 2
        r1, r4 = rows
        assert r4["hidden_mac_per_ray"] == 16 * r1["hidden_mac_per_ray"]

    def test_pack_round_trip(self, workdir):
        src = workdir / "run" / "model.plfn"
        out = workdir / "repacked.plfn"
        assert main([
            "pack", "--checkpoint", str(src), "--out", str(out), "--strip-occupancy",
        ]) == 0
        blob = out.read_bytes()
        assert modelfile.load_occupancy(blob) is None
        orig = modelfile.load_prefix(src.read_bytes(), 4)
        repacked = modelfile.load_prefix(blob, 4)
        for a, b in zip(orig.weights, repacked.weights):
            assert np.array_equal(a, b)


class TestErrors:
    def test_missing_dataset_exit_code(self, tmp_path, capsys):
        code = main([
            "train", "--dataset", str(tmp_path / "nope" / "manifest.json"),
            "--out", str(tmp_path / "run"),
        ])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_policy_exit_code(self, workdir, capsys):
        cam_path = workdir / "camera.json"
        code = main([
            "render", "--checkpoint", str(workdir / "run" / "model.plfn"),
            "--camera", str(cam_path), "--out", str(workdir / "x.png"),
            "--policy", '{"mode": "fixed", "k": 99}',
        ])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(SystemExit):
            main([
                "synth", "--out", str(tmp_path / "d"),
                "--config", str(tmp_path / "missing.json"),
            ])
