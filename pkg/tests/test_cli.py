import json
import os
from pathlib import Path

import numpy as np
import pytest

from camsim.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, RunConfig, main

SCENE_SPEC = {
    "width": 128, "height": 128, "grid_pitch_um": 3.0,
    "grid": {"start_nm": 400.0, "step_nm": 30.0, "count": 11},
    "background_luminance_cd_m2": 500.0,
    "targets": [
        {"class": "car", "distance_m": 20, "size_m": [0.06, 0.05],
         "reflectance": 0.2},
    ],
    "seed": 4,
}


def run_config(tmp_path, **overrides):
    cfg = {
        "scenes": {"source": "synth", "spec": SCENE_SPEC, "count": 2},
        "sensor": {"dye_width_mm": 0.384, "dye_height_mm": 0.384},
        "exposure": {"mode": "bracketed"},
        "policy": {"min_box_w": 1, "min_box_h": 1},
        "output_dir": str(tmp_path / "out"),
        "seed": 9,
    }
    cfg.update(overrides)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


def test_run_command_outputs(tmp_path):
    rc = main(["run", str(run_config(tmp_path))])
    assert rc == EXIT_OK
    out = tmp_path / "out"
    for name in ("metrics.csv", "summary.json", "detections.json",
                 "dataset.json", "exposures.json"):
        assert (out / name).is_file(), name
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_ground_truth"] == 2
    dataset = json.loads((out / "dataset.json").read_text())
    assert len(dataset["images"]) == 2


def test_run_missing_config_is_config_error(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_run_invalid_json_is_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == EXIT_CONFIG


def test_run_bad_field_is_config_error(tmp_path):
    path = run_config(tmp_path, exposure={"mode": "telepathic"})
    assert main(["run", str(path)]) == EXIT_CONFIG


def test_run_unknown_sensor_key_is_config_error(tmp_path):
    path = run_config(tmp_path, sensor={"dye_w_mm": 1.0})
    assert main(["run", str(path)]) == EXIT_CONFIG


def test_run_deterministic_across_thread_counts(tmp_path, monkeypatch):
    path = run_config(tmp_path, scenes={"source": "synth", "spec": SCENE_SPEC,
                                        "count": 4})
    blobs = []
    for threads in ("1", "8"):
        monkeypatch.setenv("CAMSIM_THREADS", threads)
        assert main(["run", str(path)]) == EXIT_OK
        blobs.append((tmp_path / "out" / "metrics.csv").read_bytes())
    assert blobs[0] == blobs[1]


def test_synth_and_dir_run(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SCENE_SPEC))
    rc = main(["synth", str(spec), str(tmp_path / "scenes"), "-n", "2"])
    assert rc == EXIT_OK
    manifest = json.loads((tmp_path / "scenes" / "manifest.json").read_text())
    assert len(manifest["scenes"]) == 2
    path = run_config(tmp_path, scenes={"source": "dir",
                                        "path": str(tmp_path / "scenes")})
    assert main(["run", str(path)]) == EXIT_OK


def test_eval_command_round_trip(tmp_path):
    path = run_config(tmp_path)
    assert main(["run", str(path)]) == EXIT_OK
    out = tmp_path / "out"
    rc = main(["eval", str(out / "dataset.json"), str(out / "detections.json"),
               str(tmp_path / "scores")])
    assert rc == EXIT_OK
    a = json.loads((out / "summary.json").read_text())
    b = json.loads((tmp_path / "scores" / "summary.json").read_text())
    assert a["ap_overall"] == b["ap_overall"]


def test_plot_command(tmp_path):
    path = run_config(tmp_path)
    assert main(["run", str(path)]) == EXIT_OK
    svg = tmp_path / "c.svg"
    rc = main(["plot", str(tmp_path / "out" / "metrics.csv"), str(svg)])
    assert rc == EXIT_OK
    assert svg.read_text().startswith("<svg")


def test_edge_case_command(tmp_path):
    cfg = {"scenes": {"source": "synth", "spec": {}},
           "output_dir": str(tmp_path / "out"), "seed": 2}
    path = tmp_path / "e.json"
    path.write_text(json.dumps(cfg))
    assert main(["edge-case", str(path)]) == EXIT_OK
    report = json.loads((tmp_path / "out" / "edge_case.json").read_text())
    assert set(report["algorithms"]) == {"center_weighted", "bracketed"}


def test_sweep_pixel_command(tmp_path):
    path = run_config(tmp_path)
    rc = main(["sweep-pixel", str(path), "--sizes", "3", "6"])
    assert rc == EXIT_OK
    csv_text = (tmp_path / "out" / "sweep_pixel.csv").read_text().splitlines()
    assert csv_text[0] == "pixel_size_um,rows,cols,ap_overall,od50_m"
    assert len(csv_text) == 3


def test_run_continues_after_scene_error(tmp_path):
    # one scene directory is corrupted; the other still being processed
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SCENE_SPEC))
    assert main(["synth", str(spec), str(tmp_path / "scenes"), "-n", "2"]) == EXIT_OK
    bad = tmp_path / "scenes" / "scene_0000" / "radiance.sic"
    bad.write_bytes(b"XXXX" + bad.read_bytes()[4:])
    path = run_config(tmp_path, scenes={"source": "dir",
                                        "path": str(tmp_path / "scenes")})
    rc = main(["run", str(path)])
    assert rc == EXIT_RUNTIME
    out = tmp_path / "out"
    assert (out / "errors.log").read_text().startswith("scene_0000")
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_ground_truth"] == 1  # the good scene was still scored
