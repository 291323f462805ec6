import json
import os
import subprocess
import sys

import numpy as np
import pytest

from texfield.cli import SNAPSHOT, main
from texfield.geometry import load_mesh, save_ply
from texfield.geometry.primitives import paint_octants, primitive
from texfield.nets import ModelConfig, TextureFieldModel

SMALL_NET = ["--blocks", "2", "--hidden", "8", "--s-dim", "6", "--z-dim", "4", "--pointnet-hidden", "4",
             "--points", "32", "--encoder-res", "8", "--encoder-hidden", "8"]


@pytest.fixture(scope="module")
def inputs(tmp_path_factory):
    root = tmp_path_factory.mktemp("inputs")
    save_ply(paint_octants(primitive("cube")), root / "cube.ply")
    save_ply(paint_octants(primitive("cone")), root / "cone.ply")
    return root


@pytest.fixture(scope="module")
def cube_data(inputs, tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "d"
    assert main(["gen-data", "--mesh", str(inputs / "cube.ply"), "--views", "10", "--res", "32",
                 "--seed", "7", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def collection(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "c"
    assert main(["gen-data", "--primitive", "cube", "sphere", "--paint", "two-tone", "--views", "3",
                 "--res", "24", "--out", str(out)]) == 0
    return out


def _snapshot(out):
    return json.loads((out / SNAPSHOT).read_text())


def test_gen_data_manifest_has_ten_views(cube_data):
    manifest = json.loads((cube_data / "manifest.json").read_text())
    assert len(manifest["views"]) == 10
    snap = _snapshot(cube_data)
    assert snap["command"] == "gen-data" and snap["views"] == 10 and snap["seed"] == 7


def test_train_cond_zero_iterations_is_initialization(collection, tmp_path):
    out = tmp_path / "t"
    assert main(["train-cond", "--data", str(collection), "--iters", "0", "--seed", "5", *SMALL_NET,
                 "--out", str(out)]) == 0
    trained = TextureFieldModel.load(out / "model.texf")
    init = TextureFieldModel(ModelConfig(mode="conditional", n_blocks=2, hidden=8, s_dim=6, z_dim=4,
                                         pointnet_hidden=4, n_points=32, encoder_res=8, encoder_hidden=8,
                                         init_seed=5))
    for k, v in init.state_dict().items():
        np.testing.assert_array_equal(trained.state_dict()[k], v)


def test_eval_on_perfect_predictions(cube_data, tmp_path):
    assert main(["eval", "--data", str(cube_data), "--pred", str(cube_data), "--out", str(tmp_path)]) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["ssim_mean"] == 1.0 and metrics["l1_mean"] == 0.0
    assert metrics["view_count"] == 10


def test_gen_data_rerun_from_snapshot_is_byte_identical(cube_data, tmp_path):
    again = tmp_path / "again"
    assert main(["gen-data", "--config", str(cube_data / SNAPSHOT), "--out", str(again)]) == 0
    for name in ["manifest.json", "mesh.ply", "view_003.png", "view_009.depth"]:
        assert (again / name).read_bytes() == (cube_data / name).read_bytes()


@pytest.mark.parametrize("command,extra", [
    ("train-overfit", ["--blocks", "2", "--hidden", "8"]),
    ("train-cond", SMALL_NET),
    ("train-vae", SMALL_NET),
])
def test_training_rerun_from_snapshot_is_byte_identical(command, extra, collection, cube_data, tmp_path):
    data = cube_data if command == "train-overfit" else collection
    first = tmp_path / "first"
    assert main([command, "--data", str(data), "--iters", "4", "--batch-size", "2", "--pixel-cap", "32",
                 "--lr", "1e-3", "--log-every", "0", *extra, "--out", str(first)]) == 0
    second = tmp_path / "second"
    assert main([command, "--config", str(first / SNAPSHOT), "--out", str(second)]) == 0
    assert (first / "loss_log.csv").read_bytes() == (second / "loss_log.csv").read_bytes()
    assert (first / "model.texf").read_bytes() == (second / "model.texf").read_bytes()


def _tree(root):
    return sorted(str(p.relative_to(root)) for p in root.rglob("*"))


def test_no_subcommand_writes_outside_out(inputs, collection, cube_data, tmp_path, monkeypatch):
    work = tmp_path / "cwd"
    work.mkdir()
    monkeypatch.chdir(work)
    before = {r: _tree(r) for r in (inputs, collection, cube_data)}
    cube = str(inputs / "cube.ply")
    runs = tmp_path / "runs"
    assert main(["train-overfit", "--data", str(cube_data), "--iters", "2", "--blocks", "2", "--hidden", "8",
                 "--log-every", "0", "--out", str(runs / "over")]) == 0
    assert main(["train-vae", "--data", str(collection), "--iters", "2", "--log-every", "0", *SMALL_NET,
                 "--out", str(runs / "vae")]) == 0
    commands = [
        ["gen-data", "--primitive", "torus", "--views", "2", "--res", "16", "--out", str(runs / "gen")],
        ["render", "--model", str(runs / "over" / "model.texf"), "--mesh", cube, "--views", "2", "--res", "16",
         "--out", str(runs / "render")],
        ["eval", "--data", str(cube_data), "--model", str(runs / "over" / "model.texf"), "--save-renders",
         "--out", str(runs / "eval")],
        ["voxel-baseline", "--data", str(cube_data), "--grid", "8", "--out", str(runs / "vox")],
        ["colorize", "--model", str(runs / "over" / "model.texf"), "--mesh", cube, "--out", str(runs / "col")],
        ["latent-interp", "--model", str(runs / "vae" / "model.texf"), "--data", str(collection),
         "--objects", "cube", "sphere", "--res", "16", "--out", str(runs / "interp")],
        ["latent-transfer", "--model", str(runs / "vae" / "model.texf"), "--source", str(collection / "cube"),
         "--mesh", str(inputs / "cone.ply"), "--res", "16", "--out", str(runs / "transfer")],
    ]
    for argv in commands:
        assert main(argv) == 0, argv[0]
        assert (runs / argv[-1].rsplit("/", 1)[-1] / SNAPSHOT).exists()
    assert {r: _tree(r) for r in (inputs, collection, cube_data)} == before
    assert list(work.iterdir()) == []
    assert sorted(p.name for p in runs.iterdir()) == sorted(
        ["over", "vae", "gen", "render", "eval", "vox", "col", "interp", "transfer"])
    assert len(list((runs / "interp").glob("interp_*.png"))) == 5
    assert (runs / "transfer" / "cone_000.png").exists()
    colored = load_mesh(runs / "col" / "colorized.ply")
    assert colored.n_vertices == load_mesh(inputs / "cube.ply").n_vertices


def test_usage_errors(cube_data, tmp_path, capsys):
    assert main(["gen-data", "--primitive", "cube"]) == 2
    assert "--out is required" in capsys.readouterr().err
    assert main(["eval", "--data", str(cube_data), "--out", str(tmp_path / "e")]) == 2
    assert main(["train-cond", "--out", str(tmp_path / "t")]) == 2
    assert "--data is required" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"command": "render", "views": 3}))
    assert main(["gen-data", "--config", str(bad), "--out", str(tmp_path / "g")]) == 2
    bad.write_text(json.dumps({"bogus": 1}))
    assert main(["gen-data", "--config", str(bad), "--out", str(tmp_path / "g")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_runtime_errors_exit_one(tmp_path, capsys):
    assert main(["eval", "--data", str(tmp_path / "missing"), "--pred", str(tmp_path),
                 "--out", str(tmp_path / "e")]) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("texfield eval: error:")


def _run(args, env=None):
    return subprocess.run([sys.executable, "-m", "texfield", *args], capture_output=True, text=True,
                          env={**os.environ, **(env or {})})


def test_module_entry_point_and_thread_cap(tmp_path):
    ok = _run(["gen-data", "--primitive", "cube", "--views", "1", "--res", "8", "--out", str(tmp_path / "a")],
              env={"TEXF_THREADS": "1"})
    assert ok.returncode == 0, ok.stderr
    bad = _run(["gen-data", "--primitive", "cube", "--out", str(tmp_path / "b")], env={"TEXF_THREADS": "zero"})
    assert bad.returncode == 2 and "TEXF_THREADS" in bad.stderr
    unknown = _run(["nope"])
    assert unknown.returncode == 2
