"""End-to-end command-line behavior, exercised in process through main()."""

import json

import numpy as np
import pytest

from conftest import TINY_OVERRIDES
from seqedit import Checkpoint, read_checkpoint, value_equal, write_checkpoint
from seqedit.checkpoint import hash_bytes
from seqedit.cli import main
from seqedit.editing import keep_count
import seqedit.pipeline as pipeline


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.json"
    path.write_text(json.dumps(TINY_OVERRIDES))
    return path


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory, config_file):
    """One finished tiny benchmark run shared by the report tests."""
    out = tmp_path_factory.mktemp("run")
    code = main(["bench", "run", "--config", str(config_file),
                 "--out-dir", str(out), "--methods", "finetune,ties"])
    assert code == 0
    return out


@pytest.fixture
def ckpt_pair(tmp_path):
    rng = np.random.default_rng(17)
    base = Checkpoint({"layer0.weight": rng.standard_normal((4, 3)).astype(np.float32),
                       "layer0.bias": rng.standard_normal(3).astype(np.float32)})
    ft_tensors = {n: a + rng.standard_normal(a.shape).astype(np.float32) * 0.2
                  for n, a in base.tensors.items()}
    ft = Checkpoint(ft_tensors, {"stage": "1"})
    base_path, ft_path = tmp_path / "base.ckpt", tmp_path / "ft.ckpt"
    write_checkpoint(base, base_path)
    write_checkpoint(ft, ft_path)
    return base_path, ft_path


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.strip() == "seqedit 0.1.0"


def test_ckpt_diff_trim_apply_stats(ckpt_pair, tmp_path, capsys):
    base_path, ft_path = ckpt_pair
    tau_path = tmp_path / "tau.ckpt"
    assert main(["ckpt", "diff", "--minuend", str(ft_path),
                 "--subtrahend", str(base_path), "--out", str(tau_path)]) == 0
    assert "wrote delta" in capsys.readouterr().out

    assert main(["ckpt", "stats", "--in", str(tau_path), "--json"]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["kind"] == "delta"
    assert stats["n_tensors"] == 2
    assert stats["n_total"] == 15
    assert stats["n_nonzero"] == 15

    kept_path = tmp_path / "tau_k.ckpt"
    assert main(["ckpt", "trim", "--in", str(tau_path), "--out", str(kept_path)]) == 0
    assert f"kept {keep_count(0.5, 15)} of 15" in capsys.readouterr().out
    kept = read_checkpoint(kept_path)
    assert kept.meta["trim_k"] == "0.5"

    out_path = tmp_path / "edited.ckpt"
    assert main(["ckpt", "apply", "--base", str(base_path), "--tau", str(tau_path),
                 "--lambda", "1.0", "--out", str(out_path)]) == 0
    capsys.readouterr()
    edited = read_checkpoint(out_path)
    ft = read_checkpoint(ft_path)
    for name in ft.names():
        assert np.allclose(edited.tensors[name], ft.tensors[name], rtol=1e-6, atol=1e-6)

    default_path = tmp_path / "default.ckpt"
    assert main(["ckpt", "apply", "--base", str(base_path), "--tau", str(tau_path),
                 "--out", str(default_path)]) == 0
    capsys.readouterr()
    assert read_checkpoint(default_path).meta["lambda"] == "0.4"


def test_ckpt_stats_on_a_model_checkpoint(ckpt_pair, capsys):
    base_path, _ = ckpt_pair
    assert main(["ckpt", "stats", "--in", str(base_path), "--json"]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["kind"] == "model"
    assert stats["n_params"] == 15
    assert "n_nonzero" not in stats


def test_ckpt_diff_is_reproducible(ckpt_pair, tmp_path, capsys):
    base_path, ft_path = ckpt_pair
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    for out in (a, b):
        assert main(["ckpt", "diff", "--minuend", str(ft_path),
                     "--subtrahend", str(base_path), "--out", str(out)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


def test_exit_codes(ckpt_pair, tmp_path, capsys):
    base_path, ft_path = ckpt_pair
    missing = tmp_path / "nope.ckpt"
    assert main(["ckpt", "diff", "--minuend", str(missing),
                 "--subtrahend", str(base_path), "--out", str(tmp_path / "x")]) == 1
    assert main(["ckpt", "trim", "--in", str(ft_path), "--k", "1.5",
                 "--out", str(tmp_path / "x")]) == 2
    garbage = tmp_path / "garbage.ckpt"
    garbage.write_bytes(b"not a checkpoint at all")
    assert main(["ckpt", "stats", "--in", str(garbage)]) == 2
    assert main(["bench", "run", "--methods", "finetune"]) == 2
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text("{oops")
    assert main(["bench", "run", "--config", str(bad_cfg),
                 "--out-dir", str(tmp_path / "out")]) == 2
    assert main(["report", "table", "--in", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert err.count("error:") == 6


def test_print_config(config_file, capsys, tmp_path):
    ghost = tmp_path / "never_created"
    assert main(["bench", "run", "--config", str(config_file), "--print-config",
                 "--out-dir", str(ghost), "--seed", "7"]) == 0
    resolved = json.loads(capsys.readouterr().out)
    assert resolved["seed"] == 7
    assert resolved["domains"]["count"] == 3
    assert resolved["merge"]["method"] == "ties"
    assert not ghost.exists()


def test_bench_run_directory_layout(bench_dir, config_file):
    for rel in (
        "config.json",
        "stages/finetune/stage_1.json", "stages/finetune/stage_2.json",
        "stages/finetune/final.json",
        "stages/ties/stage_1.json", "stages/ties/stage_2.json",
        "stages/ties/final.json",
        "tables/results.csv", "manifest.json",
    ):
        assert (bench_dir / rel).is_file(), rel

    csv_lines = (bench_dir / "tables" / "results.csv").read_text().splitlines()
    assert csv_lines[0] == "stage,method,domain_0,domain_1,domain_2,awer,werr"
    assert len(csv_lines) == 5
    assert [line.split(",")[1] for line in csv_lines[1:]] == [
        "finetune", "finetune", "ties", "ties"]
    for line in csv_lines[1:3]:
        assert line.endswith(",")
    for line in csv_lines[3:]:
        assert not line.endswith(",")

    record = json.loads((bench_dir / "stages" / "ties" / "stage_2.json").read_text())
    assert record["stage"] == 2
    assert record["merge"] == {"method": "ties", "lambda": 0.6, "k": 0.5, "scope": "global"}
    assert record["base_digest"] == json.loads(
        (bench_dir / "stages" / "ties" / "stage_1.json").read_text())["edited_digest"]

    final = json.loads((bench_dir / "stages" / "ties" / "final.json").read_text())
    assert final["method"] == "ties"
    assert final["metrics"] == record["metrics_edited"]
    assert len(final["model_digest"]) == 16


def test_bench_manifest_inventories_every_output(bench_dir):
    manifest = json.loads((bench_dir / "manifest.json").read_text())
    assert manifest["tool_version"] == "0.1.0"
    assert manifest["seed"] == 42
    assert manifest["config"]["domains"]["count"] == 3
    assert manifest["started_utc"] <= manifest["finished_utc"]
    outputs = manifest["outputs"]
    assert "tables/results.csv" in outputs
    assert "config.json" in outputs
    for rel, expected in outputs.items():
        assert hash_bytes((bench_dir / rel).read_bytes()) == expected, rel


def test_bench_rerun_reproduces_tables(bench_dir, config_file, tmp_path):
    again = tmp_path / "again"
    assert main(["bench", "run", "--config", str(config_file),
                 "--out-dir", str(again), "--methods", "finetune,ties"]) == 0
    for rel in ("tables/results.csv", "config.json",
                "stages/finetune/final.json", "stages/ties/final.json"):
        assert (again / rel).read_bytes() == (bench_dir / rel).read_bytes(), rel


def test_bench_method_subset(config_file, tmp_path, capsys):
    out = tmp_path / "only_ties"
    assert main(["bench", "run", "--config", str(config_file),
                 "--out-dir", str(out), "--methods", "ties"]) == 0
    printed = capsys.readouterr().out
    assert "ties: final awer" in printed
    assert "run complete" in printed
    assert not (out / "stages" / "finetune").exists()
    lines = (out / "tables" / "results.csv").read_text().splitlines()
    assert len(lines) == 3
    assert all(line.split(",")[1] == "ties" for line in lines[1:])


def test_bench_aborted_stage_keeps_partial_records(config_file, tmp_path, capsys,
                                                   monkeypatch):
    real_train = pipeline.train
    calls, boom = {"n": 0}, 3

    def flaky(init, data, cfg):
        calls["n"] += 1
        if calls["n"] == boom:
            from seqedit import DivergenceError
            raise DivergenceError(1, 0, float("inf"))
        return real_train(init, data, cfg)

    monkeypatch.setattr(pipeline, "train", flaky)
    out = tmp_path / "broken"
    code = main(["bench", "run", "--config", str(config_file),
                 "--out-dir", str(out), "--methods", "finetune"])
    assert code == 1
    err = capsys.readouterr().err
    assert "aborted at stage 2" in err
    assert "kept 1 completed stage record(s)" in err
    assert (out / "stages" / "finetune" / "stage_1.json").is_file()
    assert not (out / "stages" / "finetune" / "stage_2.json").exists()
    assert not (out / "tables" / "results.csv").exists()
    assert not (out / "manifest.json").exists()


def test_sweep_lambda_outputs(config_file, tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(["sweep", "lambda", "--config", str(config_file),
                 "--out-dir", str(out), "--stage", "1", "--grid", "0,0.5,1"]) == 0
    printed = capsys.readouterr().out
    assert "lambda 0:" in printed and "lambda 1:" in printed
    table = (out / "tables" / "lambda_sweep.csv").read_text().splitlines()
    assert table[0] == "lambda,previous_domains,new_domain,all_seen"
    assert len(table) == 4
    figure = out / "figures" / "lambda_sweep.png"
    assert figure.is_file() and figure.stat().st_size > 2000
    manifest = json.loads((out / "manifest.json").read_text())
    assert "figures/lambda_sweep.png" in manifest["outputs"]


def test_sweep_rejects_bad_grid(config_file, tmp_path, capsys):
    assert main(["sweep", "lambda", "--config", str(config_file),
                 "--out-dir", str(tmp_path / "s"), "--grid", "0,half,1"]) == 2
    assert "bad grid value" in capsys.readouterr().err


def test_report_table_csv_and_markdown(bench_dir, tmp_path, capsys):
    out = tmp_path / "report"
    assert main(["report", "table", "--in", str(bench_dir),
                 "--out-dir", str(out)]) == 0
    printed = capsys.readouterr().out
    csv_path = out / "tables" / "final_table.csv"
    assert csv_path.is_file()
    text = csv_path.read_text()
    assert text.splitlines()[0] == "stage,method,domain_0,domain_1,domain_2,awer,werr"
    assert text in printed
    assert (out / "figures" / "final_awer.png").stat().st_size > 2000

    assert main(["report", "table", "--in", str(bench_dir),
                 "--out-dir", str(out), "--format", "md"]) == 0
    capsys.readouterr()
    md = (out / "tables" / "final_table.md").read_text()
    assert md.startswith("| stage | method")
    assert "| ties" in md


def test_report_writes_into_run_dir_by_default(bench_dir, capsys):
    assert main(["report", "curve", "--in", str(bench_dir)]) == 0
    capsys.readouterr()
    lines = (bench_dir / "tables" / "stage_curve.csv").read_text().splitlines()
    assert lines[0] == "stage,method,awer"
    assert len(lines) == 5
    methods = {line.split(",")[1] for line in lines[1:]}
    assert methods == {"finetune", "ties"}
    assert (bench_dir / "figures" / "stage_curve.png").is_file()


def test_report_curve_needs_stage_records(config_file, tmp_path, capsys):
    out = tmp_path / "oracle_only"
    assert main(["bench", "run", "--config", str(config_file),
                 "--out-dir", str(out), "--methods", "multitask"]) == 0
    capsys.readouterr()
    assert main(["report", "table", "--in", str(out), "--out-dir",
                 str(tmp_path / "rep")]) == 0
    capsys.readouterr()
    assert main(["report", "curve", "--in", str(out)]) == 2
    assert "no stage-wise records" in capsys.readouterr().err


def test_report_rejects_corrupt_records(bench_dir, tmp_path, capsys):
    import shutil

    broken = tmp_path / "broken_copy"
    shutil.copytree(bench_dir, broken)
    (broken / "stages" / "ties" / "stage_1.json").write_text("{oops")
    assert main(["report", "curve", "--in", str(broken)]) == 2
    assert "corrupt record" in capsys.readouterr().err
