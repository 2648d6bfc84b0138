import json

import pytest

from attnlab.cli import main
from attnlab.harness import RESULT_COLUMNS


def test_grid_subcommand_writes_csv(tmp_path, capsys):
    out = tmp_path / "grid.csv"
    code = main(["grid", "--task", "permuted-copy", "--betas", "1000,0010",
                 "--steps", "0", "--out", str(out)])
    assert code == 0
    lines = out.read_text(encoding="utf-8").strip().split("\n")
    assert lines[0] == ",".join(RESULT_COLUMNS)
    assert len(lines) == 3
    assert {row.split(",")[2] for row in lines[1:]} == {"1000", "0010"}


def test_grid_subcommand_stdout_and_failure_exit(capsys):
    code = main(["grid", "--task", "permuted-copy", "--betas", "1000,zzzz",
                 "--steps", "0"])
    captured = capsys.readouterr()
    assert code == 1
    assert captured.out.startswith(",".join(RESULT_COLUMNS))
    assert "zzzz" in captured.err


def test_grid_subcommand_from_config_file(tmp_path, capsys):
    cfg = {"task": "windowed-denoise", "beta": "0100", "steps": 0,
           "task_options": {"eval_size": 8}}
    path = tmp_path / "run.json"
    path.write_text(json.dumps([cfg, dict(cfg, beta="0000")]),
                    encoding="utf-8")
    code = main(["grid", "--config", str(path)])
    captured = capsys.readouterr()
    assert code == 0
    assert len(captured.out.strip().split("\n")) == 3


def test_flops_subcommand(tmp_path):
    out = tmp_path / "flops.csv"
    code = main(["flops", "--ns", "8,16", "--c", "8", "--nk", "3",
                 "--ng", "2", "--m", "2", "--out", str(out)])
    assert code == 0
    lines = out.read_text(encoding="utf-8").strip().split("\n")
    assert lines[0].startswith("mechanism,term,N_s")
    # 4 term rows + 3 mechanism rows per size
    assert len(lines) == 1 + 2 * 7


def test_check_subcommand_subset(capsys):
    code = main(["check", "--only", "softmax-rows", "uniform-switch"])
    captured = capsys.readouterr()
    assert code == 0
    assert "2/2 checks passed" in captured.out


def test_unknown_task_rejected():
    with pytest.raises(SystemExit):
        main(["grid", "--task", "sorting"])
