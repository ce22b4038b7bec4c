import json
import subprocess
import sys

import numpy as np
import pytest

from fixtures import write_activation_dataset
from voxelrun.cli import build_parser, main
from voxelrun.nifti import Image, load_image, save_image
from voxelrun.pipeline import build_manifest, save_manifest


@pytest.fixture
def dataset(tmp_path):
    return write_activation_dataset(tmp_path, shape=(5, 5, 3))


def test_subcommands_listed():
    text = build_parser().format_help()
    for name in ("info", "fetch", "validate", "design", "diagnose", "smooth", "glm", "run",
                 "report"):
        assert name in text


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["glm", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert main(["frobnicate"]) == 2


def test_info(dataset, capsys):
    assert main(["info", dataset[0]]) == 0
    out = capsys.readouterr().out
    assert "shape: 5 5 3 60" in out and "tr_s: 2" in out


def test_domain_error_exit_one(tmp_path, capsys):
    assert main(["info", str(tmp_path / "missing.nii")]) == 1
    (tmp_path / "bad.nii").write_bytes(b"\x00" * 400)
    assert main(["info", str(tmp_path / "bad.nii")]) == 1
    assert "BadSizeofHdr" in capsys.readouterr().err


def test_validate(tmp_path, capsys):
    (tmp_path / "data").mkdir()
    (tmp_path / "data" / "a.txt").write_text("a")
    save_manifest(build_manifest(tmp_path / "data"), tmp_path / "hashes.json")
    assert main(["validate", str(tmp_path / "hashes.json"), "--root",
                 str(tmp_path / "data")]) == 0
    assert "ok a.txt" in capsys.readouterr().out
    (tmp_path / "data" / "a.txt").write_text("b")
    assert main(["validate", str(tmp_path / "hashes.json"), "--root",
                 str(tmp_path / "data")]) == 1
    assert "mismatch a.txt" in capsys.readouterr().out


def test_fetch(tmp_path):
    (tmp_path / "src").mkdir()
    (tmp_path / "src" / "f.bin").write_bytes(b"xyz")
    save_manifest(build_manifest(tmp_path / "src"), tmp_path / "hashes.json")
    dest = tmp_path / "dest"
    assert main(["--quiet", "fetch", str(tmp_path / "hashes.json"), "--base-url",
                 (tmp_path / "src").as_uri(), "--dest", str(dest)]) == 0
    assert (dest / "f.bin").read_bytes() == b"xyz"


def test_design_and_smooth(dataset, tmp_path):
    img_path, ev_path, _ = dataset
    out = tmp_path / "cli"
    assert main(["--out", str(out), "design", ev_path, "--tr", "2", "--n-scans", "20",
                 "--drift", "1"]) == 0
    lines = (out / "design.txt").read_text().splitlines()
    assert lines[0] == "# intercept task drift1" and len(lines) == 21
    assert main(["smooth", img_path, "--fwhm", "6", "--out", str(out)]) == 0
    assert load_image(out / "run_smooth.nii").shape == (5, 5, 3, 60)
    assert main(["smooth", img_path, "--fwhm", "-1", "-o", str(out / "x.nii")]) == 1


def test_glm_diagnose_report(dataset, tmp_path):
    img_path, ev_path, _ = dataset
    out = tmp_path / "o"
    assert main(["--quiet", "--out", str(out / "analysis"), "glm", img_path, ev_path,
                 "--contrast", "task=0 1", "--contrast", "0 -1", "--fwhm", "5"]) == 0
    summary = json.loads((out / "analysis" / "summary.json").read_text())
    assert [c["name"] for c in summary["contrasts"]] == ["task", "con02"]
    assert main(["--quiet", "diagnose", img_path, "--out", str(out / "eda"),
                 "--events", ev_path]) == 0
    assert (out / "eda" / "mrss_compare.txt").exists()
    assert main(["--quiet", "--out", str(out), "report"]) == 0
    assert (out / "report.md").read_text().startswith("# FMRI run analysis")
    assert main(["--quiet", "--out", str(out / "bad"), "glm", img_path, ev_path,
                 "--contrast", "0 0"]) == 1


def test_run(tmp_path):
    (tmp_path / "Pipeline").write_text("out.txt:\n\techo hi > out.txt\nfail:\n\tfalse\n")
    assert main(["--quiet", "run", "-f", str(tmp_path / "Pipeline")]) == 0
    assert (tmp_path / "out.txt").read_text() == "hi\n"
    assert main(["--quiet", "run", "fail", "-f", str(tmp_path / "Pipeline")]) == 1
    assert main(["--quiet", "run", "nothing", "-f", str(tmp_path / "Pipeline")]) == 1


def test_installed_script(tmp_path, cli_env):
    save_image(Image(np.zeros((2, 2, 2, 1))), tmp_path / "z.nii")
    proc = subprocess.run(["voxelrun", "info", str(tmp_path / "z.nii")], env=cli_env,
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "shape: 2 2 2" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "voxelrun", "--nope"], env=cli_env,
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr
