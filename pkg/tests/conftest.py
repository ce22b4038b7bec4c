import os
import shutil
import sys

import numpy as np
import pytest

from voxelrun.nifti import Image

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEMO_DIR = os.path.join(ROOT, "demo")


@pytest.fixture
def rng():
    return np.random.default_rng(20151)


@pytest.fixture
def cli_env():
    """Environment whose PATH finds the installed ``voxelrun`` script."""
    env = dict(os.environ)
    env["PATH"] = os.path.dirname(sys.executable) + os.pathsep + env.get("PATH", "")
    return env


@pytest.fixture
def demo_copy(tmp_path):
    """Pristine copy of the shipped demo (sources, manifest, Pipeline)."""
    dest = tmp_path / "demo"
    shutil.copytree(DEMO_DIR, dest, ignore=shutil.ignore_patterns(
        "data", "out", ".voxelrun-hashes", "__pycache__"))
    return dest


def make_image(data, voxel=(2.0, 2.0, 2.0), tr=2.0):
    affine = np.diag(list(voxel) + [1.0])
    return Image(np.asarray(data, dtype=float), affine, tr)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
