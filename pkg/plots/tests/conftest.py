import pytest

pytest.importorskip("matplotlib")
pytest.importorskip("qsmooth_plots")

from plots_testlib import HEADER, ROWS, write_csv


@pytest.fixture
def trajectory_csv(tmp_path):
    return write_csv(tmp_path / "traj_0000.csv")


@pytest.fixture
def filter_only_csv(tmp_path):
    keep = [j for j, name in enumerate(HEADER) if not name.startswith("smooth.")]
    header = [HEADER[j] for j in keep]
    rows = [[row[j] for j in keep] for row in ROWS]
    return write_csv(tmp_path / "filter_only.csv", header, rows)
