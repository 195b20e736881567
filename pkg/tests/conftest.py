import numpy as np
import pytest

from wfisher import DiscreteDist


@pytest.fixture
def step_grid() -> DiscreteDist:
    """Step CDF with F_i = i/1000 for i <= 100 and a final atom carrying 0.9."""
    support = np.arange(1, 102, dtype=float)
    masses = np.r_[np.full(100, 0.001), 0.9]
    return DiscreteDist.from_masses(support, masses)


@pytest.fixture
def step_csv(tmp_path):
    path = tmp_path / "grid.csv"
    lines = ["x,mass"] + [f"{i},0.001" for i in range(1, 101)] + ["101,0.9"]
    path.write_text("\n".join(lines) + "\n")
    return path
