from pathlib import Path

import numpy as np
import pytest

from ousynth.cli import toy_data_files


@pytest.fixture
def toy_files() -> dict[str, Path]:
    return toy_data_files()


def day_axis(n: int, start: str = "2021-01-04") -> np.ndarray:
    return np.datetime64(start) + np.arange(n)
