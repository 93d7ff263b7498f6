import os
from pathlib import Path

import pytest

from synthetic import TEST_COUNTS, TRAIN_COUNTS, write_nslkdd

ROOT = Path(__file__).resolve().parents[1]
ACCEPTANCE_LINES: list[str] = []


def nslkdd_path(split: str) -> Path | None:
    """Real NSL-KDD file from $NSLKDD_TRAIN / $NSLKDD_TEST or ./data/, if present."""
    env = os.environ.get(f"NSLKDD_{split.upper()}")
    name = "KDDTrain+.txt" if split == "train" else "KDDTest+.txt"
    for candidate in ([Path(env)] if env else []) + [ROOT / "data" / name]:
        if candidate.is_file():
            return candidate
    return None


@pytest.fixture(scope="session")
def synthetic_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("synthetic")
    train = write_nslkdd(d / "train.txt", TRAIN_COUNTS, seed=1)
    test = write_nslkdd(d / "test.txt", TEST_COUNTS, seed=2, extra_services=("zz_unseen",))
    return train, test


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
