"""Shared fixtures: a tiny on-disk TUDataset and the acceptance reporter."""

import numpy as np
import pytest

ACCEPTANCE_RESULTS = {}


def record_acceptance(criterion: str, passed: bool, detail: str = ""):
    ACCEPTANCE_RESULTS[criterion] = (bool(passed), detail)


def _summary_lines():
    lines = []
    for crit in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[crit]
        status = "PASS" if passed else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        lines.append(f"{crit}: {status}{suffix}")
    return lines


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in _summary_lines():
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tud_dir(tmp_path_factory):
    """Three graphs (triangle, path, star), sizes [3, 3, 4], labels [1, 0, 1].

    Written in TUDataset text format with 1-indexed global node ids and
    both edge directions listed, no node labels or attributes so the
    loader falls back to degree one-hot features.
    """
    root = tmp_path_factory.mktemp("tud")
    edges = [
        (1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2),       # triangle
        (4, 5), (5, 4), (5, 6), (6, 5),                         # path
        (7, 8), (8, 7), (7, 9), (9, 7), (7, 10), (10, 7),       # star
    ]
    (root / "tiny_A.txt").write_text("".join(f"{i}, {j}\n" for i, j in edges))
    indicator = [1, 1, 1, 2, 2, 2, 3, 3, 3, 3]
    (root / "tiny_graph_indicator.txt").write_text("".join(f"{g}\n" for g in indicator))
    (root / "tiny_graph_labels.txt").write_text("1\n0\n1\n")
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(0)
