"""Shared fixtures: the trained benchmark matrix behind the acceptance gate."""

from __future__ import annotations

import pytest

from ipinn.harness import run_cell
from ipinn.problems import get_problem
from ipinn.training import TrainConfig

SEEDS = (0, 1, 2, 3, 4)

# every cell an acceptance criterion reads; other cells are not trained here
BENCHMARK_CELLS = (
    ("logistic", "invariant"),
    ("logistic", "vanilla"),
    ("schwarz", "invariant"),
    ("schwarz", "vanilla"),
    ("oscillator", "invariant"),
    ("exponential", "invariant"),
    ("exponential", "vanilla"),
    ("system", "invariant"),
)


def benchmark_config(problem_name: str, seed: int) -> TrainConfig:
    """Full training budget with the problem's benchmark ic weight."""
    return TrainConfig(seed=seed, alpha_ic=get_problem(problem_name).alpha_ic)


@pytest.fixture(scope="session")
def benchmark_matrix():
    """Reports for all benchmark cells, keyed by (problem, formulation, seed).

    Trains 40 full-budget cells; takes several minutes and runs once.
    """
    matrix = {}
    for problem, formulation in BENCHMARK_CELLS:
        for seed in SEEDS:
            matrix[(problem, formulation, seed)] = run_cell(
                problem, formulation, benchmark_config(problem, seed))
    return matrix


CRITERION_LINES: list[str] = []


def pytest_collection_modifyitems(config, items):
    # surface the fast module tests before the slow trained-matrix gate
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.write_line("")
        terminalreporter.write_line("benchmark acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
