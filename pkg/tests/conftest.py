import shutil
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def corpus_path() -> Path:
    return FIXTURES / "corpus" / "articles.jsonl"


@pytest.fixture()
def workspace(tmp_path, corpus_path) -> Path:
    """Temp working tree with the fixture corpus under corpus/articles.jsonl."""
    corpus_dir = tmp_path / "corpus"
    corpus_dir.mkdir()
    shutil.copy(corpus_path, corpus_dir / "articles.jsonl")
    return tmp_path


def run_cli(argv, cwd):
    """Run the CLI in-process from `cwd`, returning its exit code."""
    import os

    from evidencekit.cli import main

    previous = os.getcwd()
    os.chdir(cwd)
    try:
        try:
            return main(argv)
        except SystemExit as exc:  # argparse exits; surface its code
            return exc.code if isinstance(exc.code, int) else 1
    finally:
        os.chdir(previous)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one pass/fail line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid:
                name = nodeid.split("::")[-1]
                status = "PASS" if outcome == "passed" else "FAIL"
                lines.append((name, status))
    if lines:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"  {status}  {name}")
