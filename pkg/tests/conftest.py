from pathlib import Path

import pytest
import yaml

from tests.scripts import generator_script, grade

ROOT = Path(__file__).resolve().parent.parent
BUNDLED_CORPUS = ROOT / "data" / "synthetic_300.jsonl"
BUNDLED_CONFIG = ROOT / "configs" / "bundled.yaml"


def make_config(tmp_path, **overrides):
    """Write a pipeline config into ``tmp_path`` and return its path."""
    raw = {
        "corpus": {"path": str(BUNDLED_CORPUS)},
        "provider": {"name": "planted-32", "kind": "planted", "dimension": 32},
        "training": {"epochs": 20},
        "agentic": {
            "llm1": {"kind": "scripted", "script": generator_script(2)},
            "llm2": {"kind": "scripted", "script": [grade(5), grade(9)]},
        },
        "run_dir": "runs",
        "run_id": "test",
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(raw.get(key), dict):
            raw[key] = {**raw[key], **value}
        else:
            raw[key] = value
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(raw), encoding="utf-8")
    return path


@pytest.fixture
def config_path(tmp_path):
    return make_config(tmp_path)


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(test_acceptance.RESULTS):
        terminalreporter.write_line(test_acceptance.RESULTS[number])
