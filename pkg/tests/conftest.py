import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
FIXTURES_DIR = TESTS_DIR / "fixtures"

# oracles.py lives next to the tests, not inside the package
sys.path.insert(0, str(TESTS_DIR))

from labelsieve import load_annotations, load_detections  # noqa: E402


@pytest.fixture(scope="session")
def fixture_scene():
    """Frozen 10-object scene: 10 ground truths, 58 detections."""
    ds = load_annotations(FIXTURES_DIR / "scene10_annotations.json")
    dets = load_detections(FIXTURES_DIR / "scene10_detections.json")
    return list(ds.ground_truths), list(dets)
