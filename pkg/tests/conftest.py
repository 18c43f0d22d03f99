from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpus import artifact_corpus, bright_benign_corpus  # noqa: E402


@pytest.fixture(scope="session")
def artifact_manifest(tmp_path_factory) -> Path:
    """Manifest of the planted-artifact corpus (40 samples, 4 groups)."""
    return artifact_corpus(tmp_path_factory.mktemp("artifact_corpus"))


@pytest.fixture(scope="session")
def bright_manifest(tmp_path_factory) -> Path:
    """Manifest of 100 bright benign lesions, no attributions."""
    return bright_benign_corpus(tmp_path_factory.mktemp("bright_corpus"))
