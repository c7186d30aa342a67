import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # pdfread/xlsxread/helpers

from fhirlens.ingest import load_local
from fhirlens.model import parse_resource_tree
from fhirlens.normalize import normalize_batch

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def appendix_bundle_bytes() -> bytes:
    return (DATA_DIR / "appendix_b_bundle.json").read_bytes()


@pytest.fixture(scope="session")
def appendix_dataset(appendix_bundle_bytes):
    return normalize_batch(load_local(appendix_bundle_bytes, "appendix_b_bundle.json"))


def make_tree(resource: dict):
    return parse_resource_tree(json.dumps(resource).encode("utf-8"))


@pytest.fixture
def tree_factory():
    return make_tree
