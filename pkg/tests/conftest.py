import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nncoarse import COEFFICIENTS, FineOperator, build_hierarchy, build_transfer


@pytest.fixture(scope="session")
def grid22():
    """4 subdomains, ratio 2: the reference configuration."""
    hierarchy, subdomains = build_hierarchy(2, 2)
    transfer = build_transfer(hierarchy)
    return hierarchy, subdomains, transfer


@pytest.fixture(scope="session")
def op22(grid22):
    hierarchy, _, _ = grid22
    return FineOperator(hierarchy, COEFFICIENTS["one_plus_u_squared"])
