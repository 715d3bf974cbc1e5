from pathlib import Path

import pytest

from sparecast.rates import RangeEstimate

from helpers import make_document, make_mode, make_part, umode

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def two_mode_pair():
    """The canonical worked pair: P_r 0.7 / 0.6 with rates {1,2,4} / {3,5,6}."""
    return [umode(1, 0.3, RangeEstimate(1, 2, 4)), umode(2, 0.4, RangeEstimate(3, 5, 6))]


@pytest.fixture
def figure1_text() -> str:
    return (FIXTURES / "figure1.json").read_text()


@pytest.fixture
def certain_doc() -> str:
    """A small document with no uncertainty anywhere: analysis runs clean."""
    parts = [
        make_part("root", "assembly", None, weight=200, cost=5000),
        make_part(
            "belt",
            "drive belt",
            "root",
            cls="BELT",
            weight=30,
            cost=400,
            modes=[make_mode("belt.m0", "wearout", 1.0, 40.0, 60.0, 90.0)],
        ),
        make_part(
            "lamp",
            "exposure lamp",
            "root",
            cls="LAMP",
            weight=15,
            cost=900,
            modes=[make_mode("lamp.m0", "random", 0.0, 4.0, 10.0, 22.0)],
        ),
    ]
    return make_document(parts)
