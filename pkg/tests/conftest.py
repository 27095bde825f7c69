import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ctrserve import sample_data
from ctrserve.catalog import ImpressionEvent, Placement, RequestContext


@pytest.fixture(scope="session")
def table6_rows():
    return sample_data.training_sample()


@pytest.fixture(scope="session")
def table9_rows():
    return sample_data.validation_sample()


@pytest.fixture(scope="session")
def table10_pairs():
    return sample_data.validation_pairs()


@pytest.fixture(scope="session")
def sports_map():
    return sample_data.sports_keyword_map()


@pytest.fixture(scope="session")
def paper_model():
    return sample_data.normal_equation_model()


def make_context(placement=Placement.ABOVE_FOLD, size="300x250",
                 category="sports", keywords=("football",), country="PK"):
    return RequestContext(placement=placement, size=size, category=category,
                          page_keywords=frozenset(keywords),
                          location=("", "", country))


def make_event(ad_id="a1", clicked=False, bid=20.0, timestamp=1, **ctx_kwargs):
    return ImpressionEvent(timestamp=timestamp, ad_id=ad_id,
                           context=make_context(**ctx_kwargs),
                           clicked=clicked, served_bid=bid)
