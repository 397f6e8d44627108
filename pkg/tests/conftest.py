import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from tsdecode.core import ROLE_PREFIX, ROLE_SOURCE, ROLE_SUFFIX, TokenSeq, TsTask, Vocab
from tsdecode.lm import make_table_model


# The four-token lookup fixture used throughout: bos=0, eos=1, a=2, b=3,
# order 1, single source [a]. Rows chosen so the modal sentence is "a b".
M1_TABLE = {
    ((2,), (0,)): [0.0, 0.1, 0.7, 0.2],
    ((2,), (2,)): [0.0, 0.2, 0.2, 0.6],
    ((2,), (3,)): [0.0, 0.6, 0.3, 0.1],
}


@pytest.fixture(scope="session")
def vocab4():
    return Vocab(size=4)


@pytest.fixture(scope="session")
def m1(vocab4):
    return make_table_model(vocab4, 1, M1_TABLE)


@pytest.fixture(scope="session")
def m1_src():
    return TokenSeq((2,), ROLE_SOURCE)


@pytest.fixture(scope="session")
def m1_task(m1_src):
    """Fill between prefix [a] and suffix [b] under the M1 model."""
    return TsTask("m1", m1_src, TokenSeq((2,), ROLE_PREFIX), TokenSeq((3,), ROLE_SUFFIX))


@pytest.fixture(scope="session")
def m1_task_empty(m1_src):
    """Unconstrained task: both prefix and suffix empty."""
    return TsTask("m1e", m1_src, TokenSeq((), ROLE_PREFIX), TokenSeq((), ROLE_SUFFIX))
