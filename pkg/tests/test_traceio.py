import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgcheck.algebra import Constants
from mgcheck.kernel import random_walk
from mgcheck.traceio import HEADER, dumps_trace, loads_trace, read_trace, write_trace
from mgcheck.zab import build_mspec

SPEC = build_mspec(3, Constants(3, 2, 1, 1))


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_round_trip_is_exact(seed):
    (t,) = random_walk(SPEC, seed, 20)
    text = dumps_trace(t)
    back = loads_trace(text)
    assert back == t
    assert dumps_trace(back) == text
    back.validate(SPEC)


def test_file_round_trip(tmp_path):
    (t,) = random_walk(SPEC, 3, 10)
    write_trace(tmp_path / "t.trace", t)
    assert (tmp_path / "t.trace").read_text().splitlines()[0] == HEADER
    assert read_trace(tmp_path / "t.trace") == t


def test_rejects_missing_header():
    with pytest.raises(ValueError):
        loads_trace('{"index": 0, "state": {}}\n')
