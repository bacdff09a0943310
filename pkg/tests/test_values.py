from hypothesis import given
from hypothesis import strategies as st

from mgcheck.values import Record, dumps, freeze, from_json, to_json

def model_values(scalars):
    return st.recursive(
        scalars,
        lambda inner: st.lists(inner, max_size=3).map(tuple)
        | st.frozensets(scalars, max_size=3)
        | st.dictionaries(st.text("abc", min_size=1, max_size=2), inner, max_size=3).map(Record),
        max_leaves=12,
    )


# Python treats False == 0; model variables never mix the two in one slot
numeric = st.none() | st.integers(-50, 50) | st.text("abcXYZ", max_size=4)
values = model_values(numeric | st.booleans())
unmixed = model_values(numeric)


@given(values)
def test_json_round_trip(v):
    assert from_json(to_json(v)) == v


@given(values, values)
def test_equality_and_hash_agree(a, b):
    if a == b:
        assert hash(a) == hash(b)
    if dumps(to_json(a)) == dumps(to_json(b)):
        assert a == b


@given(unmixed, unmixed)
def test_encoding_is_injective(a, b):
    assert (dumps(to_json(a)) == dumps(to_json(b))) == (a == b)


@given(st.frozensets(st.integers(0, 20), max_size=6))
def test_set_encoding_is_canonical(s):
    reordered = frozenset(sorted(s, reverse=True))
    assert dumps(to_json(s)) == dumps(to_json(reordered))


def test_record_is_immutable_and_structural():
    r = Record(a=1, b=(2, 3))
    r2 = r.set(a=5)
    assert r["a"] == 1 and r2["a"] == 5
    assert Record(b=(2, 3), a=1) == r
    assert freeze({"a": [1, {2}]}) == Record(a=(1, frozenset({2})))
